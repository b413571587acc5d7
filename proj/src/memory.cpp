#include "gpuleak/memory.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

#include "gpuleak/errors.hpp"

namespace gpuleak {

GlobalMemory::GlobalMemory(std::uint64_t store_bytes, std::uint64_t arena_bytes) {
    if (store_bytes == 0 || store_bytes % kWordBytes != 0 || arena_bytes % kWordBytes != 0) {
        throw ConfigError("store and arena sizes must be positive word multiples");
    }
    const std::uint64_t store_words = store_bytes / kWordBytes;
    const std::uint64_t arena_words = arena_bytes / kWordBytes;
    if (arena_words >= store_words) {
        throw ConfigError("spill arena must be smaller than the store");
    }
    store_.assign(store_words, 0u);
    usable_words_ = store_words - arena_words;
    free_list_.push_back({0, usable_words_, 0});
}

std::size_t GlobalMemory::pick_region(std::uint64_t want_words, const AllocMode& mode) const {
    std::vector<std::size_t> fitting;
    for (std::size_t i = 0; i < free_list_.size(); ++i) {
        if (free_list_[i].length >= want_words) fitting.push_back(i);
    }
    if (fitting.empty()) throw OutOfMemoryError(want_words * kWordBytes);

    if (mode.kind == AllocMode::Kind::kRandomized) {
        std::mt19937_64 rng(mode.seed);
        return fitting[rng() % fitting.size()];
    }

    // Exact-reuse: most-recently-freed region of exactly the requested length.
    std::size_t best = free_list_.size();
    std::uint64_t best_seq = 0;
    for (std::size_t i : fitting) {
        if (free_list_[i].length == want_words && free_list_[i].freed_seq >= best_seq) {
            best = i;
            best_seq = free_list_[i].freed_seq;
        }
    }
    if (best != free_list_.size()) return best;

    // First fit: lowest offset that fits (free_list_ is offset-sorted).
    return fitting.front();
}

Allocation GlobalMemory::alloc(ContextId ctx, std::uint64_t size_bytes, AllocMode mode) {
    last_zeroed_words_ = 0;
    if (size_bytes == 0) throw ConfigError("alloc: size must be > 0");
    const std::uint64_t want = (size_bytes + kWordBytes - 1) / kWordBytes;

    const std::size_t idx = pick_region(want, mode);
    FreeRegion region = free_list_[idx];

    Allocation a;
    a.id = next_id_++;
    a.owner = ctx;
    a.offset = region.offset;
    a.length = want;
    a.state = AllocState::kLive;

    if (region.length == want) {
        free_list_.erase(free_list_.begin() + static_cast<std::ptrdiff_t>(idx));
    } else {
        free_list_[idx].offset += want;
        free_list_[idx].length -= want;
    }

    if (zero_on_alloc_) {
        std::fill(store_.begin() + static_cast<std::ptrdiff_t>(a.offset),
                  store_.begin() + static_cast<std::ptrdiff_t>(a.offset + a.length), 0u);
        last_zeroed_words_ = a.length;
    }

    allocations_.emplace(a.id, a);
    return a;
}

void GlobalMemory::release_region(std::uint64_t offset, std::uint64_t length) {
    FreeRegion region{offset, length, next_freed_seq_++};

    // Insert sorted by offset, then coalesce with adjacent free regions. The
    // merged region inherits the fresh sequence number, so exact-reuse still
    // sees it as most recently freed.
    auto it = std::lower_bound(
        free_list_.begin(), free_list_.end(), region,
        [](const FreeRegion& a, const FreeRegion& b) { return a.offset < b.offset; });
    it = free_list_.insert(it, region);

    if (it != free_list_.begin()) {
        auto prev = it - 1;
        if (prev->offset + prev->length == it->offset) {
            prev->length += it->length;
            prev->freed_seq = it->freed_seq;
            it = free_list_.erase(it) - 1;
        }
    }
    if (it + 1 != free_list_.end()) {
        auto next = it + 1;
        if (it->offset + it->length == next->offset) {
            it->length += next->length;
            free_list_.erase(next);
        }
    }
}

void GlobalMemory::free(ContextId ctx, AllocationId id) {
    last_zeroed_words_ = 0;
    auto it = allocations_.find(id);
    if (it == allocations_.end()) throw UnknownAllocationError(id);
    Allocation& a = it->second;
    if (a.state == AllocState::kFreed) throw DoubleFreeError(id);
    if (a.owner != ctx) {
        throw OwnershipError("free: allocation " + std::to_string(id) + " belongs to context " +
                             std::to_string(a.owner));
    }

    if (zero_on_free_) {
        std::fill(store_.begin() + static_cast<std::ptrdiff_t>(a.offset),
                  store_.begin() + static_cast<std::ptrdiff_t>(a.offset + a.length), 0u);
        last_zeroed_words_ = a.length;
    }

    a.state = AllocState::kFreed;
    release_region(a.offset, a.length);
}

Allocation& GlobalMemory::live_owned(ContextId ctx, AllocationId id) {
    auto it = allocations_.find(id);
    if (it == allocations_.end()) throw UnknownAllocationError(id);
    if (it->second.state != AllocState::kLive) {
        throw UnknownAllocationError(id);
    }
    if (it->second.owner != ctx) {
        throw OwnershipError("allocation " + std::to_string(id) + " belongs to context " +
                             std::to_string(it->second.owner));
    }
    return it->second;
}

const Allocation& GlobalMemory::live_owned(ContextId ctx, AllocationId id) const {
    return const_cast<GlobalMemory*>(this)->live_owned(ctx, id);
}

std::vector<Word> GlobalMemory::checked_read(ContextId ctx, AllocationId id,
                                             std::uint64_t offset_words,
                                             std::uint64_t count_words) const {
    const Allocation& a = live_owned(ctx, id);
    if (offset_words + count_words > a.length) {
        throw BoundsError("read past allocation " + std::to_string(id));
    }
    const auto begin = store_.begin() + static_cast<std::ptrdiff_t>(a.offset + offset_words);
    return {begin, begin + static_cast<std::ptrdiff_t>(count_words)};
}

void GlobalMemory::checked_write(ContextId ctx, AllocationId id, std::uint64_t offset_words,
                                 std::span<const Word> data) {
    Allocation& a = live_owned(ctx, id);
    if (offset_words + data.size() > a.length) {
        throw BoundsError("write past allocation " + std::to_string(id));
    }
    std::copy(data.begin(), data.end(),
              store_.begin() + static_cast<std::ptrdiff_t>(a.offset + offset_words));
}

std::vector<Word> GlobalMemory::raw_read(std::uint64_t offset_words,
                                         std::uint64_t count_words) const {
    if (offset_words + count_words > store_.size()) {
        throw BoundsError("raw_read out of store bounds");
    }
    const auto begin = store_.begin() + static_cast<std::ptrdiff_t>(offset_words);
    return {begin, begin + static_cast<std::ptrdiff_t>(count_words)};
}

void GlobalMemory::raw_write(std::uint64_t offset_words, std::span<const Word> data) {
    if (offset_words + data.size() > store_.size()) {
        throw BoundsError("raw_write out of store bounds");
    }
    std::copy(data.begin(), data.end(),
              store_.begin() + static_cast<std::ptrdiff_t>(offset_words));
}

const Allocation& GlobalMemory::allocation(AllocationId id) const {
    auto it = allocations_.find(id);
    if (it == allocations_.end()) throw UnknownAllocationError(id);
    return it->second;
}

const Allocation* GlobalMemory::find_live(AllocationId id) const {
    auto it = allocations_.find(id);
    if (it == allocations_.end() || it->second.state != AllocState::kLive) return nullptr;
    return &it->second;
}

std::vector<FreeRegion> GlobalMemory::free_regions() const { return free_list_; }

std::uint64_t GlobalMemory::free_words() const {
    std::uint64_t total = 0;
    for (const auto& r : free_list_) total += r.length;
    return total;
}

void GlobalMemory::check_invariants() const {
    // Live allocations and free regions must tile the usable region exactly.
    std::vector<std::pair<std::uint64_t, std::uint64_t>> spans;
    for (const auto& [id, a] : allocations_) {
        if (a.state == AllocState::kLive) spans.emplace_back(a.offset, a.length);
    }
    for (const auto& r : free_list_) spans.emplace_back(r.offset, r.length);
    std::sort(spans.begin(), spans.end());

    std::uint64_t cursor = 0;
    for (const auto& [offset, length] : spans) {
        if (offset < cursor) throw std::logic_error("memory map overlap at word " +
                                                    std::to_string(offset));
        if (offset > cursor) throw std::logic_error("memory map gap at word " +
                                                    std::to_string(cursor));
        cursor = offset + length;
    }
    if (cursor != usable_words_) {
        throw std::logic_error("memory map does not cover the usable store");
    }
}

}  // namespace gpuleak
