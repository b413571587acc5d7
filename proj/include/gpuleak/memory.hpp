#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "gpuleak/device.hpp"

namespace gpuleak {

using Word = std::uint32_t;
using ContextId = std::uint64_t;
using AllocationId = std::uint64_t;

enum class AllocState { kLive, kFreed };

struct Allocation {
    AllocationId id = 0;
    ContextId owner = 0;
    std::uint64_t offset = 0;  // word index into the store
    std::uint64_t length = 0;  // words
    AllocState state = AllocState::kLive;
};

// Placement policy for alloc(). Exact-reuse is the default: a freed region of
// exactly the requested length is reissued most-recently-freed first, otherwise
// the lowest-offset fitting region is split. Randomized picks uniformly among
// fitting regions with the given seed; used by the case-study experiments.
struct AllocMode {
    enum class Kind { kExactReuse, kRandomized } kind = Kind::kExactReuse;
    std::uint64_t seed = 0;

    static AllocMode exact_reuse() { return {Kind::kExactReuse, 0}; }
    static AllocMode randomized(std::uint64_t seed) { return {Kind::kRandomized, seed}; }
};

struct FreeRegion {
    std::uint64_t offset = 0;  // words
    std::uint64_t length = 0;  // words
    std::uint64_t freed_seq = 0;
};

// Byte-addressed (word-granular) global store with an allocation map and
// explicit residue semantics: freeing never touches store contents unless a
// zeroing hook is installed by the runtime.
class GlobalMemory {
public:
    // store_bytes is the simulated device memory actually backed by host RAM;
    // the top arena_bytes are reserved for isolated register spills and are
    // never handed out by the allocator. Both must be word multiples.
    GlobalMemory(std::uint64_t store_bytes, std::uint64_t arena_bytes);

    std::uint64_t store_words() const { return store_.size(); }
    std::uint64_t usable_words() const { return usable_words_; }
    std::uint64_t arena_offset() const { return usable_words_; }
    std::uint64_t arena_words() const { return store_.size() - usable_words_; }

    Allocation alloc(ContextId ctx, std::uint64_t size_bytes,
                     AllocMode mode = AllocMode::exact_reuse());
    void free(ContextId ctx, AllocationId id);

    std::vector<Word> checked_read(ContextId ctx, AllocationId id, std::uint64_t offset_words,
                                   std::uint64_t count_words) const;
    void checked_write(ContextId ctx, AllocationId id, std::uint64_t offset_words,
                       std::span<const Word> data);

    // Test-oracle access ignoring the allocation map. Not a simulated-attacker path.
    std::vector<Word> raw_read(std::uint64_t offset_words, std::uint64_t count_words) const;
    void raw_write(std::uint64_t offset_words, std::span<const Word> data);

    const Allocation& allocation(AllocationId id) const;
    const Allocation* find_live(AllocationId id) const;
    std::vector<FreeRegion> free_regions() const;  // sorted by offset
    std::uint64_t free_words() const;

    // Zeroing hooks, installed by the runtime when a countermeasure policy is
    // active. Cleared == baseline residue behavior.
    void set_zero_on_free(bool on) { zero_on_free_ = on; }
    void set_zero_on_alloc(bool on) { zero_on_alloc_ = on; }
    bool zero_on_free() const { return zero_on_free_; }
    bool zero_on_alloc() const { return zero_on_alloc_; }

    // Words zeroed by the last alloc/free call; the runtime charges policy
    // costs from this.
    std::uint64_t last_zeroed_words() const { return last_zeroed_words_; }

    // Direct store access for the kernel VM.
    Word load(std::uint64_t offset) const { return store_[offset]; }
    void store_word(std::uint64_t offset, Word value) { store_[offset] = value; }

    // Verifies live-allocation disjointness and free-list coverage of the
    // usable region; throws std::logic_error on violation. Cheap enough to run
    // after every alloc/free in tests.
    void check_invariants() const;

private:
    std::vector<Word> store_;
    std::uint64_t usable_words_ = 0;
    std::map<AllocationId, Allocation> allocations_;  // every id ever issued
    std::vector<FreeRegion> free_list_;               // kept sorted by offset
    AllocationId next_id_ = 1;
    std::uint64_t next_freed_seq_ = 1;
    bool zero_on_free_ = false;
    bool zero_on_alloc_ = false;
    std::uint64_t last_zeroed_words_ = 0;

    std::size_t pick_region(std::uint64_t want_words, const AllocMode& mode) const;
    Allocation& live_owned(ContextId ctx, AllocationId id);
    const Allocation& live_owned(ContextId ctx, AllocationId id) const;
    void release_region(std::uint64_t offset, std::uint64_t length);
};

// Fast per-multiprocessor scratchpad. Residue persists across kernel launches
// within and across contexts; only context destruction or the in-kernel
// zeroing countermeasure clears it.
class SharedMemoryBank {
public:
    explicit SharedMemoryBank(std::uint64_t words) : words_(words, 0) {}

    std::uint64_t size() const { return words_.size(); }
    Word load(std::uint64_t offset) const { return words_[offset]; }
    void store(std::uint64_t offset, Word value) { words_[offset] = value; }
    void zero() { std::fill(words_.begin(), words_.end(), 0u); }
    void zero_prefix(std::uint64_t words) {
        std::fill(words_.begin(), words_.begin() + static_cast<std::ptrdiff_t>(words), 0u);
    }
    const std::vector<Word>& words() const { return words_; }

private:
    std::vector<Word> words_;
};

}  // namespace gpuleak
