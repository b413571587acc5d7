#include "gpuleak/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "gpuleak/errors.hpp"

namespace gpuleak {

namespace {

// Zero-valued victim words are indistinguishable from scrubbed memory, so the
// leak accounting only considers nonzero victim writes as recoverable.
constexpr Word kScrubValue = 0;

// True if `observed` appears, in order, within `written`.
bool is_subsequence(const std::vector<Word>& observed, const std::vector<Word>& written) {
    std::size_t w = 0;
    for (Word value : observed) {
        while (w < written.size() && written[w] != value) ++w;
        if (w == written.size()) return false;
        ++w;
    }
    return true;
}

void finalize_counts(LeakReport& report) {
    report.leaked_words = report.leaked_addresses.size();
    report.recovery_fraction =
        report.total_victim_words == 0
            ? 0.0
            : static_cast<double>(report.leaked_words) /
                  static_cast<double>(report.total_victim_words);
    if (report.recovery_fraction == 1.0) report.classification = LeakClass::kFull;
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t x = a * 0x9E3779B97F4A7C15ull + b;
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ull;
    x ^= x >> 27;
    return x;
}

}  // namespace

std::string to_string(LeakClass c) {
    switch (c) {
        case LeakClass::kNone: return "none";
        case LeakClass::kKeyLeak: return "key_leak";
        case LeakClass::kPlaintextLeak: return "plaintext_leak";
        case LeakClass::kFull: return "full";
    }
    return "none";
}

void to_json(nlohmann::json& j, const LeakReport& report) {
    j = nlohmann::json{{"scenario", report.scenario},
                       {"leaked_words", report.leaked_words},
                       {"leaked_addresses", report.leaked_addresses},
                       {"total_victim_words", report.total_victim_words},
                       {"recovery_fraction", report.recovery_fraction},
                       {"ordered_match", report.ordered_match},
                       {"classification", to_string(report.classification)}};
    if (!report.round_counts.empty()) {
        nlohmann::json rounds = nlohmann::json::array();
        for (const auto& [round, distinct] : report.round_counts) {
            rounds.push_back(nlohmann::json::array({round, distinct}));
        }
        j["round_counts"] = std::move(rounds);
    }
}

void to_json(nlohmann::json& j, const IntegrityReport& report) {
    j = nlohmann::json{{"scenario", "write-attack"},
                       {"runs", report.runs},
                       {"digests_checked", report.digests_checked},
                       {"violations", report.violations}};
}

void to_json(nlohmann::json& j, const AesCaseResult& result) {
    j = nlohmann::json{{"scenario", "aes-case"},
                       {"per_round_successes", result.per_round_successes},
                       {"runs_per_round", result.runs_per_round},
                       {"trials", result.trials},
                       {"successes", result.successes},
                       {"key_leaks", result.key_leaks},
                       {"plaintext_leaks", result.plaintext_leaks},
                       {"mean", result.mean},
                       {"stddev", result.stddev}};
}

LeakReport shared_leak_scenario(const DeviceConfig& device, const SharedLeakParams& params) {
    const std::uint64_t bank_words = device.shared_words_per_bank();
    const std::uint32_t nsm = device.num_multiprocessors;
    const std::uint64_t total_words = bank_words * nsm;

    SimOptions options;
    options.store_bytes = std::max<std::uint64_t>(4ull << 20, total_words * kWordBytes * 4);
    Simulator sim(device, options);
    sim.install_policy(params.policy);

    const ContextId victim = sim.create_context();
    const ContextId attacker = sim.create_context();
    const Allocation victim_buf = sim.alloc(victim, total_words * kWordBytes);
    const Allocation attacker_buf = sim.alloc(attacker, total_words * kWordBytes);

    std::vector<Word> pattern(total_words);
    for (std::uint64_t i = 0; i < total_words; ++i) pattern[i] = static_cast<Word>(i);
    sim.checked_write(victim, victim_buf.id, 0, pattern);

    KernelLaunch victim_launch;
    victim_launch.ctx = victim;
    victim_launch.grid_size = nsm;
    victim_launch.block_size = device.warp_size;
    victim_launch.args = {victim_buf.id};
    victim_launch.program.instructions = {CopyGlobalToShared{0, 0, bank_words}};

    KernelLaunch attacker_launch;
    attacker_launch.ctx = attacker;
    attacker_launch.grid_size = nsm;
    attacker_launch.block_size = device.warp_size;
    attacker_launch.args = {attacker_buf.id};
    attacker_launch.program.instructions = {CopySharedToGlobal{0, 0, bank_words}};

    std::vector<CompletedLaunch> completed;
    bool victim_destroyed = false;
    if (params.destroy_victim_first) {
        for (std::uint32_t k = 0; k < params.k_iterations; ++k) sim.launch(victim_launch);
        auto first = sim.run_until_idle();
        completed.insert(completed.end(), first.begin(), first.end());
        sim.destroy_context(victim);
        victim_destroyed = true;
        for (std::uint32_t k = 0; k < params.k_iterations; ++k) sim.launch(attacker_launch);
        auto second = sim.run_until_idle();
        completed.insert(completed.end(), second.begin(), second.end());
    } else {
        for (std::uint32_t k = 0; k < params.k_iterations; ++k) {
            sim.launch(victim_launch);
            sim.launch(attacker_launch);
        }
        completed = sim.run_until_idle();
    }

    const std::vector<Word> recovered =
        sim.checked_read(attacker, attacker_buf.id, 0, total_words);
    const auto assignment = sm_assignment(nsm, device);

    LeakReport report;
    report.scenario = "shared-leak";
    std::vector<Word> observed_leaked;
    for (std::uint64_t i = 0; i < total_words; ++i) {
        if (pattern[i] == kScrubValue) continue;
        report.total_victim_words++;
        if (recovered[i] == pattern[i]) {
            const std::uint64_t block = i / bank_words;
            const std::uint64_t word = i % bank_words;
            report.leaked_addresses.push_back(assignment[block] * bank_words + word);
            observed_leaked.push_back(recovered[i]);
        }
    }
    std::sort(report.leaked_addresses.begin(), report.leaked_addresses.end());
    report.ordered_match = !observed_leaked.empty() && is_subsequence(observed_leaked, pattern);
    finalize_counts(report);

    // Shadow oracle: replay victim writes and attacker reads over an
    // independent model of the banks, using trace addresses only.
    {
        std::vector<std::vector<Word>> shadow(nsm, std::vector<Word>(bank_words, 0));
        std::map<std::uint64_t, Word> victim_written;  // flattened shared addr -> value
        std::map<std::uint64_t, Word> attacker_view;   // last value read per addr
        bool banks_zeroed_done = false;
        for (const auto& done : completed) {
            if (!banks_zeroed_done && victim_destroyed && done.ctx == attacker) {
                // destroy_context happened between the two launch batches
                for (auto& bank : shadow) std::fill(bank.begin(), bank.end(), 0u);
                banks_zeroed_done = true;
            }
            for (const auto& instr : done.trace.instructions) {
                if (done.ctx == victim) {
                    std::uint64_t slice = 0;
                    for (const auto& w : instr.shared_writes) {
                        for (std::uint64_t i = 0; i < w.length; ++i) {
                            shadow[w.bank][w.offset + i] = pattern[slice * bank_words + i];
                            victim_written[w.bank * bank_words + w.offset + i] =
                                pattern[slice * bank_words + i];
                        }
                        ++slice;
                    }
                } else {
                    for (const auto& r : instr.shared_reads) {
                        for (std::uint64_t i = 0; i < r.length; ++i) {
                            attacker_view[r.bank * bank_words + r.offset + i] =
                                shadow[r.bank][r.offset + i];
                        }
                    }
                }
            }
        }
        for (const auto& [addr, value] : victim_written) {
            if (value == kScrubValue) continue;
            auto it = attacker_view.find(addr);
            if (it != attacker_view.end() && it->second == value) {
                report.oracle_addresses.push_back(addr);
            }
        }
    }
    return report;
}

namespace {

// Largest divisor of total_words that fits in one bank, so a grid of
// total/len blocks moves the whole buffer through shared memory.
std::uint64_t pick_slice(std::uint64_t total_words, std::uint64_t bank_words) {
    std::uint64_t best = 1;
    for (std::uint64_t len = 1; len * len <= total_words; ++len) {
        if (total_words % len != 0) continue;
        const std::uint64_t hi = total_words / len;
        if (hi <= bank_words) return hi;
        if (len <= bank_words) best = std::max(best, len);
    }
    return best;
}

KernelLaunch make_copy_launch(const DeviceConfig& device, ContextId ctx, AllocationId src,
                              AllocationId dst, std::uint64_t words) {
    const std::uint64_t slice = pick_slice(words, device.shared_words_per_bank());
    KernelLaunch launch;
    launch.ctx = ctx;
    launch.grid_size = static_cast<std::uint32_t>(words / slice);
    launch.block_size = device.warp_size;
    launch.args = {src, dst};
    launch.program.instructions = {CopyGlobalToShared{0, 0, slice},
                                   CopySharedToGlobal{1, 0, slice}};
    return launch;
}

}  // namespace

LeakReport global_leak_scenario(const DeviceConfig& device, const GlobalLeakParams& params) {
    const std::uint64_t d_words = params.d_bytes / kWordBytes;
    if (d_words == 0) throw ConfigError("global_leak_scenario: d_bytes too small");
    std::vector<std::uint64_t> attacker_sizes = params.attacker_sizes;
    if (attacker_sizes.empty()) attacker_sizes.assign(4, params.d_bytes);
    if (attacker_sizes.size() != 4) {
        throw ConfigError("global_leak_scenario: attacker allocates four vectors");
    }

    std::uint64_t attacker_total = 0;
    for (std::uint64_t s : attacker_sizes) attacker_total += s;
    SimOptions options;
    options.store_bytes =
        std::max<std::uint64_t>(4ull << 20, (4 * params.d_bytes + attacker_total) * 2);
    Simulator sim(device, options);
    sim.install_policy(params.policy);

    // Victim: four vectors, host-initialized V1/V2, kernel-copied into V3/V4.
    const ContextId victim = sim.create_context();
    std::vector<Allocation> v;
    for (int i = 0; i < 4; ++i) v.push_back(sim.alloc(victim, params.d_bytes));

    std::vector<Word> pattern1(d_words), pattern2(d_words);
    for (std::uint64_t i = 0; i < d_words; ++i) {
        pattern1[i] = static_cast<Word>(i);
        pattern2[i] = static_cast<Word>(d_words + i);
    }
    sim.checked_write(victim, v[0].id, 0, pattern1);
    sim.checked_write(victim, v[1].id, 0, pattern2);
    sim.launch(make_copy_launch(device, victim, v[0].id, v[2].id, d_words));
    sim.launch(make_copy_launch(device, victim, v[1].id, v[3].id, d_words));
    sim.run_until_idle();

    // Victim-written map (analytic shadow of the victim's effects).
    std::map<std::uint64_t, Word> victim_written;
    std::vector<Word> written_order;
    auto record_victim = [&](const Allocation& a, const std::vector<Word>& values) {
        for (std::uint64_t i = 0; i < values.size(); ++i) {
            victim_written[a.offset + i] = values[i];
            written_order.push_back(values[i]);
        }
    };
    record_victim(v[0], pattern1);
    record_victim(v[1], pattern2);
    record_victim(v[2], pattern1);  // kernel copies
    record_victim(v[3], pattern2);

    sim.destroy_context(victim);

    // Attacker: same shape, same kernel, no initialization.
    const ContextId attacker = sim.create_context();
    std::vector<Allocation> a;
    for (int i = 0; i < 4; ++i) a.push_back(sim.alloc(attacker, attacker_sizes[i]));
    const std::uint64_t copy0 = std::min(a[0].length, a[2].length);
    const std::uint64_t copy1 = std::min(a[1].length, a[3].length);
    sim.launch(make_copy_launch(device, attacker, a[0].id, a[2].id, copy0));
    sim.launch(make_copy_launch(device, attacker, a[1].id, a[3].id, copy1));
    const auto attacker_done = sim.run_until_idle();

    const std::vector<Word> back3 = sim.checked_read(attacker, a[2].id, 0, a[2].length);
    const std::vector<Word> back4 = sim.checked_read(attacker, a[3].id, 0, a[3].length);

    // The attacker holds (device address, value) pairs: its readback buffers
    // directly, and the copy sources inferred through the kernel's mapping.
    std::map<std::uint64_t, Word> observed;
    std::vector<std::pair<std::uint64_t, Word>> observed_order;
    auto observe = [&](std::uint64_t addr, Word value) {
        observed[addr] = value;
        observed_order.emplace_back(addr, value);
    };
    for (std::uint64_t i = 0; i < copy0; ++i) observe(a[0].offset + i, back3[i]);
    for (std::uint64_t i = 0; i < copy1; ++i) observe(a[1].offset + i, back4[i]);
    for (std::uint64_t i = 0; i < back3.size(); ++i) observe(a[2].offset + i, back3[i]);
    for (std::uint64_t i = 0; i < back4.size(); ++i) observe(a[3].offset + i, back4[i]);

    LeakReport report;
    report.scenario = "global-leak";
    for (const auto& [addr, value] : victim_written) {
        if (value != kScrubValue) report.total_victim_words++;
    }
    std::set<std::uint64_t> leaked;
    std::vector<Word> observed_leaked;
    for (const auto& [addr, value] : observed_order) {
        auto it = victim_written.find(addr);
        if (it != victim_written.end() && it->second == value && value != kScrubValue) {
            if (leaked.insert(addr).second) observed_leaked.push_back(value);
        }
    }
    report.leaked_addresses.assign(leaked.begin(), leaked.end());
    report.ordered_match =
        !observed_leaked.empty() && is_subsequence(observed_leaked, written_order);
    finalize_counts(report);

    // Oracle: attacker-touched addresses from the execution traces plus its
    // host readbacks, value-checked against the final store.
    {
        std::set<std::uint64_t> attacker_read;
        for (const auto& done : attacker_done) {
            for (const auto& instr : done.trace.instructions) {
                for (const auto& span : instr.global_reads) {
                    for (std::uint64_t i = 0; i < span.length; ++i) {
                        attacker_read.insert(span.offset + i);
                    }
                }
            }
        }
        for (std::uint64_t i = 0; i < a[2].length; ++i) attacker_read.insert(a[2].offset + i);
        for (std::uint64_t i = 0; i < a[3].length; ++i) attacker_read.insert(a[3].offset + i);
        for (std::uint64_t addr : attacker_read) {
            auto it = victim_written.find(addr);
            if (it == victim_written.end() || it->second == kScrubValue) continue;
            if (sim.memory().load(addr) == it->second) {
                report.oracle_addresses.push_back(addr);
            }
        }
    }
    return report;
}

LeakReport register_spill_scenario(const DeviceConfig& device,
                                   const RegisterSpillParams& params) {
    const std::uint64_t victim_words = params.victim_bytes / kWordBytes;
    const std::uint32_t spilled =
        static_cast<std::uint32_t>(params.reg_bytes / kWordBytes);
    if (victim_words == 0 || spilled == 0) {
        throw ConfigError("register_spill_scenario: sizes too small");
    }
    const std::uint32_t declared = device.registers_per_block + spilled;

    SimOptions options;
    options.store_bytes = params.store_bytes != 0
                              ? params.store_bytes
                              : std::max<std::uint64_t>(params.victim_bytes * 2, 16ull << 20);
    Simulator sim(device, options);

    // Victim allocates first (lowest offsets) and stays live for the whole
    // experiment; the leak does not need a free.
    const ContextId victim = sim.create_context();
    const Allocation victim_buf = sim.alloc(victim, params.victim_bytes);

    constexpr Word kMark = 0xdeadbeefu;
    KernelLaunch mark;
    mark.ctx = victim;
    mark.grid_size = 2;
    mark.block_size = device.warp_size;
    mark.args = {victim_buf.id};
    mark.program.instructions = {WriteGlobal{0, 0, victim_words, kMark, 1}};
    sim.launch(mark);
    sim.run_until_idle();

    const ContextId attacker = sim.create_context();
    const Allocation dump_buf =
        sim.alloc(attacker, static_cast<std::uint64_t>(declared) * kWordBytes);

    LeakReport report;
    report.scenario = "register-spill";
    report.total_victim_words = victim_words;

    std::set<std::uint64_t> leaked;
    std::set<std::uint64_t> oracle;
    std::vector<Word> observed_leaked;
    for (std::uint32_t round = 0; round < params.rounds; ++round) {
        KernelLaunch probe;
        probe.ctx = attacker;
        probe.grid_size = 2;
        probe.block_size = device.warp_size;
        probe.args = {dump_buf.id};
        probe.spill_seed = params.seed + round;
        probe.program.instructions = {ReserveRegisters{declared}, DumpRegisters{0}};
        sim.launch(probe);
        const auto done = sim.run_until_idle();

        const std::vector<Word> dumped =
            sim.checked_read(attacker, dump_buf.id, 0, declared);
        for (Word value : dumped) {
            const std::uint64_t delta = static_cast<std::uint64_t>(value) - kMark;
            if (value >= kMark && delta < victim_words) {
                const std::uint64_t addr = victim_buf.offset + delta;
                if (leaked.insert(addr).second) observed_leaked.push_back(value);
            }
        }
        for (const auto& launch_done : done) {
            for (const auto& instr : launch_done.trace.instructions) {
                for (const auto& span : instr.spill_reads) {
                    for (std::uint64_t i = 0; i < span.length; ++i) {
                        const std::uint64_t addr = span.offset + i;
                        if (addr >= victim_buf.offset &&
                            addr < victim_buf.offset + victim_buf.length &&
                            sim.memory().load(addr) ==
                                kMark + static_cast<Word>(addr - victim_buf.offset)) {
                            oracle.insert(addr);
                        }
                    }
                }
            }
        }
        report.round_counts.emplace_back(round + 1, leaked.size());
    }

    report.leaked_addresses.assign(leaked.begin(), leaked.end());
    std::vector<Word> written_order(victim_words);
    for (std::uint64_t i = 0; i < victim_words; ++i) {
        written_order[i] = kMark + static_cast<Word>(i);
    }
    report.ordered_match =
        !observed_leaked.empty() && is_subsequence(observed_leaked, written_order);
    finalize_counts(report);
    report.oracle_addresses.assign(oracle.begin(), oracle.end());
    return report;
}

IntegrityReport write_attack_scenario(const DeviceConfig& device,
                                      const WriteAttackParams& params) {
    const PlaintextBuffer plaintext = PlaintextBuffer::fixed_16k();
    const std::vector<Word> plaintext_words = plaintext.words();
    const std::array<std::uint8_t, 20> expected = sha1(plaintext.bytes);
    const std::vector<Word> digest_words =
        bytes_to_words(std::span<const std::uint8_t>(expected.data(), expected.size()));

    SimOptions options;
    options.store_bytes = 16ull << 20;
    Simulator sim(device, options);
    sim.set_spill_write_passthrough(params.disable_write_shadow);

    const ContextId victim = sim.create_context();
    const Allocation input = sim.alloc(victim, plaintext.bytes.size());
    sim.checked_write(victim, input.id, 0, plaintext_words);
    std::vector<Allocation> digests;
    digests.reserve(params.hashes_per_run);
    for (std::uint32_t i = 0; i < params.hashes_per_run; ++i) {
        digests.push_back(sim.alloc(victim, digest_words.size() * kWordBytes));
    }
    const Allocation scratch = sim.alloc(victim, plaintext.bytes.size());

    const ContextId attacker = sim.create_context();
    const std::uint32_t declared = device.registers_per_block + 1024;

    IntegrityReport report;
    report.runs = params.runs;
    for (std::uint32_t run = 0; run < params.runs; ++run) {
        // The victim's hash pass: one compute launch plus the digest stores.
        sim.launch(make_copy_launch(device, victim, input.id, scratch.id, 2048));
        for (const Allocation& d : digests) {
            sim.checked_write(victim, d.id, 0, digest_words);
        }

        KernelLaunch interference;
        interference.ctx = attacker;
        interference.grid_size = 2;
        interference.block_size = device.warp_size;
        interference.spill_seed = run;
        interference.program.instructions = {ReserveRegisters{declared},
                                             WriteRegisters{0x0badc0deu}};
        sim.launch(interference);
        sim.run_until_idle();

        for (const Allocation& d : digests) {
            const std::vector<Word> stored =
                sim.checked_read(victim, d.id, 0, digest_words.size());
            report.digests_checked++;
            if (stored != digest_words) report.violations++;
        }
    }
    return report;
}

FindLeakageOutcome find_leakage(Simulator& sim, ContextId attacker,
                                std::span<const Word> plaintext_words,
                                std::span<const Word> key_words) {
    // "All currently allocable memory": greedily take every free region.
    std::vector<Allocation> grabbed;
    while (sim.memory().free_words() > 0) {
        const auto regions = sim.memory().free_regions();
        grabbed.push_back(sim.alloc(attacker, regions.front().length * kWordBytes));
    }
    std::sort(grabbed.begin(), grabbed.end(),
              [](const Allocation& x, const Allocation& y) { return x.offset < y.offset; });

    // Merge address-adjacent allocations into contiguous scan runs.
    struct Run {
        std::uint64_t offset = 0;
        std::vector<Word> data;
    };
    std::vector<Run> runs;
    for (const Allocation& a : grabbed) {
        std::vector<Word> data = sim.checked_read(attacker, a.id, 0, a.length);
        if (!runs.empty() && runs.back().offset + runs.back().data.size() == a.offset) {
            runs.back().data.insert(runs.back().data.end(), data.begin(), data.end());
        } else {
            runs.push_back({a.offset, std::move(data)});
        }
    }

    FindLeakageOutcome outcome;
    auto cleanup = [&]() {
        // cudamemset analog on every exit path, then release.
        for (const Allocation& a : grabbed) {
            std::vector<Word> zeros(a.length, 0u);
            sim.checked_write(attacker, a.id, 0, zeros);
            sim.free(attacker, a.id);
        }
    };

    for (const Run& run : runs) {
        for (std::uint64_t j = 0; j < run.data.size(); ++j) {
            outcome.scanned_words++;
            const Word w = run.data[j];
            if (std::find(key_words.begin(), key_words.end(), w) != key_words.end()) {
                outcome.found = true;
                outcome.classification = LeakClass::kKeyLeak;
                outcome.match_offset = run.offset + j;
                cleanup();
                return outcome;
            }
            if (!plaintext_words.empty() && w == plaintext_words[0]) {
                bool match = j + plaintext_words.size() <= run.data.size();
                for (std::uint64_t i = 0; match && i < plaintext_words.size(); ++i) {
                    if (run.data[j + i] != plaintext_words[i]) match = false;
                }
                if (match) {
                    outcome.found = true;
                    outcome.classification = LeakClass::kPlaintextLeak;
                    outcome.match_offset = run.offset + j;
                } else {
                    outcome.found = false;
                    outcome.classification = LeakClass::kNone;
                }
                cleanup();
                return outcome;
            }
        }
    }
    cleanup();
    return outcome;
}

namespace {

struct RoundTally {
    std::uint32_t successes = 0;
    std::uint64_t key_leaks = 0;
    std::uint64_t plaintext_leaks = 0;
};

RoundTally run_exact_round(const DeviceConfig& device, const AesCaseParams& params,
                           std::span<const Word> pt_words, std::span<const Word> rk_words,
                           std::span<const Word> ct_words, std::span<const Word> key_words) {
    SimOptions options;
    options.store_bytes = 64 * 1024;
    Simulator sim(device, options);
    sim.install_policy(params.policy);

    RoundTally tally;
    for (std::uint32_t run = 0; run < params.runs_per_round; ++run) {
        const ContextId victim = sim.create_context();
        const Allocation p = sim.alloc(victim, pt_words.size() * kWordBytes);
        const Allocation k = sim.alloc(victim, rk_words.size() * kWordBytes);
        const Allocation c = sim.alloc(victim, ct_words.size() * kWordBytes);
        sim.checked_write(victim, p.id, 0, pt_words);
        sim.checked_write(victim, k.id, 0, rk_words);
        sim.checked_write(victim, c.id, 0, ct_words);
        sim.destroy_context(victim);

        const ContextId attacker = sim.create_context();
        const FindLeakageOutcome outcome = find_leakage(sim, attacker, pt_words, key_words);
        sim.destroy_context(attacker);
        if (outcome.found) {
            tally.successes++;
            if (outcome.classification == LeakClass::kKeyLeak) tally.key_leaks++;
            if (outcome.classification == LeakClass::kPlaintextLeak) tally.plaintext_leaks++;
        }
    }
    return tally;
}

// The randomized experiment models the concurrent reality of the case study:
// the victim loops forever, so at the moment the attacker's scan reaches the
// head of the queue the victim's next iteration has already re-allocated its
// buffers (hiding whatever they cover) but not yet written them. The store is
// pre-fragmented into equal slots so placement actually varies.
RoundTally run_randomized_round(const DeviceConfig& device, const AesCaseParams& params,
                                std::uint32_t round, std::span<const Word> pt_words,
                                std::span<const Word> rk_words, std::span<const Word> ct_words,
                                std::span<const Word> key_words) {
    using Layout = AesCaseLayout;
    SimOptions options;
    options.arena_bytes = 1024 * kWordBytes;
    options.store_bytes = Layout::kUsableWords * kWordBytes + options.arena_bytes;
    Simulator sim(device, options);
    sim.install_policy(params.policy);

    // Pin one word between slots so freed slots never coalesce across them.
    const ContextId background = sim.create_context();
    std::vector<AllocationId> placeholders;
    for (std::uint32_t s = 0; s < Layout::kSlots; ++s) {
        placeholders.push_back(sim.alloc(background, Layout::kSlotWords * kWordBytes).id);
        sim.alloc(background, kWordBytes);
    }
    sim.alloc(background, kWordBytes);
    for (AllocationId id : placeholders) sim.free(background, id);

    std::mt19937_64 rng(mix_seed(params.seed, round));
    const ContextId victim = sim.create_context();
    auto alloc_buffers = [&]() {
        std::array<Allocation, 3> bufs{
            sim.alloc(victim, pt_words.size() * kWordBytes, AllocMode::randomized(rng())),
            sim.alloc(victim, rk_words.size() * kWordBytes, AllocMode::randomized(rng())),
            sim.alloc(victim, ct_words.size() * kWordBytes, AllocMode::randomized(rng()))};
        return bufs;
    };

    RoundTally tally;
    auto current = alloc_buffers();
    for (std::uint32_t run = 0; run < params.runs_per_round; ++run) {
        sim.checked_write(victim, current[0].id, 0, pt_words);
        sim.checked_write(victim, current[1].id, 0, rk_words);
        sim.checked_write(victim, current[2].id, 0, ct_words);
        sim.free(victim, current[0].id);
        sim.free(victim, current[1].id);
        sim.free(victim, current[2].id);
        current = alloc_buffers();  // next iteration already holds its buffers

        const ContextId attacker = sim.create_context();
        const FindLeakageOutcome outcome = find_leakage(sim, attacker, pt_words, key_words);
        sim.destroy_context(attacker);
        if (outcome.found) {
            tally.successes++;
            if (outcome.classification == LeakClass::kKeyLeak) tally.key_leaks++;
            if (outcome.classification == LeakClass::kPlaintextLeak) tally.plaintext_leaks++;
        }
    }
    return tally;
}

}  // namespace

AesCaseResult aes_case_study(const DeviceConfig& device, const AesCaseParams& params) {
    const AesKey128 key = AesKey128::from_words(case_study_key_words());
    const PlaintextBuffer plaintext = PlaintextBuffer::fixed_4k();
    const std::vector<Word> pt_words = plaintext.words();
    const std::vector<Word> ct_words = bytes_to_words(aes128_encrypt_ecb(plaintext.bytes, key));
    const std::vector<Word> rk_words(key.round_keys.begin(), key.round_keys.end());
    const std::vector<Word> key_words(key.key.begin(), key.key.end());

    AesCaseResult result;
    result.runs_per_round = params.runs_per_round;
    for (std::uint32_t round = 0; round < params.rounds; ++round) {
        const RoundTally tally =
            params.allocator_mode == AllocMode::Kind::kRandomized
                ? run_randomized_round(device, params, round, pt_words, rk_words, ct_words,
                                       key_words)
                : run_exact_round(device, params, pt_words, rk_words, ct_words, key_words);
        result.per_round_successes.push_back(tally.successes);
        result.successes += tally.successes;
        result.key_leaks += tally.key_leaks;
        result.plaintext_leaks += tally.plaintext_leaks;
    }
    result.trials =
        static_cast<std::uint64_t>(params.rounds) * static_cast<std::uint64_t>(params.runs_per_round);

    double sum = 0.0;
    for (std::uint32_t s : result.per_round_successes) {
        sum += static_cast<double>(s) / static_cast<double>(params.runs_per_round);
    }
    result.mean = params.rounds == 0 ? 0.0 : sum / static_cast<double>(params.rounds);
    double var = 0.0;
    for (std::uint32_t s : result.per_round_successes) {
        const double rate = static_cast<double>(s) / static_cast<double>(params.runs_per_round);
        var += (rate - result.mean) * (rate - result.mean);
    }
    result.stddev =
        params.rounds == 0 ? 0.0 : std::sqrt(var / static_cast<double>(params.rounds));
    return result;
}

}  // namespace gpuleak
