#include "gpuleak/countermeasures.hpp"

#include <algorithm>

#include "gpuleak/errors.hpp"
#include "gpuleak/runtime.hpp"

namespace gpuleak {

std::string to_string(ZeroingPolicy::Mode mode) {
    switch (mode) {
        case ZeroingPolicy::Mode::kNone: return "none";
        case ZeroingPolicy::Mode::kZeroOnFree: return "zero-on-free";
        case ZeroingPolicy::Mode::kZeroOnAlloc: return "zero-on-alloc";
        case ZeroingPolicy::Mode::kInKernelShared: return "in-kernel-shared";
    }
    return "none";
}

ZeroingPolicy::Mode policy_mode_from_string(const std::string& name) {
    if (name == "none") return ZeroingPolicy::Mode::kNone;
    if (name == "zero-on-free") return ZeroingPolicy::Mode::kZeroOnFree;
    if (name == "zero-on-alloc") return ZeroingPolicy::Mode::kZeroOnAlloc;
    if (name == "in-kernel-shared") return ZeroingPolicy::Mode::kInKernelShared;
    throw ConfigError("unknown policy mode: " + name);
}

CostModel default_cost_model(const DeviceConfig& device) {
    CostModel model;
    // Per-word zeroing parallelizes over multiprocessors.
    model.per_word_cost = 2.8e-5 / static_cast<double>(device.num_multiprocessors);
    if (device.name == "geforce-gt640") {
        model.fixed_cost = 1.66;
    } else if (device.name == "tesla-c2050") {
        model.fixed_cost = 0.27;
    } else {
        model.fixed_cost = 1.0;
    }
    return model;
}

std::vector<OverheadRecord> measure_overhead(const DeviceConfig& device,
                                             const ZeroingPolicy& policy,
                                             std::span<const std::uint64_t> sizes_bytes) {
    if (sizes_bytes.empty()) throw ConfigError("measure_overhead: sizes must be non-empty");
    std::vector<OverheadRecord> records;
    records.reserve(sizes_bytes.size());

    for (std::uint64_t size : sizes_bytes) {
        if (policy.mode == ZeroingPolicy::Mode::kInKernelShared) {
            // One kernel touching `size` bytes of each bank; the policy appends
            // the zeroing tail and charges its constant cost.
            SimOptions options;
            options.store_bytes = std::max<std::uint64_t>(device.total_shared_bytes() * 2,
                                                          1ull << 20);
            Simulator sim(device, options);
            sim.install_policy(policy);
            const ContextId ctx = sim.create_context();
            const std::uint64_t bank_words = device.shared_words_per_bank();
            const std::uint64_t len = std::min<std::uint64_t>(
                std::max<std::uint64_t>(size / kWordBytes, 1), bank_words);
            Allocation buf =
                sim.alloc(ctx, len * device.num_multiprocessors * kWordBytes);

            KernelLaunch launch;
            launch.ctx = ctx;
            launch.grid_size = device.num_multiprocessors;
            launch.block_size = device.warp_size;
            launch.args = {buf.id};
            launch.program.instructions = {CopyGlobalToShared{0, 0, len}};

            const double before = sim.sim_time();
            sim.launch(launch);
            sim.run_until_idle();
            records.push_back({policy.mode, size, sim.sim_time() - before});
            continue;
        }

        SimOptions options;
        options.store_bytes = size + (8ull << 20);
        Simulator sim(device, options);
        sim.install_policy(policy);
        const ContextId ctx = sim.create_context();

        const double before = sim.sim_time();
        Allocation a = sim.alloc(ctx, size);
        if (policy.mode == ZeroingPolicy::Mode::kZeroOnFree ||
            policy.mode == ZeroingPolicy::Mode::kNone) {
            sim.free(ctx, a.id);
        }
        records.push_back({policy.mode, size, sim.sim_time() - before});
    }
    return records;
}

AffineFit fit_affine(std::span<const OverheadRecord> records) {
    const double n = static_cast<double>(records.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& r : records) {
        const double x = static_cast<double>(r.buffer_bytes);
        sx += x;
        sy += r.elapsed;
        sxx += x * x;
        sxy += x * r.elapsed;
    }
    AffineFit fit;
    const double denom = n * sxx - sx * sx;
    if (denom != 0.0) {
        fit.slope = (n * sxy - sx * sy) / denom;
        fit.intercept = (sy - fit.slope * sx) / n;
    } else {
        fit.slope = 0.0;
        fit.intercept = records.empty() ? 0.0 : sy / n;
    }
    for (const auto& r : records) {
        const double predicted =
            fit.intercept + fit.slope * static_cast<double>(r.buffer_bytes);
        const double err = r.elapsed - predicted;
        fit.residual += err * err;
    }
    return fit;
}

}  // namespace gpuleak
