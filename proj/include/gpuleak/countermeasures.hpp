#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gpuleak/device.hpp"

namespace gpuleak {

class Simulator;

// Simulated time units charged per zeroing operation. elapsed for the global
// policies is fixed_cost + per_word_cost * words; the in-kernel shared policy
// charges fixed_cost only (constant, independent of the zeroed size).
struct CostModel {
    double fixed_cost = 0.0;
    double per_word_cost = 0.0;
};

struct ZeroingPolicy {
    enum class Mode { kNone, kZeroOnFree, kZeroOnAlloc, kInKernelShared };
    Mode mode = Mode::kNone;
    CostModel cost_model;
};

std::string to_string(ZeroingPolicy::Mode mode);
ZeroingPolicy::Mode policy_mode_from_string(const std::string& name);

// Default cost profiles. The fixed costs for the two shipped presets are
// calibrated against the measured in-kernel zeroing overheads of those cards;
// the per-word cost scales inversely with multiprocessor count, which is what
// makes the wider card's zeroing line flatter.
CostModel default_cost_model(const DeviceConfig& device);

struct OverheadRecord {
    ZeroingPolicy::Mode policy = ZeroingPolicy::Mode::kNone;
    std::uint64_t buffer_bytes = 0;
    double elapsed = 0.0;  // simulated time units
};

// For each size, performs the policy's zeroing-bearing operation on a fresh
// simulator and records the simulated elapsed time. Global policies run an
// alloc/free cycle of `size` bytes; the in-kernel shared policy runs a kernel
// that touches `size` bytes of each bank (clamped to the bank size).
std::vector<OverheadRecord> measure_overhead(const DeviceConfig& device,
                                             const ZeroingPolicy& policy,
                                             std::span<const std::uint64_t> sizes_bytes);

// Least-squares fit of elapsed against buffer_bytes.
struct AffineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double residual = 0.0;  // sum of squared residuals
};

AffineFit fit_affine(std::span<const OverheadRecord> records);

}  // namespace gpuleak
