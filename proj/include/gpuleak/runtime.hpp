#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <variant>
#include <vector>

#include "gpuleak/countermeasures.hpp"
#include "gpuleak/device.hpp"
#include "gpuleak/kernel.hpp"
#include "gpuleak/memory.hpp"

namespace gpuleak {

// Process analog: owns device allocations, queues kernel work. Destroying a
// context zeroes all shared memory banks but leaves its freed global memory
// untouched; that asymmetry is the global-memory vulnerability.
struct Context {
    ContextId id = 0;
    enum class State { kRunning, kTerminated } state = State::kRunning;
    std::vector<AllocationId> allocations;  // live, in creation order
    std::uint64_t launch_count = 0;
};

using LaunchArg = std::variant<AllocationId, Word>;

struct KernelLaunch {
    ContextId ctx = 0;
    KernelProgram program;
    std::uint32_t grid_size = 1;
    std::uint32_t block_size = 32;
    std::vector<LaunchArg> args;
    std::uint64_t spill_seed = 0;
};

using Ticket = std::uint64_t;

struct CompletedLaunch {
    Ticket ticket = 0;
    ContextId ctx = 0;
    ExecutionTrace trace;
};

// Block b runs on sm_schedule_order[b]; blocks beyond the multiprocessor count
// wrap round-robin over the same order.
std::vector<std::uint32_t> sm_assignment(std::uint32_t grid_size, const DeviceConfig& device);

struct SimOptions {
    // Device memory actually backed by host RAM; presets carry multi-GB nominal
    // capacities, desk-scale runs use much less.
    std::uint64_t store_bytes = 64ull * 1024 * 1024;
    // Private register-spill arena at the top of the store; 0 = store / 8.
    std::uint64_t arena_bytes = 0;
};

// Single-threaded simulator core: owns all memory state, context table and the
// global FIFO launch queue. Launches execute one at a time with no preemption
// across contexts.
class Simulator {
public:
    explicit Simulator(DeviceConfig device, SimOptions options = {});

    const DeviceConfig& device() const { return device_; }
    GlobalMemory& memory() { return memory_; }
    const GlobalMemory& memory() const { return memory_; }
    std::vector<SharedMemoryBank>& shared_banks() { return shared_; }
    const std::vector<SharedMemoryBank>& shared_banks() const { return shared_; }

    ContextId create_context();
    void destroy_context(ContextId ctx);
    const Context& context(ContextId ctx) const;

    Allocation alloc(ContextId ctx, std::uint64_t size_bytes,
                     AllocMode mode = AllocMode::exact_reuse());
    void free(ContextId ctx, AllocationId id);
    std::vector<Word> checked_read(ContextId ctx, AllocationId id, std::uint64_t offset_words,
                                   std::uint64_t count_words) const;
    void checked_write(ContextId ctx, AllocationId id, std::uint64_t offset_words,
                       std::span<const Word> data);

    Ticket launch(KernelLaunch launch);
    std::vector<CompletedLaunch> run_until_idle();
    std::size_t queued_launches() const { return queue_.size(); }

    void install_policy(const ZeroingPolicy& policy);
    const ZeroingPolicy& policy() const { return policy_; }

    double sim_time() const { return sim_time_; }
    // Every individual policy charge, for independent cost accounting.
    const std::vector<double>& policy_charges() const { return charge_log_; }

    // Test hook: route writes through spilled registers directly into the
    // store instead of the shadow.
    void set_spill_write_passthrough(bool on) { spill_write_passthrough_ = on; }

private:
    DeviceConfig device_;
    GlobalMemory memory_;
    std::vector<SharedMemoryBank> shared_;
    std::map<ContextId, Context> contexts_;
    std::deque<std::pair<Ticket, KernelLaunch>> queue_;
    ContextId next_context_ = 1;
    Ticket next_ticket_ = 1;
    ZeroingPolicy policy_;
    double sim_time_ = 0.0;
    std::vector<double> charge_log_;
    bool spill_write_passthrough_ = false;

    Context& running_context(ContextId ctx);
    void charge(double units);
};

}  // namespace gpuleak
