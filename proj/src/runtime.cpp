#include "gpuleak/runtime.hpp"

#include <algorithm>

#include "gpuleak/errors.hpp"

namespace gpuleak {

std::vector<std::uint32_t> sm_assignment(std::uint32_t grid_size, const DeviceConfig& device) {
    std::vector<std::uint32_t> assignment;
    assignment.reserve(grid_size);
    const auto& order = device.sm_schedule_order;
    for (std::uint32_t b = 0; b < grid_size; ++b) {
        assignment.push_back(order[b % order.size()]);
    }
    return assignment;
}

Simulator::Simulator(DeviceConfig device, SimOptions options)
    : device_(std::move(device)),
      memory_(options.store_bytes,
              options.arena_bytes != 0
                  ? options.arena_bytes
                  : (options.store_bytes / 8) / kWordBytes * kWordBytes) {
    auto violations = validate(device_);
    if (!violations.empty()) {
        std::string msg = "invalid device config:";
        for (const auto& v : violations) msg += "\n  " + v;
        throw ConfigError(msg);
    }
    if (options.store_bytes > device_.global_mem_size) {
        throw ConfigError("simulated store exceeds the device's memory capacity");
    }
    shared_.assign(device_.num_multiprocessors, SharedMemoryBank(device_.shared_words_per_bank()));
}

Context& Simulator::running_context(ContextId ctx) {
    auto it = contexts_.find(ctx);
    if (it == contexts_.end()) throw ContextStateError("unknown context " + std::to_string(ctx));
    if (it->second.state != Context::State::kRunning) {
        throw ContextStateError("context " + std::to_string(ctx) + " is terminated");
    }
    return it->second;
}

ContextId Simulator::create_context() {
    Context c;
    c.id = next_context_++;
    contexts_.emplace(c.id, c);
    return c.id;
}

void Simulator::destroy_context(ContextId ctx) {
    Context& c = running_context(ctx);
    for (const auto& [ticket, launch] : queue_) {
        if (launch.ctx == ctx) {
            throw ContextStateError("context " + std::to_string(ctx) +
                                    " still has queued launches");
        }
    }

    // The runtime scrubs shared memory on process exit; global memory keeps
    // its residue (unless a zeroing policy says otherwise).
    for (auto& bank : shared_) bank.zero();

    for (AllocationId id : c.allocations) {
        memory_.free(ctx, id);
        if (policy_.mode == ZeroingPolicy::Mode::kZeroOnFree) {
            charge(policy_.cost_model.fixed_cost +
                   policy_.cost_model.per_word_cost *
                       static_cast<double>(memory_.last_zeroed_words()));
        }
    }
    c.allocations.clear();
    c.state = Context::State::kTerminated;
}

const Context& Simulator::context(ContextId ctx) const {
    auto it = contexts_.find(ctx);
    if (it == contexts_.end()) throw ContextStateError("unknown context " + std::to_string(ctx));
    return it->second;
}

Allocation Simulator::alloc(ContextId ctx, std::uint64_t size_bytes, AllocMode mode) {
    Context& c = running_context(ctx);
    Allocation a = memory_.alloc(ctx, size_bytes, mode);
    if (policy_.mode == ZeroingPolicy::Mode::kZeroOnAlloc) {
        charge(policy_.cost_model.fixed_cost +
               policy_.cost_model.per_word_cost * static_cast<double>(memory_.last_zeroed_words()));
    }
    c.allocations.push_back(a.id);
    return a;
}

void Simulator::free(ContextId ctx, AllocationId id) {
    Context& c = running_context(ctx);
    memory_.free(ctx, id);
    if (policy_.mode == ZeroingPolicy::Mode::kZeroOnFree) {
        charge(policy_.cost_model.fixed_cost +
               policy_.cost_model.per_word_cost * static_cast<double>(memory_.last_zeroed_words()));
    }
    c.allocations.erase(std::remove(c.allocations.begin(), c.allocations.end(), id),
                        c.allocations.end());
}

std::vector<Word> Simulator::checked_read(ContextId ctx, AllocationId id,
                                          std::uint64_t offset_words,
                                          std::uint64_t count_words) const {
    return memory_.checked_read(ctx, id, offset_words, count_words);
}

void Simulator::checked_write(ContextId ctx, AllocationId id, std::uint64_t offset_words,
                              std::span<const Word> data) {
    memory_.checked_write(ctx, id, offset_words, data);
}

Ticket Simulator::launch(KernelLaunch launch) {
    Context& c = running_context(launch.ctx);
    if (launch.grid_size == 0) throw ConfigError("launch: grid_size must be >= 1");
    if (launch.block_size == 0 || launch.block_size % device_.warp_size != 0) {
        throw ConfigError("launch: block_size must be a positive warp multiple");
    }
    for (const LaunchArg& arg : launch.args) {
        if (const AllocationId* id = std::get_if<AllocationId>(&arg)) {
            const Allocation* a = memory_.find_live(*id);
            if (a == nullptr) {
                throw UnknownAllocationError(*id);
            }
            if (a->owner != launch.ctx) {
                throw OwnershipError("launch argument allocation " + std::to_string(*id) +
                                     " belongs to context " + std::to_string(a->owner));
            }
        }
    }
    c.launch_count++;
    const Ticket ticket = next_ticket_++;
    queue_.emplace_back(ticket, std::move(launch));
    return ticket;
}

std::vector<CompletedLaunch> Simulator::run_until_idle() {
    std::vector<CompletedLaunch> completed;
    while (!queue_.empty()) {
        auto [ticket, launch] = std::move(queue_.front());
        queue_.pop_front();

        ExecRequest req;
        req.ctx = launch.ctx;
        req.program = &launch.program;
        req.block_assignment = sm_assignment(launch.grid_size, device_);
        req.spill_seed = launch.spill_seed;
        req.args.reserve(launch.args.size());
        for (const LaunchArg& arg : launch.args) {
            ResolvedArg resolved;
            if (const AllocationId* id = std::get_if<AllocationId>(&arg)) {
                resolved.buffer = memory_.find_live(*id);
                if (resolved.buffer == nullptr) {
                    throw LaunchFault(ticket, "argument allocation " + std::to_string(*id) +
                                                  " no longer live");
                }
            } else {
                resolved.scalar = std::get<Word>(arg);
            }
            req.args.push_back(resolved);
        }

        ExecOptions options;
        options.shared_zero_tail = policy_.mode == ZeroingPolicy::Mode::kInKernelShared;
        options.spill_write_passthrough = spill_write_passthrough_;

        try {
            CompletedLaunch done;
            done.ticket = ticket;
            done.ctx = launch.ctx;
            done.trace = execute(req, device_, memory_, shared_, options);
            completed.push_back(std::move(done));
        } catch (const VmFault& fault) {
            throw LaunchFault(ticket, fault.what());
        }

        if (options.shared_zero_tail) {
            charge(policy_.cost_model.fixed_cost);
        }
    }
    return completed;
}

void Simulator::install_policy(const ZeroingPolicy& policy) {
    if (!queue_.empty()) {
        throw PolicyInstallError("cannot change zeroing policy with launches queued");
    }
    policy_ = policy;
    memory_.set_zero_on_free(policy.mode == ZeroingPolicy::Mode::kZeroOnFree);
    memory_.set_zero_on_alloc(policy.mode == ZeroingPolicy::Mode::kZeroOnAlloc);
}

void Simulator::charge(double units) {
    sim_time_ += units;
    charge_log_.push_back(units);
}

}  // namespace gpuleak
