#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace gpuleak {

struct UnknownPresetError : std::runtime_error {
    explicit UnknownPresetError(const std::string& name)
        : std::runtime_error("unknown device preset: " + name) {}
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct OutOfMemoryError : std::runtime_error {
    explicit OutOfMemoryError(std::uint64_t bytes)
        : std::runtime_error("out of device memory: cannot place " + std::to_string(bytes) +
                             " bytes") {}
};

struct OwnershipError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DoubleFreeError : std::runtime_error {
    explicit DoubleFreeError(std::uint64_t id)
        : std::runtime_error("allocation " + std::to_string(id) + " already freed") {}
};

struct BoundsError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UnknownAllocationError : std::runtime_error {
    explicit UnknownAllocationError(std::uint64_t id)
        : std::runtime_error("unknown allocation id " + std::to_string(id)) {}
};

struct ContextStateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SpillArenaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Raised by the kernel VM; carries the offending instruction index.
struct VmFault : std::runtime_error {
    VmFault(std::size_t instruction, const std::string& what)
        : std::runtime_error("instruction " + std::to_string(instruction) + ": " + what),
          instruction_index(instruction) {}
    std::size_t instruction_index;
};

// Raised by the scheduler when a launch faults; wraps the VM fault with its ticket.
struct LaunchFault : std::runtime_error {
    LaunchFault(std::uint64_t ticket, const std::string& what)
        : std::runtime_error("ticket " + std::to_string(ticket) + ": " + what), ticket(ticket) {}
    std::uint64_t ticket;
};

struct PolicyInstallError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ScheduleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace gpuleak
