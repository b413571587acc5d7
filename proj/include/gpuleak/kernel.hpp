#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "gpuleak/device.hpp"
#include "gpuleak/memory.hpp"

namespace gpuleak {

// Block-level instruction set. Thread lanes are collapsed: each instruction
// states its full memory effect, with per-block slicing where shared memory is
// involved (block b moves slice b of the global buffer through its own bank).

struct CopyGlobalToShared {
    std::uint64_t dst_off = 0;  // shared words
    std::uint32_t src_arg = 0;
    std::uint64_t len = 0;  // words per block
};

struct CopySharedToGlobal {
    std::uint32_t dst_arg = 0;
    std::uint64_t src_off = 0;  // shared words
    std::uint64_t len = 0;      // words per block
};

// Fills arg[off..off+len) with base, base+step, base+2*step, ...
struct WriteGlobal {
    std::uint32_t arg = 0;
    std::uint64_t off = 0;
    std::uint64_t len = 0;
    Word base = 0;
    Word step = 1;
};

// Block b stores the id of the multiprocessor it runs on into arg[idx + b].
struct ReadSmid {
    std::uint32_t dst_arg = 0;
    std::uint64_t idx = 0;
};

// Declares the register footprint of the kernel. Registers beyond the device's
// physical capacity spill to global memory through the spill map.
struct ReserveRegisters {
    std::uint32_t count = 0;
};

// Copies every declared register into arg[0..count): physical registers first,
// then for each spilled register the *current* global-store word at its spill
// target. This is the leak read.
struct DumpRegisters {
    std::uint32_t dst_arg = 0;
};

// Writes a constant through every declared register. Writes through spilled
// registers land in a private shadow, never in the backing store.
struct WriteRegisters {
    Word value = 0;
};

// Zeroes the first len words of every bank the launch's blocks run on.
struct ZeroShared {
    std::uint64_t len = 0;
};

using Instruction = std::variant<CopyGlobalToShared, CopySharedToGlobal, WriteGlobal, ReadSmid,
                                 ReserveRegisters, DumpRegisters, WriteRegisters, ZeroShared>;

struct KernelProgram {
    std::vector<Instruction> instructions;
    std::uint32_t declared_registers = 0;
};

// Global word offsets assigned to registers beyond physical capacity.
using SpillMap = std::vector<std::uint64_t>;

// spill_isolation=true : slots come from the reserved arena, disjoint from all
//                        allocations; exhaustion raises SpillArenaError.
// spill_isolation=false: slots form a window over the usable store at
//                        leak_stride spacing, ignoring the allocation map; the
//                        window advances by n_spilled * leak_stride per seed so
//                        successive rounds expose different locations.
SpillMap build_spill_map(std::uint32_t declared_registers, const DeviceConfig& device,
                         const GlobalMemory& memory, std::uint64_t seed);

class RegisterFile {
public:
    RegisterFile(std::uint32_t declared, const DeviceConfig& device, const GlobalMemory& memory,
                 std::uint64_t seed);

    std::uint32_t declared() const { return declared_; }
    std::uint32_t physical_count() const { return physical_count_; }
    std::uint32_t spilled_count() const { return declared_ - physical_count_; }
    const SpillMap& spill_map() const { return spill_map_; }
    const std::map<std::uint64_t, Word>& shadow() const { return shadow_; }

    Word read(std::uint32_t index, const GlobalMemory& memory) const;
    // passthrough bypasses the shadow and mutates the store; test hook only.
    void write(std::uint32_t index, Word value, GlobalMemory& memory, bool passthrough);

private:
    std::uint32_t declared_ = 0;
    std::uint32_t physical_count_ = 0;
    std::vector<Word> physical_;
    SpillMap spill_map_;
    std::map<std::uint64_t, Word> shadow_;
};

// Physical register values followed by the current store word at each spill
// target. n must not exceed the declared register count.
std::vector<Word> dump_registers(const RegisterFile& rf, std::uint32_t n,
                                 const GlobalMemory& memory);

struct Span {
    std::uint64_t offset = 0;
    std::uint64_t length = 0;
};

struct BankSpan {
    std::uint32_t bank = 0;
    std::uint64_t offset = 0;
    std::uint64_t length = 0;
};

struct InstructionTrace {
    std::size_t index = 0;
    std::string op;
    std::vector<Span> global_reads;
    std::vector<Span> global_writes;
    std::vector<BankSpan> shared_reads;
    std::vector<BankSpan> shared_writes;
    std::vector<std::uint32_t> smids;
    std::vector<Span> spill_reads;    // store words observed through spilled registers
    std::vector<Span> shadow_writes;  // spill writes diverted to the shadow
};

struct ExecutionTrace {
    std::vector<InstructionTrace> instructions;
    std::vector<std::uint32_t> block_assignment;  // block -> multiprocessor
    std::uint32_t spilled_registers = 0;
};

// An argument slot of a launch: either a buffer or an immediate word.
struct ResolvedArg {
    const Allocation* buffer = nullptr;  // null for scalars
    Word scalar = 0;
};

struct ExecRequest {
    ContextId ctx = 0;
    const KernelProgram* program = nullptr;
    std::vector<ResolvedArg> args;
    std::vector<std::uint32_t> block_assignment;
    std::uint64_t spill_seed = 0;
};

struct ExecOptions {
    bool shared_zero_tail = false;       // in-kernel zeroing countermeasure
    bool spill_write_passthrough = false;  // test hook: disable shadow writes
};

// Applies each instruction's memory effects block-by-block in assignment
// order. Out-of-bounds accesses raise VmFault with the instruction index.
ExecutionTrace execute(const ExecRequest& request, const DeviceConfig& device,
                       GlobalMemory& memory, std::vector<SharedMemoryBank>& banks,
                       const ExecOptions& options = {});

}  // namespace gpuleak
