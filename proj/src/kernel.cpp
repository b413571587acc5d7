#include "gpuleak/kernel.hpp"

#include <algorithm>

#include "gpuleak/errors.hpp"

namespace gpuleak {

SpillMap build_spill_map(std::uint32_t declared_registers, const DeviceConfig& device,
                         const GlobalMemory& memory, std::uint64_t seed) {
    if (declared_registers <= device.registers_per_block) {
        throw ConfigError("build_spill_map: declared register count does not spill");
    }
    const std::uint64_t n_spilled = declared_registers - device.registers_per_block;
    const std::uint64_t stride_words = device.leak_stride / kWordBytes;

    SpillMap map;
    map.reserve(n_spilled);

    if (device.spill_isolation) {
        // Slots come from the private arena at the top of the store.
        if ((n_spilled - 1) * stride_words + 1 > memory.arena_words()) {
            throw SpillArenaError("spill arena exhausted: need " +
                                  std::to_string(n_spilled) + " slots at stride " +
                                  std::to_string(device.leak_stride));
        }
        for (std::uint64_t k = 0; k < n_spilled; ++k) {
            map.push_back(memory.arena_offset() + k * stride_words);
        }
        return map;
    }

    // The modeled driver bug: slots ignore the allocation map entirely. The
    // window start advances by the full window span per seed, so round r and
    // round r+1 cover adjacent stretches of the store.
    const std::uint64_t aligned_words = memory.usable_words() - memory.usable_words() % stride_words;
    if (aligned_words < stride_words) {
        throw ConfigError("store too small for the configured leak stride");
    }
    const std::uint64_t start = (seed * n_spilled * stride_words) % aligned_words;
    for (std::uint64_t k = 0; k < n_spilled; ++k) {
        map.push_back((start + k * stride_words) % aligned_words);
    }
    return map;
}

RegisterFile::RegisterFile(std::uint32_t declared, const DeviceConfig& device,
                           const GlobalMemory& memory, std::uint64_t seed)
    : declared_(declared), physical_count_(std::min(declared, device.registers_per_block)) {
    physical_.assign(physical_count_, 0u);
    if (declared_ > device.registers_per_block) {
        spill_map_ = build_spill_map(declared_, device, memory, seed);
    }
}

Word RegisterFile::read(std::uint32_t index, const GlobalMemory& memory) const {
    if (index < physical_count_) return physical_[index];
    const std::uint64_t target = spill_map_[index - physical_count_];
    if (auto it = shadow_.find(target); it != shadow_.end()) return it->second;
    return memory.load(target);
}

void RegisterFile::write(std::uint32_t index, Word value, GlobalMemory& memory,
                         bool passthrough) {
    if (index < physical_count_) {
        physical_[index] = value;
        return;
    }
    const std::uint64_t target = spill_map_[index - physical_count_];
    if (passthrough) {
        memory.store_word(target, value);
    } else {
        shadow_[target] = value;
    }
}

std::vector<Word> dump_registers(const RegisterFile& rf, std::uint32_t n,
                                 const GlobalMemory& memory) {
    if (n > rf.declared()) throw ConfigError("dump_registers: n exceeds declared registers");
    std::vector<Word> out;
    out.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) out.push_back(rf.read(i, memory));
    return out;
}

namespace {

struct Executor {
    const ExecRequest& req;
    const DeviceConfig& device;
    GlobalMemory& memory;
    std::vector<SharedMemoryBank>& banks;
    const ExecOptions& options;

    std::size_t pc = 0;
    std::optional<RegisterFile> registers;
    ExecutionTrace trace;

    [[noreturn]] void fault(const std::string& what) const { throw VmFault(pc, what); }

    const Allocation& buffer_arg(std::uint32_t index) const {
        if (index >= req.args.size()) {
            fault("argument index " + std::to_string(index) + " out of range");
        }
        if (req.args[index].buffer == nullptr) {
            fault("argument " + std::to_string(index) + " is a scalar, buffer required");
        }
        return *req.args[index].buffer;
    }

    SharedMemoryBank& bank_of_block(std::uint32_t block) { return banks[req.block_assignment[block]]; }

    RegisterFile& register_file() {
        if (!registers) {
            if (req.program->declared_registers == 0) {
                fault("register instruction without reserved registers");
            }
            registers.emplace(req.program->declared_registers, device, memory, req.spill_seed);
            trace.spilled_registers = registers->spilled_count();
        }
        return *registers;
    }

    void run() {
        trace.block_assignment = req.block_assignment;
        for (pc = 0; pc < req.program->instructions.size(); ++pc) {
            std::visit([this](const auto& instr) { step(instr); },
                       req.program->instructions[pc]);
        }
        if (options.shared_zero_tail) {
            InstructionTrace t;
            t.index = req.program->instructions.size();
            t.op = "zero_shared_tail";
            for (std::uint32_t b = 0; b < req.block_assignment.size(); ++b) {
                auto& bank = bank_of_block(b);
                bank.zero();
                t.shared_writes.push_back({req.block_assignment[b], 0, bank.size()});
            }
            trace.instructions.push_back(std::move(t));
        }
        if (registers && device.spill_isolation && registers->spilled_count() > 0) {
            // Arena slots are scrubbed when the launch releases them.
            for (std::uint64_t target : registers->spill_map()) memory.store_word(target, 0u);
        }
    }

    void step(const CopyGlobalToShared& instr) {
        const Allocation& src = buffer_arg(instr.src_arg);
        InstructionTrace t;
        t.index = pc;
        t.op = "copy_global_to_shared";
        const std::uint64_t blocks = req.block_assignment.size();
        if (blocks * instr.len > src.length) fault("global source smaller than grid slices");
        for (std::uint32_t b = 0; b < blocks; ++b) {
            auto& bank = bank_of_block(b);
            if (instr.dst_off + instr.len > bank.size()) fault("shared write out of bank bounds");
            const std::uint64_t src_base = src.offset + static_cast<std::uint64_t>(b) * instr.len;
            for (std::uint64_t i = 0; i < instr.len; ++i) {
                bank.store(instr.dst_off + i, memory.load(src_base + i));
            }
            t.global_reads.push_back({src_base, instr.len});
            t.shared_writes.push_back({req.block_assignment[b], instr.dst_off, instr.len});
        }
        trace.instructions.push_back(std::move(t));
    }

    void step(const CopySharedToGlobal& instr) {
        const Allocation& dst = buffer_arg(instr.dst_arg);
        InstructionTrace t;
        t.index = pc;
        t.op = "copy_shared_to_global";
        const std::uint64_t blocks = req.block_assignment.size();
        if (blocks * instr.len > dst.length) fault("global destination smaller than grid slices");
        for (std::uint32_t b = 0; b < blocks; ++b) {
            auto& bank = bank_of_block(b);
            if (instr.src_off + instr.len > bank.size()) fault("shared read out of bank bounds");
            const std::uint64_t dst_base = dst.offset + static_cast<std::uint64_t>(b) * instr.len;
            for (std::uint64_t i = 0; i < instr.len; ++i) {
                memory.store_word(dst_base + i, bank.load(instr.src_off + i));
            }
            t.shared_reads.push_back({req.block_assignment[b], instr.src_off, instr.len});
            t.global_writes.push_back({dst_base, instr.len});
        }
        trace.instructions.push_back(std::move(t));
    }

    void step(const WriteGlobal& instr) {
        const Allocation& dst = buffer_arg(instr.arg);
        if (instr.off + instr.len > dst.length) fault("global write out of allocation bounds");
        for (std::uint64_t i = 0; i < instr.len; ++i) {
            memory.store_word(dst.offset + instr.off + i,
                              instr.base + instr.step * static_cast<Word>(i));
        }
        InstructionTrace t;
        t.index = pc;
        t.op = "write_global";
        t.global_writes.push_back({dst.offset + instr.off, instr.len});
        trace.instructions.push_back(std::move(t));
    }

    void step(const ReadSmid& instr) {
        const Allocation& dst = buffer_arg(instr.dst_arg);
        const std::uint64_t blocks = req.block_assignment.size();
        if (instr.idx + blocks > dst.length) fault("smid destination out of bounds");
        InstructionTrace t;
        t.index = pc;
        t.op = "read_smid";
        for (std::uint32_t b = 0; b < blocks; ++b) {
            const std::uint32_t smid = req.block_assignment[b];
            memory.store_word(dst.offset + instr.idx + b, smid);
            t.smids.push_back(smid);
        }
        t.global_writes.push_back({dst.offset + instr.idx, blocks});
        trace.instructions.push_back(std::move(t));
    }

    void step(const ReserveRegisters& instr) {
        if (instr.count == 0) fault("cannot reserve zero registers");
        registers.emplace(instr.count, device, memory, req.spill_seed);
        trace.spilled_registers = registers->spilled_count();
        InstructionTrace t;
        t.index = pc;
        t.op = "reserve_registers";
        trace.instructions.push_back(std::move(t));
    }

    void step(const DumpRegisters& instr) {
        RegisterFile& rf = register_file();
        const Allocation& dst = buffer_arg(instr.dst_arg);
        if (rf.declared() > dst.length) fault("dump destination smaller than register count");
        InstructionTrace t;
        t.index = pc;
        t.op = "dump_registers";
        for (std::uint32_t i = 0; i < rf.declared(); ++i) {
            memory.store_word(dst.offset + i, rf.read(i, memory));
        }
        for (std::uint64_t target : rf.spill_map()) t.spill_reads.push_back({target, 1});
        t.global_writes.push_back({dst.offset, rf.declared()});
        trace.instructions.push_back(std::move(t));
    }

    void step(const WriteRegisters& instr) {
        RegisterFile& rf = register_file();
        InstructionTrace t;
        t.index = pc;
        t.op = "write_registers";
        for (std::uint32_t i = 0; i < rf.declared(); ++i) {
            rf.write(i, instr.value, memory, options.spill_write_passthrough);
        }
        for (std::uint64_t target : rf.spill_map()) t.shadow_writes.push_back({target, 1});
        trace.instructions.push_back(std::move(t));
    }

    void step(const ZeroShared& instr) {
        InstructionTrace t;
        t.index = pc;
        t.op = "zero_shared";
        for (std::uint32_t b = 0; b < req.block_assignment.size(); ++b) {
            auto& bank = bank_of_block(b);
            if (instr.len > bank.size()) fault("shared zero out of bank bounds");
            bank.zero_prefix(instr.len);
            t.shared_writes.push_back({req.block_assignment[b], 0, instr.len});
        }
        trace.instructions.push_back(std::move(t));
    }
};

}  // namespace

ExecutionTrace execute(const ExecRequest& request, const DeviceConfig& device,
                       GlobalMemory& memory, std::vector<SharedMemoryBank>& banks,
                       const ExecOptions& options) {
    Executor exec{request, device, memory, banks, options};
    exec.run();
    return std::move(exec.trace);
}

}  // namespace gpuleak
