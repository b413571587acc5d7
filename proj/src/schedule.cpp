#include "gpuleak/schedule.hpp"

#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "gpuleak/attacks.hpp"
#include "gpuleak/errors.hpp"
#include "gpuleak/runtime.hpp"

namespace gpuleak {

namespace {

Instruction parse_instruction(const nlohmann::json& j) {
    const std::string op = j.at("op").get<std::string>();
    if (op == "copy_global_to_shared") {
        return CopyGlobalToShared{j.at("dst_off").get<std::uint64_t>(),
                                  j.at("src_arg").get<std::uint32_t>(),
                                  j.at("len").get<std::uint64_t>()};
    }
    if (op == "copy_shared_to_global") {
        return CopySharedToGlobal{j.at("dst_arg").get<std::uint32_t>(),
                                  j.at("src_off").get<std::uint64_t>(),
                                  j.at("len").get<std::uint64_t>()};
    }
    if (op == "write_global") {
        return WriteGlobal{j.at("arg").get<std::uint32_t>(), j.at("off").get<std::uint64_t>(),
                           j.at("len").get<std::uint64_t>(), j.at("base").get<Word>(),
                           j.value("step", 1u)};
    }
    if (op == "read_smid") {
        return ReadSmid{j.at("dst_arg").get<std::uint32_t>(), j.value("idx", std::uint64_t{0})};
    }
    if (op == "reserve_registers") {
        return ReserveRegisters{j.at("count").get<std::uint32_t>()};
    }
    if (op == "dump_registers") {
        return DumpRegisters{j.at("dst_arg").get<std::uint32_t>()};
    }
    if (op == "write_registers") {
        return WriteRegisters{j.at("value").get<Word>()};
    }
    if (op == "zero_shared") {
        return ZeroShared{j.at("len").get<std::uint64_t>()};
    }
    throw ScheduleError("unknown instruction op: " + op);
}

}  // namespace

KernelProgram parse_program(const nlohmann::json& j) {
    KernelProgram program;
    const nlohmann::json& instructions = j.is_array() ? j : j.at("instructions");
    for (const auto& instr : instructions) {
        program.instructions.push_back(parse_instruction(instr));
    }
    if (j.is_object()) {
        program.declared_registers = j.value("declared_registers", 0u);
    }
    return program;
}

nlohmann::json run_schedule(const nlohmann::json& script,
                            const std::optional<DeviceConfig>& device_override) {
    DeviceConfig device;
    if (device_override) {
        device = *device_override;
    } else if (script.contains("device")) {
        device = load_device(script.at("device").get<std::string>());
    } else {
        throw ScheduleError("schedule needs a device (script \"device\" or --device)");
    }

    SimOptions options;
    options.store_bytes = script.value("store_bytes", std::uint64_t{64} << 20);
    options.arena_bytes = script.value("arena_bytes", std::uint64_t{0});
    Simulator sim(device, options);

    if (script.contains("policy")) {
        ZeroingPolicy policy;
        policy.mode = policy_mode_from_string(script.at("policy").get<std::string>());
        policy.cost_model = default_cost_model(device);
        sim.install_policy(policy);
    }

    std::map<std::string, ContextId> contexts;
    std::map<std::string, AllocationId> buffers;

    auto ctx_of = [&](const nlohmann::json& j) {
        const std::string name = j.at("ctx").get<std::string>();
        auto it = contexts.find(name);
        if (it == contexts.end()) throw ScheduleError("unknown context: " + name);
        return it->second;
    };
    auto buf_of = [&](const std::string& name) {
        auto it = buffers.find(name);
        if (it == buffers.end()) throw ScheduleError("unknown buffer: " + name);
        return it->second;
    };

    nlohmann::json results = nlohmann::json::array();
    for (const auto& action : script.at("actions")) {
        const std::string op = action.at("op").get<std::string>();
        nlohmann::json entry{{"op", op}};

        if (op == "create_context") {
            const std::string name = action.at("ctx").get<std::string>();
            contexts[name] = sim.create_context();
            entry["ctx"] = name;
            entry["id"] = contexts[name];
        } else if (op == "destroy_context") {
            sim.destroy_context(ctx_of(action));
            entry["ctx"] = action.at("ctx");
        } else if (op == "alloc") {
            AllocMode mode = AllocMode::exact_reuse();
            if (action.value("mode", "exact") == "randomized") {
                mode = AllocMode::randomized(action.value("seed", std::uint64_t{0}));
            }
            const Allocation a =
                sim.alloc(ctx_of(action), action.at("bytes").get<std::uint64_t>(), mode);
            buffers[action.at("buf").get<std::string>()] = a.id;
            entry["buf"] = action.at("buf");
            entry["id"] = a.id;
            entry["offset_words"] = a.offset;
            entry["length_words"] = a.length;
        } else if (op == "free") {
            sim.free(ctx_of(action), buf_of(action.at("buf").get<std::string>()));
            entry["buf"] = action.at("buf");
        } else if (op == "write") {
            const std::uint64_t count = action.at("count").get<std::uint64_t>();
            const Word base = action.at("base").get<Word>();
            const Word step = action.value("step", 1u);
            std::vector<Word> data(count);
            for (std::uint64_t i = 0; i < count; ++i) {
                data[i] = base + step * static_cast<Word>(i);
            }
            sim.checked_write(ctx_of(action), buf_of(action.at("buf").get<std::string>()),
                              action.value("offset", std::uint64_t{0}), data);
        } else if (op == "write_words") {
            const std::vector<Word> data = action.at("words").get<std::vector<Word>>();
            sim.checked_write(ctx_of(action), buf_of(action.at("buf").get<std::string>()),
                              action.value("offset", std::uint64_t{0}), data);
        } else if (op == "read") {
            const auto words = sim.checked_read(
                ctx_of(action), buf_of(action.at("buf").get<std::string>()),
                action.value("offset", std::uint64_t{0}), action.at("count").get<std::uint64_t>());
            entry["label"] = action.value("label", "");
            entry["words"] = words;
        } else if (op == "launch") {
            KernelLaunch launch;
            launch.ctx = ctx_of(action);
            launch.grid_size = action.value("grid", 1u);
            launch.block_size = action.value("block", device.warp_size);
            launch.spill_seed = action.value("spill_seed", std::uint64_t{0});
            launch.program = parse_program(action.at("program"));
            for (const auto& arg : action.value("args", nlohmann::json::array())) {
                if (arg.is_string()) {
                    launch.args.emplace_back(buf_of(arg.get<std::string>()));
                } else {
                    launch.args.emplace_back(arg.get<Word>());
                }
            }
            entry["ticket"] = sim.launch(std::move(launch));
        } else if (op == "run") {
            const auto completed = sim.run_until_idle();
            nlohmann::json tickets = nlohmann::json::array();
            for (const auto& done : completed) tickets.push_back(done.ticket);
            entry["completed"] = std::move(tickets);
        } else if (op == "raw_dump") {
            const auto words = sim.memory().raw_read(action.value("offset", std::uint64_t{0}),
                                                     action.at("count").get<std::uint64_t>());
            entry["label"] = action.value("label", "");
            entry["words"] = words;
        } else {
            throw ScheduleError("unknown schedule op: " + op);
        }
        results.push_back(std::move(entry));
    }

    nlohmann::json report;
    report["device"] = device.name;
    report["store_bytes"] = options.store_bytes;
    report["sim_time"] = sim.sim_time();
    report["results"] = std::move(results);
    return report;
}

nlohmann::json run_schedule_file(const std::string& path,
                                 const std::optional<DeviceConfig>& device_override) {
    std::ifstream in(path);
    if (!in) throw ScheduleError("cannot open schedule: " + path);
    nlohmann::json script;
    try {
        in >> script;
    } catch (const nlohmann::json::exception& e) {
        throw ScheduleError("bad schedule " + path + ": " + e.what());
    }
    return run_schedule(script, device_override);
}

}  // namespace gpuleak
