#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gpuleak/attacks.hpp"
#include "gpuleak/countermeasures.hpp"
#include "gpuleak/device.hpp"
#include "gpuleak/errors.hpp"
#include "gpuleak/runtime.hpp"
#include "gpuleak/schedule.hpp"

namespace {

using namespace gpuleak;

std::uint64_t parse_size(const std::string& text) {
    std::size_t pos = 0;
    const double value = std::stod(text, &pos);
    std::string suffix = text.substr(pos);
    for (auto& c : suffix) c = static_cast<char>(std::tolower(c));
    double scale = 1;
    if (suffix == "kb" || suffix == "k") scale = 1024;
    else if (suffix == "mb" || suffix == "m") scale = 1024.0 * 1024;
    else if (suffix == "gb" || suffix == "g") scale = 1024.0 * 1024 * 1024;
    else if (!suffix.empty() && suffix != "b") throw ConfigError("bad size: " + text);
    return static_cast<std::uint64_t>(value * scale);
}

std::vector<std::uint64_t> parse_size_range(const std::string& text) {
    // "16MB:512MB:16MB" or a comma list of sizes.
    std::vector<std::uint64_t> sizes;
    if (text.find(':') != std::string::npos) {
        std::stringstream ss(text);
        std::string lo_s, hi_s, step_s;
        std::getline(ss, lo_s, ':');
        std::getline(ss, hi_s, ':');
        std::getline(ss, step_s, ':');
        const std::uint64_t lo = parse_size(lo_s);
        const std::uint64_t hi = parse_size(hi_s);
        const std::uint64_t step = step_s.empty() ? lo : parse_size(step_s);
        if (step == 0 || hi < lo) throw ConfigError("bad size range: " + text);
        for (std::uint64_t s = lo; s <= hi; s += step) sizes.push_back(s);
        return sizes;
    }
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) sizes.push_back(parse_size(item));
    return sizes;
}

std::string default_device() {
    if (const char* env = std::getenv("GPULEAK_DEVICE")) return env;
    return "tesla-c2050";
}

void emit(const nlohmann::json& report, const std::string& out_path) {
    const std::string text = report.dump(2) + "\n";
    if (out_path.empty() || out_path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + out_path);
    out << text;
}

void emit_text(const std::string& text, const std::string& out_path) {
    if (out_path.empty() || out_path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + out_path);
    out << text;
}

ZeroingPolicy make_policy(const std::string& mode, const DeviceConfig& device) {
    ZeroingPolicy policy;
    policy.mode = policy_mode_from_string(mode);
    policy.cost_model = default_cost_model(device);
    return policy;
}

nlohmann::json report_envelope(const std::string& scenario, const DeviceConfig& device,
                               nlohmann::json params, nlohmann::json body) {
    nlohmann::json report;
    report["schema"] = "gpuleak-report-v1";
    report["scenario"] = scenario;
    report["device"] = device.name;
    report["params"] = std::move(params);
    report["report"] = std::move(body);
    return report;
}

// nlohmann's ADL serializer needs a helper since the to_json overloads live in
// the gpuleak namespace alongside different report types.
template <typename T>
nlohmann::json global_to_json(const T& value) {
    nlohmann::json j;
    to_json(j, value);
    return j;
}

int run_scenario_command(const std::string& scenario, const std::string& device_arg,
                         std::uint32_t k, bool destroy_victim_first, const std::string& d_bytes_s,
                         const std::string& attacker_sizes_s, const std::string& reg_bytes_s,
                         const std::string& victim_bytes_s, std::uint32_t rounds,
                         std::uint32_t runs, std::uint64_t seed, const std::string& policy_mode,
                         const std::string& store_s, const std::string& out_path,
                         const std::string& csv_path) {
    const DeviceConfig device = load_device(device_arg);
    nlohmann::json body;
    nlohmann::json params;
    params["seed"] = seed;
    params["policy"] = policy_mode;

    if (scenario == "shared-leak") {
        SharedLeakParams p;
        p.k_iterations = k;
        p.destroy_victim_first = destroy_victim_first;
        p.policy = make_policy(policy_mode, device);
        params["k"] = k;
        params["destroy_victim_first"] = destroy_victim_first;
        body = global_to_json(shared_leak_scenario(device, p));
    } else if (scenario == "global-leak") {
        GlobalLeakParams p;
        p.d_bytes = parse_size(d_bytes_s);
        if (!attacker_sizes_s.empty()) p.attacker_sizes = parse_size_range(attacker_sizes_s);
        p.policy = make_policy(policy_mode, device);
        params["d_bytes"] = p.d_bytes;
        params["attacker_sizes"] = p.attacker_sizes.empty()
                                       ? std::vector<std::uint64_t>(4, p.d_bytes)
                                       : p.attacker_sizes;
        body = global_to_json(global_leak_scenario(device, p));
    } else if (scenario == "register-spill") {
        RegisterSpillParams p;
        p.reg_bytes = parse_size(reg_bytes_s);
        p.victim_bytes = parse_size(victim_bytes_s);
        p.rounds = rounds;
        p.seed = seed;
        if (!store_s.empty()) p.store_bytes = parse_size(store_s);
        params["reg_bytes"] = p.reg_bytes;
        params["victim_bytes"] = p.victim_bytes;
        params["rounds"] = rounds;
        const LeakReport report = register_spill_scenario(device, p);
        if (!csv_path.empty()) {
            std::string csv = "round,distinct_leaked\n";
            for (const auto& [round, distinct] : report.round_counts) {
                csv += std::to_string(round) + "," + std::to_string(distinct) + "\n";
            }
            emit_text(csv, csv_path);
        }
        body = global_to_json(report);
    } else if (scenario == "write-attack") {
        WriteAttackParams p;
        p.runs = runs;
        params["runs"] = runs;
        body = global_to_json(write_attack_scenario(device, p));
    } else {
        std::cerr << "unknown scenario: " << scenario
                  << " (expected shared-leak, global-leak, register-spill, write-attack)\n";
        return 2;
    }

    emit(report_envelope(scenario, device, std::move(params), std::move(body)), out_path);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deterministic simulator of GPU memory-isolation leaks and their fixes"};
    app.require_subcommand(1);

    std::string device_arg = default_device();
    std::string out_path;
    std::string csv_path;

    // run-scenario
    auto* run_scenario = app.add_subcommand("run-scenario", "Run a leakage scenario");
    std::string scenario_name;
    std::uint32_t k = 50;
    bool destroy_victim_first = false;
    std::string d_bytes_s = "64KB";
    std::string attacker_sizes_s;
    std::string reg_bytes_s = "32KB";
    std::string victim_bytes_s = "32MB";
    std::uint32_t rounds = 2;
    std::uint32_t runs = 1000;
    std::uint64_t seed = 0;
    std::string policy_mode = "none";
    std::string store_s;
    run_scenario->add_option("scenario", scenario_name,
                             "shared-leak | global-leak | register-spill | write-attack")
        ->required();
    run_scenario->add_option("--device", device_arg, "device preset or config path");
    run_scenario->add_option("--k", k, "victim/attacker kernel iterations (shared-leak)");
    run_scenario->add_flag("--destroy-victim-first", destroy_victim_first,
                           "terminate the victim before the attacker reads (shared-leak)");
    run_scenario->add_option("--d-bytes", d_bytes_s, "victim vector size (global-leak)");
    run_scenario->add_option("--attacker-sizes", attacker_sizes_s,
                             "comma list of four attacker sizes (global-leak)");
    run_scenario->add_option("--reg-bytes", reg_bytes_s,
                             "spilled register space (register-spill)");
    run_scenario->add_option("--victim-bytes", victim_bytes_s,
                             "victim region size (register-spill)");
    run_scenario->add_option("--rounds", rounds, "attack rounds (register-spill)");
    run_scenario->add_option("--runs", runs, "victim runs (write-attack)");
    run_scenario->add_option("--seed", seed, "base seed");
    run_scenario->add_option("--policy", policy_mode,
                             "none | zero-on-free | zero-on-alloc | in-kernel-shared");
    run_scenario->add_option("--store-bytes", store_s, "simulated store size override");
    run_scenario->add_option("--out", out_path, "report path (default stdout)");
    run_scenario->add_option("--csv", csv_path, "rounds curve CSV (register-spill)");

    // run-schedule
    auto* run_sched = app.add_subcommand("run-schedule", "Run a schedule script");
    std::string schedule_path;
    bool sched_device_given = false;
    run_sched->add_option("schedule", schedule_path, "schedule JSON file")->required();
    run_sched->add_option("--device", device_arg, "device preset or config path")
        ->each([&](const std::string&) { sched_device_given = true; });
    run_sched->add_option("--out", out_path, "report path (default stdout)");

    // aes-case
    auto* aes_case = app.add_subcommand("aes-case", "AES case-study success-rate experiment");
    std::uint32_t aes_rounds = 50;
    std::uint32_t aes_runs = 100;
    std::uint64_t aes_seed = 1;
    std::string aes_mode = "randomized";
    std::string aes_policy = "none";
    aes_case->add_option("--device", device_arg, "device preset or config path");
    aes_case->add_option("--rounds", aes_rounds, "experiment rounds");
    aes_case->add_option("--runs", aes_runs, "scan runs per round");
    aes_case->add_option("--seed", aes_seed, "base seed");
    aes_case->add_option("--mode", aes_mode, "randomized | exact");
    aes_case->add_option("--policy", aes_policy,
                         "none | zero-on-free | zero-on-alloc | in-kernel-shared");
    aes_case->add_option("--out", out_path, "report path (default stdout)");

    // measure-overhead
    auto* overhead = app.add_subcommand("measure-overhead", "Countermeasure cost sweep");
    std::string overhead_policy = "zero-on-alloc";
    std::string sizes_s = "16MB:512MB:16MB";
    overhead->add_option("--device", device_arg, "device preset or config path");
    overhead->add_option("--policy", overhead_policy,
                         "zero-on-free | zero-on-alloc | in-kernel-shared");
    overhead->add_option("--sizes", sizes_s, "lo:hi:step or comma list");
    overhead->add_option("--out", out_path, "CSV path (default stdout)");

    // dump-memory
    auto* dump = app.add_subcommand("dump-memory", "Dump simulated global memory");
    std::string dump_schedule;
    std::uint64_t dump_offset = 0;
    std::uint64_t dump_count = 64;
    std::string dump_format = "hex";
    dump->add_option("--device", device_arg, "device preset or config path");
    dump->add_option("--schedule", dump_schedule, "schedule to execute before dumping");
    dump->add_option("--offset-words", dump_offset, "first word to dump");
    dump->add_option("--count-words", dump_count, "words to dump");
    dump->add_option("--format", dump_format, "hex | bin");
    dump->add_option("--out", out_path, "output path (default stdout)");

    // list-devices
    auto* list = app.add_subcommand("list-devices", "List shipped device presets");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (run_scenario->parsed()) {
            return run_scenario_command(scenario_name, device_arg, k, destroy_victim_first,
                                        d_bytes_s, attacker_sizes_s, reg_bytes_s, victim_bytes_s,
                                        rounds, runs, seed, policy_mode, store_s, out_path,
                                        csv_path);
        }
        if (run_sched->parsed()) {
            std::optional<DeviceConfig> override;
            if (sched_device_given) override = load_device(device_arg);
            emit(run_schedule_file(schedule_path, override), out_path);
            return 0;
        }
        if (aes_case->parsed()) {
            const DeviceConfig device = load_device(device_arg);
            AesCaseParams params;
            params.rounds = aes_rounds;
            params.runs_per_round = aes_runs;
            params.seed = aes_seed;
            params.allocator_mode = aes_mode == "exact" ? AllocMode::Kind::kExactReuse
                                                        : AllocMode::Kind::kRandomized;
            params.policy = make_policy(aes_policy, device);
            nlohmann::json body;
            to_json(body, aes_case_study(device, params));
            nlohmann::json p{{"rounds", aes_rounds},
                             {"runs_per_round", aes_runs},
                             {"seed", aes_seed},
                             {"mode", aes_mode},
                             {"policy", aes_policy}};
            emit(report_envelope("aes-case", device, std::move(p), std::move(body)), out_path);
            return 0;
        }
        if (overhead->parsed()) {
            const DeviceConfig device = load_device(device_arg);
            const ZeroingPolicy policy = make_policy(overhead_policy, device);
            const auto sizes = parse_size_range(sizes_s);
            const auto records = measure_overhead(device, policy, sizes);
            std::ostringstream csv;
            csv << "size_bytes,elapsed\n";
            for (const auto& r : records) {
                csv << r.buffer_bytes << "," << std::setprecision(17) << r.elapsed << "\n";
            }
            emit_text(csv.str(), out_path);
            return 0;
        }
        if (dump->parsed()) {
            const DeviceConfig device = load_device(device_arg);
            std::vector<Word> words;
            if (!dump_schedule.empty()) {
                // Re-run the schedule, then dump from its final state.
                std::ifstream in(dump_schedule);
                if (!in) throw ScheduleError("cannot open schedule: " + dump_schedule);
                nlohmann::json script;
                in >> script;
                script["actions"].push_back(
                    {{"op", "raw_dump"}, {"offset", dump_offset}, {"count", dump_count},
                     {"label", "dump-memory"}});
                const nlohmann::json report = run_schedule(script, device);
                words = report["results"].back()["words"].get<std::vector<Word>>();
            } else {
                Simulator sim(device, {});
                words = sim.memory().raw_read(dump_offset, dump_count);
            }
            if (dump_format == "bin") {
                const auto bytes = words_to_bytes(words);
                if (out_path.empty() || out_path == "-") {
                    std::cout.write(reinterpret_cast<const char*>(bytes.data()),
                                    static_cast<std::streamsize>(bytes.size()));
                } else {
                    std::ofstream out(out_path, std::ios::binary);
                    out.write(reinterpret_cast<const char*>(bytes.data()),
                              static_cast<std::streamsize>(bytes.size()));
                }
            } else {
                std::ostringstream hex;
                for (std::uint64_t i = 0; i < words.size(); ++i) {
                    if (i % 8 == 0) {
                        hex << std::setw(8) << std::setfill('0') << std::hex
                            << (dump_offset + i) << ":";
                    }
                    hex << " " << std::setw(8) << std::setfill('0') << std::hex << words[i];
                    if (i % 8 == 7 || i + 1 == words.size()) hex << "\n";
                }
                emit_text(hex.str(), out_path);
            }
            return 0;
        }
        if (list->parsed()) {
            for (const auto& name : preset_names()) {
                const DeviceConfig d = preset(name);
                std::cout << name << ": " << d.num_multiprocessors << " MPs, "
                          << d.shared_mem_per_mp / 1024 << "KB shared/MP, "
                          << d.registers_per_block << " registers, "
                          << d.global_mem_size / (1024 * 1024 * 1024) << "GB global, "
                          << (d.spill_isolation ? "isolated" : "leaky") << " spills\n";
            }
            return 0;
        }
    } catch (const LaunchFault& e) {
        std::cerr << "scenario fault: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
