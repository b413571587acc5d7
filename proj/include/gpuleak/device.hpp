#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace gpuleak {

// Word size of the simulated machine. Every store, register and pattern in the
// simulator is expressed in 32-bit words.
inline constexpr std::uint32_t kWordBytes = 4;

// Hardware parameters of a simulated card. Immutable after construction; safe
// to share read-only across threads.
struct DeviceConfig {
    std::string name;
    std::uint32_t num_multiprocessors = 0;
    std::uint64_t shared_mem_per_mp = 0;   // bytes
    std::uint32_t registers_per_block = 0; // 32-bit registers
    std::uint32_t warp_size = 0;           // threads
    std::uint64_t global_mem_size = 0;     // bytes (nominal card capacity)

    // Deterministic block -> multiprocessor assignment order.
    std::vector<std::uint32_t> sm_schedule_order;

    // true: register spills land only in a private arena (Fermi-observed).
    // false: spills may land inside other contexts' regions (Kepler-observed).
    bool spill_isolation = true;

    // Byte distance between consecutive spill-leaked locations.
    std::uint32_t leak_stride = 32;

    std::uint64_t shared_words_per_bank() const { return shared_mem_per_mp / kWordBytes; }
    std::uint64_t total_shared_bytes() const { return shared_mem_per_mp * num_multiprocessors; }
};

// Shipped presets. Throws UnknownPresetError for anything else.
DeviceConfig preset(const std::string& name);

// Names of all shipped presets, in listing order.
std::vector<std::string> preset_names();

// Returns every violated invariant as a human-readable string; empty means valid.
std::vector<std::string> validate(const DeviceConfig& config);

void to_json(nlohmann::json& j, const DeviceConfig& config);
void from_json(const nlohmann::json& j, DeviceConfig& config);

// Loads a config from a preset name, a JSON file, or a key=value file.
DeviceConfig load_device(const std::string& preset_or_path);

}  // namespace gpuleak
