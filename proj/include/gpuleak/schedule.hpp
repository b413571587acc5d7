#pragma once

#include <optional>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "gpuleak/device.hpp"
#include "gpuleak/kernel.hpp"

namespace gpuleak {

// Parses the named-instruction-record form used in schedule scripts.
KernelProgram parse_program(const nlohmann::json& j);

// Executes a schedule script: an ordered list of {context, action} records
// plus optional device/store/policy settings. Returns the run report.
// device_override wins over the script's own "device" entry.
nlohmann::json run_schedule(const nlohmann::json& script,
                            const std::optional<DeviceConfig>& device_override = std::nullopt);

nlohmann::json run_schedule_file(const std::string& path,
                                 const std::optional<DeviceConfig>& device_override = std::nullopt);

}  // namespace gpuleak
