#include <doctest.h>

#include <fstream>

#include <nlohmann/json.hpp>

#include "gpuleak/device.hpp"
#include "gpuleak/errors.hpp"

using namespace gpuleak;

TEST_CASE("fermi preset matches the card table") {
    const DeviceConfig d = preset("tesla-c2050");
    CHECK(d.num_multiprocessors == 14);
    CHECK(d.shared_mem_per_mp == 48 * 1024);
    CHECK(d.registers_per_block == 32768);
    CHECK(d.warp_size == 32);
    CHECK(d.global_mem_size == 5ull * 1024 * 1024 * 1024);
    CHECK(d.spill_isolation);
    CHECK(d.sm_schedule_order ==
          std::vector<std::uint32_t>{0, 4, 8, 12, 2, 6, 10, 13, 1, 5, 9, 3, 7, 11});
    CHECK(d.total_shared_bytes() == 672 * 1024);
}

TEST_CASE("kepler preset matches the card table") {
    const DeviceConfig d = preset("geforce-gt640");
    CHECK(d.num_multiprocessors == 2);
    CHECK(d.shared_mem_per_mp == 16 * 1024);
    CHECK(d.registers_per_block == 65536);
    CHECK(d.warp_size == 32);
    CHECK(d.global_mem_size == 2ull * 1024 * 1024 * 1024);
    CHECK_FALSE(d.spill_isolation);
    CHECK(d.total_shared_bytes() == 32 * 1024);
}

TEST_CASE("unknown preset raises a named error") {
    CHECK_THROWS_AS(preset("gtx-9000"), UnknownPresetError);
}

TEST_CASE("shipped presets validate clean") {
    for (const auto& name : preset_names()) {
        CHECK(validate(preset(name)).empty());
    }
}

TEST_CASE("validate reports each violated invariant") {
    DeviceConfig d = preset("tesla-c2050");
    d.warp_size = 0;
    auto violations = validate(d);
    REQUIRE(violations.size() == 1);
    CHECK(violations[0].find("warp_size") != std::string::npos);

    d = preset("geforce-gt640");
    d.sm_schedule_order = {0, 0};
    violations = validate(d);
    REQUIRE(violations.size() == 1);
    CHECK(violations[0].find("permutation") != std::string::npos);

    d = preset("geforce-gt640");
    d.leak_stride = 6;
    CHECK(validate(d).size() == 1);
}

TEST_CASE("presets round-trip through serialization unchanged") {
    for (const auto& name : preset_names()) {
        const DeviceConfig original = preset(name);
        nlohmann::json j = original;
        const DeviceConfig restored = j.get<DeviceConfig>();
        CHECK(restored.name == original.name);
        CHECK(restored.num_multiprocessors == original.num_multiprocessors);
        CHECK(restored.shared_mem_per_mp == original.shared_mem_per_mp);
        CHECK(restored.registers_per_block == original.registers_per_block);
        CHECK(restored.warp_size == original.warp_size);
        CHECK(restored.global_mem_size == original.global_mem_size);
        CHECK(restored.sm_schedule_order == original.sm_schedule_order);
        CHECK(restored.spill_isolation == original.spill_isolation);
        CHECK(restored.leak_stride == original.leak_stride);
    }
}

TEST_CASE("device configs load from json and key=value files") {
    const DeviceConfig d = preset("geforce-gt640");

    {
        nlohmann::json j = d;
        const std::string path = "/tmp/gpuleak_test_device.json";
        std::ofstream(path) << j.dump(2);
        const DeviceConfig loaded = load_device(path);
        CHECK(loaded.name == d.name);
        CHECK(loaded.registers_per_block == d.registers_per_block);
    }
    {
        const std::string path = "/tmp/gpuleak_test_device.cfg";
        std::ofstream(path) << "name = little\n"
                            << "num_multiprocessors = 2\n"
                            << "shared_mem_per_mp = 4096\n"
                            << "registers_per_block = 1024\n"
                            << "warp_size = 4\n"
                            << "global_mem_size = 1048576\n"
                            << "sm_schedule_order = 1, 0\n"
                            << "spill_isolation = false\n"
                            << "leak_stride = 32\n";
        const DeviceConfig loaded = load_device(path);
        CHECK(loaded.name == "little");
        CHECK(loaded.sm_schedule_order == std::vector<std::uint32_t>{1, 0});
        CHECK_FALSE(loaded.spill_isolation);
    }
    CHECK_THROWS_AS(load_device("/nonexistent/device.json"), ConfigError);
}
