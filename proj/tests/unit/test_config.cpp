#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "mxbolo/config.hpp"
#include "mxbolo/error.hpp"
#include "mxbolo/frontend.hpp"

using namespace mxbolo;

namespace {

std::string schema_pointer(std::string_view doc) {
    try {
        parse_config(doc);
    } catch (const SchemaError& e) {
        return e.pointer();
    }
    return "<accepted>";
}

}  // namespace

TEST(Config, DefaultParses) {
    const auto cfg = parse_config("{}");
    ASSERT_EQ(cfg.chip.size(), 3u);
    EXPECT_EQ(cfg.chip.bolometers[0].f_r0.value(), 156.7e6);
    EXPECT_EQ(cfg.chip.bolometers[1].f_r0.value(), 179.3e6);
    EXPECT_EQ(cfg.chip.bolometers[2].f_r0.value(), 193.7e6);
    EXPECT_NEAR(cfg.chip.bolometers[0].linewidth().value(), 0.31e6, 1e-3);
    EXPECT_NEAR(cfg.chip.bolometers[1].linewidth().value(), 0.14e6, 1e-3);
    EXPECT_NEAR(cfg.chip.bolometers[2].linewidth().value(), 0.61e6, 1e-3);
    EXPECT_EQ(cfg.chip.channel_map, (std::vector<std::size_t>{1, 0, 2}));
    EXPECT_EQ(cfg.preset, "desk");
    EXPECT_EQ(cfg.n_avg, 100u);
    EXPECT_EQ(cfg.chip.sample_rate.value(), 1e9);
    EXPECT_NO_THROW(cfg.chip.validate());
}

TEST(Config, LoadEmptyPathIsDefault) {
    EXPECT_EQ(config_hash(load_config({})), config_hash(parse_config("{}")));
}

TEST(Config, HashIgnoresKeyOrderAndWhitespace) {
    const auto a = parse_config(R"({"seed": 3, "preset": "desk"})");
    const auto b = parse_config("{\n  \"preset\" : \"desk\",\"seed\":3 }");
    EXPECT_EQ(config_hash(a), config_hash(b));
    EXPECT_NE(config_hash(a), config_hash(parse_config(R"({"seed": 4})")));
    EXPECT_EQ(config_hash(a).size(), 64u);
}

TEST(Config, ProbeAboveNyquistParsesButCannotBeSynthesized) {
    const auto cfg = parse_config(R"({"chip": {"probes": [
        {"frequency_hz": 156.74e6, "power_dbm": -144, "phase_rad": 0},
        {"frequency_hz": 179.32e6, "power_dbm": -144, "phase_rad": 0},
        {"frequency_hz": 600e6, "power_dbm": -144, "phase_rad": 0}]}})");
    EXPECT_EQ(cfg.chip.probes[2].frequency.value(), 600e6);
    EXPECT_THROW(make_probe_comb(cfg.chip.probes, cfg.chip.sample_rate, Seconds(1e-6)), ConfigurationError);
}

TEST(Config, NegativeFwhmNamesPointer) {
    auto doc = nlohmann::json::parse(default_config_json());
    doc["chip"]["filters"][0]["fwhm_hz"] = -1.0;
    EXPECT_EQ(schema_pointer(doc.dump()), "/chip/filters/0/fwhm_hz");
}

TEST(Config, SchemaViolations) {
    EXPECT_EQ(schema_pointer(R"({"bogus": 1})"), "/bogus");
    EXPECT_EQ(schema_pointer(R"({"timing": {"dt_s": "fast"}})"), "/timing/dt_s");
    EXPECT_EQ(schema_pointer(R"({"preset": "lab"})"), "/preset");
    EXPECT_EQ(schema_pointer(R"({"chip": {"channel_map": [0, 0, 2]}})"), "/chip/channel_map/1");
    EXPECT_EQ(schema_pointer(R"({"timing": {"signal_window_s": [52e-6, 47e-6]}})"), "/timing/signal_window_s");
    EXPECT_EQ(schema_pointer("[1, 2]"), "/");
    EXPECT_THROW(parse_config("{not json"), UserError);
}

TEST(Config, EveryTypeInvariantRejectedWithPointer) {
    const auto base = nlohmann::json::parse(default_config_json());
    const std::vector<std::pair<std::string, double>> bad = {
        {"/chip/bolometers/1/kappa_ext_hz", 0.0},   {"/chip/bolometers/1/kappa_int_hz", -5.0},
        {"/chip/bolometers/0/tau_th_s", 0.0},        {"/chip/bolometers/2/g_th_w_per_k", -1e-14},
        {"/chip/bolometers/0/t_bath_k", -0.05},      {"/chip/bolometers/0/f_r0_hz", 0.0},
        {"/chip/filters/2/f_center_hz", -4e9},       {"/presets/desk/sample_rate_hz", 0.0},
        {"/presets/desk/noise_sigma_v", -1.0},       {"/timing/dt_s", 0.0},
    };
    for (const auto& [ptr, value] : bad) {
        auto doc = base;
        doc[nlohmann::json::json_pointer(ptr)] = value;
        EXPECT_EQ(schema_pointer(doc.dump()), ptr);
    }
}

TEST(Config, PresetSelection) {
    const auto paper = parse_config("{}", ConfigOverrides{std::nullopt, std::string("paper")});
    EXPECT_EQ(paper.preset, "paper");
    EXPECT_EQ(paper.chip.sample_rate.value(), 6e9);
    EXPECT_EQ(paper.n_avg, 10000u);
    const auto fig3 = parse_config(R"({"preset": "fig3"})");
    EXPECT_EQ(fig3.timing.pulse_duration.value(), 1e-3);
    EXPECT_EQ(fig3.timing.record.value(), 3e-3);
    EXPECT_EQ(fig3.n_avg, 16384u);
    const auto seeded = parse_config("{}", ConfigOverrides{std::uint64_t{99}, std::nullopt});
    EXPECT_EQ(seeded.seed, 99u);
    EXPECT_THROW(parse_config("{}", ConfigOverrides{std::nullopt, std::string("none")}), SchemaError);
}

TEST(Config, MergePatchReplacesArraysAndNullDeletes) {
    const auto cfg = parse_config(R"({"experiments": {"characterize": {"powers_dbm": [-160, -150]}}})");
    EXPECT_EQ(cfg.sweeps.characterize_powers.size(), 2u);
    EXPECT_EQ(schema_pointer(R"({"seed": null})"), "/seed");
}

TEST(Config, NoiseScalingLaw) {
    const Volts s(1e-7);
    EXPECT_DOUBLE_EQ(scale_noise_sigma(s, FrequencyHz(1e9), 100, FrequencyHz(1e9), 100).value(), 1e-7);
    EXPECT_NEAR(scale_noise_sigma(s, FrequencyHz(1e9), 100, FrequencyHz(4e9), 10000).value(), 2e-6, 1e-18);
}

TEST(Config, ShippedFileMatchesEmbeddedDefault) {
    std::ifstream in(MXBOLO_SOURCE_DIR "/configs/default.json");
    ASSERT_TRUE(in);
    const auto file = nlohmann::json::parse(in);
    EXPECT_EQ(file, nlohmann::json::parse(default_config_json()));
    EXPECT_NO_THROW(load_config(MXBOLO_SOURCE_DIR "/configs/default.json"));
}
