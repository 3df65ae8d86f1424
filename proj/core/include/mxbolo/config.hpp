#pragma once

// Experiment configuration: JSON documents merged over the shipped default,
// validated against the published schema, resolved for one preset.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mxbolo/experiments.hpp"

namespace mxbolo {

struct SweepSettings {
    std::vector<PowerDbm> characterize_powers;
    FrequencyHz characterize_half_span;
    FrequencyHz characterize_step;
    PowerDbm filterscan_power;
    FrequencyHz filterscan_half_span;
    FrequencyHz filterscan_step;
    PowerDbm powersweep_min;
    PowerDbm powersweep_max;
    Decibels powersweep_step;
    std::size_t powersweep_n_avg = 0;
    PowerDbm time_constant_power;
    Seconds time_constant_settle;
    std::size_t time_constant_n_avg = 0;
};

struct ExperimentConfig {
    ChipConfig chip;              ///< sample rate and noise taken from the preset
    Timing timing;                ///< preset overrides applied
    DspSettings dsp;
    std::string preset;
    std::size_t n_avg = 1;
    std::uint64_t seed = 0;
    PowerDbm heater_power;
    SweepSettings sweeps;
    CalibrationTargets calibration;
    /// Effective document (defaults merged, overrides applied), canonical form.
    std::string canonical_json;
};

struct ConfigOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> preset;
};

/// The shipped default document and the published schema.
const std::string& default_config_json();
const std::string& config_schema_json();

/// Merges `json_text` (RFC 7386 merge patch) over the default, validates
/// and resolves. Schema violations raise SchemaError carrying a JSON pointer.
ExperimentConfig parse_config(std::string_view json_text, const ConfigOverrides& overrides = {});

/// Reads and parses a file; an empty path yields the default configuration.
ExperimentConfig load_config(const std::filesystem::path& path, const ConfigOverrides& overrides = {});

/// SHA-256 (hex) of the canonical effective document.
std::string config_hash(const ExperimentConfig& config);

/// Effective document with the calibrated chip values written back: per
/// bolometer dfdT, probe frequencies and every preset's noise sigma
/// (desk value scaled to each preset's rate and averaging).
std::string calibrated_config_json(const ExperimentConfig& config, const CalibrationResult& result);

/// Noise sigma giving the same averaged in-band noise as `sigma` at another
/// sample rate and averaging count.
Volts scale_noise_sigma(Volts sigma, FrequencyHz from_rate, std::size_t from_avg, FrequencyHz to_rate,
                        std::size_t to_avg);

}  // namespace mxbolo
