#pragma once

// Sweep-plus-fit procedures shared by the command-line tool and the
// acceptance checks.

#include <optional>
#include <string>
#include <vector>

#include "mxbolo/analysis.hpp"
#include "mxbolo/experiments.hpp"

namespace mxbolo {

/// center - half_span ... center + half_span in `step` increments (inclusive).
std::vector<FrequencyHz> frequency_grid(FrequencyHz center, FrequencyHz half_span, FrequencyHz step);
/// lo ... hi in `step` dB increments; hi included when it falls on the grid.
std::vector<PowerDbm> power_grid(PowerDbm lo, PowerDbm hi, Decibels step);

struct ResonanceFitRow {
    PowerDbm power;
    std::optional<LorentzianFit> fit;   ///< Lorentzian fitted to |Gamma|^2
    std::string error;
};

struct Characterization {
    std::size_t channel = 0;
    SweepResult sweep;
    std::vector<ResonanceFitRow> rows;
    /// From the lowest-power row, where self-heating is negligible.
    std::optional<FrequencyHz> f_r0;
    std::optional<FrequencyHz> linewidth;
};

/// Probe sweep centered on the channel's probe tone, then one fit per power.
Characterization characterize_channel(const ChipConfig& chip, std::size_t channel, std::span<const PowerDbm> powers,
                                      FrequencyHz half_span, FrequencyHz step, const ExecutionOptions& exec = {});

struct FilterScan {
    std::size_t channel = 0;
    SweepResult sweep;
    FrequencyHz grid_peak;              ///< grid frequency of the largest response
    std::optional<PeakShape> shape;
    std::string error;
};

/// Heater sweep centered on the channel's matched filter.
FilterScan filterscan_channel(const ChipConfig& chip, std::size_t channel, PowerDbm heater_power,
                              FrequencyHz half_span, FrequencyHz step, const ExecutionOptions& exec = {});

struct PowerSweepAnalysis {
    std::vector<SweepResult> sweeps;                           ///< sweeps[j]: heater at filters[j]
    /// fits[i][j]: bolometer i, heater at filters[j]
    std::vector<std::vector<std::optional<CompressionFit>>> fits;
    std::vector<std::vector<std::string>> errors;
    std::vector<std::vector<std::optional<PowerDbm>>> p_1db;
    std::optional<CrosstalkMatrix> crosstalk;
    std::string crosstalk_error;
};

PowerSweepAnalysis powersweep_chip(const ChipConfig& chip, std::span<const PowerDbm> powers, const Timing& timing,
                                   const DspSettings& dsp, std::size_t n_avg, std::uint64_t seed,
                                   const ExecutionOptions& exec = {});

}  // namespace mxbolo
