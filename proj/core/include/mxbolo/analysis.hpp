#pragma once

// Fitting and derived quantities: resonance dips, exponential relaxations,
// power compression with its 1 dB point, crosstalk matrices, multiplexed SNR
// tables and channel-capacity estimates.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mxbolo/results.hpp"
#include "mxbolo/units.hpp"

namespace mxbolo {

/// Levenberg-Marquardt settings shared by every fitter.
struct FitOptions {
    double lambda0 = 1e-3;
    double lambda_up = 10.0;
    double lambda_down = 10.0;
    double step_tolerance = 1e-8;
    int max_iterations = 200;
};

/// m(f) = offset - depth / (1 + (2 (f - f_r) / fwhm)^2)
struct LorentzianFit {
    FrequencyHz f_r;
    FrequencyHz fwhm;
    double depth = 0.0;
    double offset = 0.0;
    FrequencyHz sigma_f_r;
    FrequencyHz sigma_fwhm;
    double sigma_depth = 0.0;
    double sigma_offset = 0.0;
    double residual_norm = 0.0;
    int iterations = 0;
};

struct LorentzianGuess {
    FrequencyHz f_r;
    FrequencyHz fwhm;
    double depth = 0.0;
    double offset = 0.0;
};

LorentzianFit fit_lorentzian(std::span<const FrequencyHz> freqs, std::span<const double> values,
                             std::optional<LorentzianGuess> guess = std::nullopt, const FitOptions& options = {});

/// v(t) = offset + amplitude * exp(-(t - t_first) / tau), t_first = times[0].
struct ExponentialFit {
    Seconds tau;
    double amplitude = 0.0;
    double offset = 0.0;
    Seconds sigma_tau;
    double sigma_amplitude = 0.0;
    double sigma_offset = 0.0;
    double residual_norm = 0.0;
    int iterations = 0;
};

ExponentialFit fit_exponential(std::span<const Seconds> times, std::span<const double> values,
                               const FitOptions& options = {});

/// r(P) = gain * P / (1 + P / p_sat), P in watts.
struct CompressionFit {
    double gain = 0.0;  ///< response per watt
    PowerWatts p_sat;
    PowerDbm p_1db;
    double sigma_gain = 0.0;
    PowerWatts sigma_p_sat;
    Decibels sigma_p_1db;
    double residual_norm = 0.0;
    int iterations = 0;
};

/// Input power at which the model's gain is 1 dB below its small-signal value.
PowerDbm compression_point(PowerWatts p_sat);

CompressionFit fit_compression(std::span<const PowerDbm> powers, std::span<const double> responses,
                               const FitOptions& options = {});

/// values[i][j] = p_1db[i][matched(i)] - p_1db[i][j]; matched entries are 0 and
/// marked, entries without a compression point are empty.
struct CrosstalkMatrix {
    std::vector<std::vector<std::optional<Decibels>>> values;
    std::vector<std::vector<bool>> matched;
    Decibels row_min;
    Decibels row_max;
    /// Column-wise reading: p_1db[owner(j)][j] - p_1db[i][j] for i != owner(j).
    std::vector<std::vector<std::optional<Decibels>>> column_values;
    Decibels column_min;
    Decibels column_max;
};

/// channel_map[i] is the filter index matched to bolometer i.
CrosstalkMatrix crosstalk_matrix(const std::vector<std::vector<std::optional<PowerDbm>>>& p1db,
                                 std::span<const std::size_t> channel_map);

/// Table-II layout: one column per channel; rows are the 2^(n-1) patterns
/// with the channel's own bit unset, then the matched (only own bit set) row.
struct SnrTable {
    std::vector<FrequencyHz> probe_frequencies;
    std::vector<std::string> row_labels;
    std::vector<std::vector<double>> values;      ///< [row][channel]
    std::vector<std::vector<bool>> zero_noise;    ///< [row][channel]

    /// Column label, probe frequency rounded to 1 MHz ("157 MHz").
    std::string column_label(std::size_t channel) const;
};

/// Requires a run for each of the 2^n patterns.
SnrTable snr_table(std::span<const MultiplexRun> runs);

/// Pattern (as bits over all channels) that populates row `row` of channel `channel`.
TriggerPattern snr_table_pattern(std::size_t n_channels, std::size_t channel, std::size_t row);

/// floor((f_max - f_min) / spacing)
long capacity_estimate(FrequencyHz f_min, FrequencyHz f_max, FrequencyHz spacing);

/// Full width at half maximum of the dominant peak of y(x) (half of the peak
/// value, crossings linearly interpolated); center is the crossings' midpoint.
struct PeakShape {
    FrequencyHz center;
    FrequencyHz fwhm;
    double peak = 0.0;
};

PeakShape peak_shape(std::span<const FrequencyHz> x, std::span<const double> y);

/// Display rounding to whole megahertz.
std::string megahertz_label(FrequencyHz f);

}  // namespace mxbolo
