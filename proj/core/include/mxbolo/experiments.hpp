#pragma once

// End-to-end simulated experiments on a multiplexed bolometer chip: probe
// sweeps, filter sweeps, heater-power sweeps, single triggers, the full
// pattern set and the chip calibration.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mxbolo/analysis.hpp"
#include "mxbolo/device.hpp"
#include "mxbolo/dsp.hpp"
#include "mxbolo/frontend.hpp"
#include "mxbolo/results.hpp"

namespace mxbolo {

/// Bolometers in ascending probe-frequency order (pattern bit order).
struct ChipConfig {
    std::vector<BolometerParams> bolometers;
    std::vector<ToneSpec> probes;             ///< probes[i] reads bolometers[i]
    std::vector<FilterParams> filters;
    std::vector<std::size_t> channel_map;     ///< bolometer i sits behind filters[channel_map[i]]
    /// Optional leakage override: floor_matrix[i][j] replaces the stopband
    /// floor seen by bolometer i for heater tones nearest to filters[j].
    std::optional<std::vector<std::vector<Decibels>>> floor_matrix;
    Decibels line_attenuation{0.0};           ///< applied to heater tones
    Volts noise_sigma{0.0};
    FrequencyHz sample_rate{1e9};

    std::size_t size() const { return bolometers.size(); }
    /// Structural invariants; throws ConfigurationError naming the first
    /// violation. Nyquist is checked when a record is synthesized.
    void validate() const;
};

struct Timing {
    Seconds record{100e-6};
    Seconds pulse_start{40e-6};
    Seconds pulse_duration{10e-6};
    Seconds discard{10e-6};                   ///< leading part dropped from traces and metrics
    Seconds dt{100e-9};                       ///< thermal integration step
    TimeWindow baseline{Seconds(10e-6), Seconds(30e-6)};
    TimeWindow signal{Seconds(47e-6), Seconds(52e-6)};

    void validate() const;
};

struct DspSettings {
    FrequencyHz bandwidth{1e6};
    FrequencyHz output_rate{10e6};
};

struct ExecutionOptions {
    unsigned threads = 1;
    bool allow_nonlinear = false;             ///< permit probe powers above p_nonlinear
};

/// Noise-stream namespaces; the first label of every derived stream.
enum class StreamKind : std::uint64_t {
    trigger = 1,
    noise_floor = 2,
    calibration = 3,
};

/// Heater power reaching bolometer i from the given tones.
PowerWatts delivered_heater_power(const ChipConfig& chip, std::size_t bolometer, std::span<const ToneSpec> tones);

/// Self-consistent operating point of every bolometer under its own probe.
std::vector<OperatingPoint> operating_points(const ChipConfig& chip, const ExecutionOptions& exec = {});

/// Noise-free received composite: each probe tone scaled by its
/// bolometer's instantaneous reflection while the heater pulses play.
TimeTrace simulate_clean(const ChipConfig& chip, std::span<const PulseSpec> pulses, const Timing& timing,
                         const ExecutionOptions& exec = {});

/// Band selection and down-conversion of every probe channel, trimmed to
/// start at timing.discard.
std::vector<IQTrace> demodulate_channels(const ChipConfig& chip, const TimeTrace& trace, const Timing& timing,
                                         const DspSettings& dsp);

/// |Gamma| at each (probe power, probe frequency) for one bolometer.
SweepResult run_probe_sweep(const ChipConfig& chip, std::size_t channel, std::span<const FrequencyHz> freqs,
                            std::span<const PowerDbm> powers, const ExecutionOptions& exec = {});

/// Steady-state |Gamma(heated) - Gamma(unheated)| at the channel's probe
/// frequency versus heater frequency.
SweepResult run_filter_sweep(const ChipConfig& chip, std::size_t channel, std::span<const FrequencyHz> heater_freqs,
                             PowerDbm heater_power, const ExecutionOptions& exec = {});

/// Time-domain response (signal mean - baseline mean of |IQ|) of every
/// bolometer to one heater tone at increasing power. surface[i] is
/// bolometer i's response over `powers`. Noise-free unless n_avg > 0.
SweepResult run_power_sweep(const ChipConfig& chip, FrequencyHz heater_frequency, std::span<const PowerDbm> powers,
                            const Timing& timing, const DspSettings& dsp, std::size_t n_avg = 0,
                            std::uint64_t seed = 0, const ExecutionOptions& exec = {});

/// Averages n_avg noisy realizations; n_avg = 0 gives the noise-free record.
MultiplexRun run_trigger(const ChipConfig& chip, const TriggerPattern& pattern, PowerDbm heater_power,
                         const Timing& timing, const DspSettings& dsp, std::size_t n_avg, std::uint64_t seed,
                         const ExecutionOptions& exec = {});

/// All 2^n patterns ordered by binary value.
std::vector<MultiplexRun> run_full_multiplex(const ChipConfig& chip, PowerDbm heater_power, const Timing& timing,
                                             const DspSettings& dsp, std::size_t n_avg, std::uint64_t seed,
                                             const ExecutionOptions& exec = {});

/// Relaxation after the pulse of one bolometer's demodulated magnitude.
struct TimeConstantResult {
    ExponentialFit fit;                        ///< effective (feedback-shortened) relaxation
    double loop_gain = 0.0;
    Seconds tau_thermal;                       ///< fit.tau * (1 + loop_gain)
    Seconds fit_start;
    Seconds fit_end;
};

TimeConstantResult extract_time_constant(const IQTrace& iq, const Timing& timing, double loop_gain,
                                         Seconds settle = Seconds(2e-6));

/// Triggers bolometer `channel` alone and fits its relaxation.
TimeConstantResult measure_time_constant(const ChipConfig& chip, std::size_t channel, PowerDbm heater_power,
                                         const Timing& timing, const DspSettings& dsp, std::size_t n_avg,
                                         std::uint64_t seed, const ExecutionOptions& exec = {});

/// Standard deviation of (averaged record - clean record) over the baseline
/// window at the full sample rate.
Volts measure_noise_floor(const ChipConfig& chip, const Timing& timing, std::size_t n_avg, std::uint64_t seed,
                          const ExecutionOptions& exec = {});

struct CalibrationTargets {
    double shift_linewidths = 0.5;             ///< steady matched-heater shift / linewidth
    PowerDbm heater_power{-135.0};
    double snr = 7.5;                          ///< mean matched-channel SNR
    std::size_t n_avg = 100;
    std::uint64_t seed = 1;
    double probe_grid_hz = 10e3;               ///< probe frequencies rounded to this grid
    bool place_probes = true;                  ///< move probes to the steepest point of |Gamma|
    std::size_t realizations = 16;             ///< independent noise draws averaged in the SNR search
    HertzPerKelvin dfdT_min{1e3};
    HertzPerKelvin dfdT_max{1e12};
    Volts sigma_min{1e-10};
    Volts sigma_max{1e-3};
};

struct ChannelCalibration {
    std::string name;
    FrequencyHz probe_frequency;
    HertzPerKelvin dfdT;
    double shift_linewidths = 0.0;
    double loop_gain = 0.0;
    double matched_snr = 0.0;
};

struct CalibrationReport {
    std::vector<ChannelCalibration> channels;
    Volts noise_sigma;
    double mean_snr = 0.0;
};

struct CalibrationResult {
    ChipConfig chip;
    CalibrationReport report;
};

CalibrationResult calibrate_chip(const ChipConfig& chip, const CalibrationTargets& targets, const Timing& timing,
                                 const DspSettings& dsp, const ExecutionOptions& exec = {});

/// Steady resonance shift caused by a heater tone at the matched filter center.
FrequencyHz matched_heater_shift(const ChipConfig& chip, std::size_t channel, PowerDbm heater_power,
                                 const ExecutionOptions& exec = {});

}  // namespace mxbolo
