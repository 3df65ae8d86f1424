#include "mxbolo/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include "mxbolo/error.hpp"

namespace mxbolo {
namespace {

constexpr double kGridTolerance = 1e-6;
constexpr std::uint64_t kPowerSweepStreams = 4;

std::size_t integer_ratio(double a, double b, const std::string& what) {
    const double r = a / b;
    const double k = std::round(r);
    if (!(k >= 1.0) || std::abs(r - k) > kGridTolerance * k) {
        std::ostringstream msg;
        msg << what << ": " << a << " / " << b << " is not a positive integer";
        throw ConfigurationError(msg.str());
    }
    return static_cast<std::size_t>(k);
}

/// Distinct label per (heater frequency, power index) within a power sweep.
std::uint64_t stream_label(FrequencyHz f, std::size_t k) {
    return static_cast<std::uint64_t>(std::llround(f.value())) * 1000U + k;
}

std::size_t nearest_filter(const ChipConfig& chip, FrequencyHz f) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < chip.filters.size(); ++j) {
        if (std::abs((chip.filters[j].f_center - f).value()) < std::abs((chip.filters[best].f_center - f).value())) {
            best = j;
        }
    }
    return best;
}

void check_nyquist(const ChipConfig& chip) {
    for (const ToneSpec& probe : chip.probes) {
        if (!(2.0 * probe.frequency.value() < chip.sample_rate.value())) {
            std::ostringstream msg;
            msg << "probe tone " << probe.frequency.value() << " Hz violates Nyquist for sample rate "
                << chip.sample_rate.value() << " Hz";
            throw ConfigurationError(msg.str());
        }
    }
}

void check_channel(const ChipConfig& chip, std::size_t channel) {
    if (channel >= chip.size()) {
        throw InvalidArgument("channel " + std::to_string(channel) + " out of range (chip has " +
                              std::to_string(chip.size()) + ")");
    }
}

void check_probe_power(const ChipConfig& chip, std::size_t i, PowerDbm p, const ExecutionOptions& exec) {
    if (!exec.allow_nonlinear && p > chip.bolometers[i].p_nonlinear) {
        std::ostringstream msg;
        msg << "probe power " << p.value() << " dBm on " << chip.bolometers[i].name << " exceeds the linear limit "
            << chip.bolometers[i].p_nonlinear.value() << " dBm (override required)";
        throw ConfigurationError(msg.str());
    }
}

std::vector<FrequencyHz> heater_centers(const ChipConfig& chip) {
    std::vector<FrequencyHz> c;
    for (std::size_t i = 0; i < chip.size(); ++i) {
        c.push_back(chip.filters[chip.channel_map[i]].f_center);
    }
    return c;
}

std::vector<FrequencyHz> probe_frequencies(const ChipConfig& chip) {
    std::vector<FrequencyHz> f;
    for (const ToneSpec& p : chip.probes) f.push_back(p.frequency);
    return f;
}

/// Mean over n_avg of (clean + sigma * N(0,1)), one derived stream per realization.
TimeTrace averaged_record(const TimeTrace& clean, Volts sigma, std::size_t n_avg, std::uint64_t seed,
                          std::uint64_t kind, std::uint64_t label, unsigned threads) {
    if (n_avg < 1) {
        throw InvalidArgument("n_avg must be >= 1");
    }
    if (sigma.value() == 0.0) {
        return clean;
    }
    const auto make = [&](std::size_t k) {
        RandomStream stream = derive_stream(seed, {kind, label, static_cast<std::uint64_t>(k)});
        std::vector<double> v(clean.samples);
        for (double& x : v) x += sigma.value() * stream.normal();
        return v;
    };
    return TimeTrace{clean.sample_rate, clean.t0, pairwise_mean(n_avg, make, threads), std::nullopt};
}

/// Mean over n_avg of unit-variance noise records.
std::vector<double> averaged_unit_noise(std::size_t n, std::size_t n_avg, std::uint64_t seed, std::uint64_t kind,
                                        std::uint64_t label, unsigned threads) {
    const auto make = [&](std::size_t k) {
        RandomStream stream = derive_stream(seed, {kind, label, static_cast<std::uint64_t>(k)});
        std::vector<double> v(n);
        stream.fill_normal(v);
        return v;
    };
    return pairwise_mean(n_avg, make, threads);
}

IQTrace demodulate_one(const ChipConfig& chip, const TimeTrace& trace, const Timing& timing, const DspSettings& dsp,
                       std::size_t i) {
    const std::size_t decimation = integer_ratio(chip.sample_rate.value(), dsp.output_rate.value(), "decimation");
    const FrequencyHz f = chip.probes[i].frequency;
    const TimeTrace band = brickwall_bandpass(trace, f, dsp.bandwidth);
    IQTrace iq = demodulate(band, f, dsp.bandwidth, decimation);
    const double eps = 1e-9 / iq.sample_rate.value();
    std::size_t first = 0;
    while (first < iq.size() && iq.time_at(first).value() < timing.discard.value() - eps) ++first;
    IQTrace out{iq.carrier, iq.sample_rate, iq.time_at(first), {}};
    out.samples.assign(iq.samples.begin() + static_cast<std::ptrdiff_t>(first), iq.samples.end());
    return out;
}

/// unit[r][i]: realization r of channel i's averaged unit noise.
double mean_matched_snr(const ChipConfig& chip, const std::vector<TimeTrace>& clean,
                        const std::vector<std::vector<std::vector<double>>>& unit, Volts sigma, const Timing& timing,
                        const DspSettings& dsp, std::vector<double>* per_channel) {
    std::vector<double> snr(chip.size(), 0.0);
    for (const auto& draw : unit) {
        for (std::size_t i = 0; i < chip.size(); ++i) {
            TimeTrace t = clean[i];
            for (std::size_t k = 0; k < t.samples.size(); ++k) t.samples[k] += sigma.value() * draw[i][k];
            snr[i] += response_metric(demodulate_one(chip, t, timing, dsp, i), timing.baseline, timing.signal).snr /
                      static_cast<double>(unit.size());
        }
    }
    if (per_channel) *per_channel = snr;
    return std::accumulate(snr.begin(), snr.end(), 0.0) / static_cast<double>(chip.size());
}

/// Offset above resonance, in linewidths, where |Gamma| is steepest.
double steepest_offset(const BolometerParams& p) {
    const double kappa = p.linewidth().value();
    const auto mag = [&](double x) {
        return std::abs(reflection_at(p, FrequencyHz(0.0), FrequencyHz(x * kappa)));
    };
    double best_x = 0.0;
    double best = -1.0;
    constexpr int n = 30000;
    constexpr double h = 1e-5;
    for (int k = 1; k <= n; ++k) {
        const double x = 3.0 * k / n;
        const double slope = (mag(x + h) - mag(x - h)) / (2.0 * h);
        if (slope > best) {
            best = slope;
            best_x = x;
        }
    }
    return best_x;
}

}  // namespace

void ChipConfig::validate() const {
    const std::size_t n = bolometers.size();
    if (n == 0) {
        throw ConfigurationError("chip has no bolometers");
    }
    if (probes.size() != n || filters.size() != n || channel_map.size() != n) {
        throw ConfigurationError("chip lists differ in length (bolometers, probes, filters, channel_map)");
    }
    std::vector<bool> used(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        if (channel_map[i] >= n || used[channel_map[i]]) {
            throw ConfigurationError("channel_map is not a bijection onto the filters");
        }
        used[channel_map[i]] = true;
        bolometers[i].validate();
        filters[i].validate();
        if (i > 0 && !(probes[i].frequency > probes[i - 1].frequency)) {
            throw ConfigurationError("probe tones must be listed in ascending frequency");
        }
    }
    if (floor_matrix) {
        if (floor_matrix->size() != n) {
            throw ConfigurationError("floor_matrix must have one row per bolometer");
        }
        for (const auto& row : *floor_matrix) {
            if (row.size() != n) {
                throw ConfigurationError("floor_matrix must have one column per filter");
            }
        }
    }
    if (!(noise_sigma.value() >= 0.0) || !std::isfinite(noise_sigma.value())) {
        throw ConfigurationError("noise sigma must be finite and >= 0");
    }
    if (!(sample_rate.value() > 0.0)) {
        throw ConfigurationError("sample rate must be positive");
    }
}

void Timing::validate() const {
    if (!(record.value() > 0.0) || !(dt.value() > 0.0)) {
        throw ConfigurationError("timing: record and dt must be positive");
    }
    integer_ratio(record.value(), dt.value(), "timing: record / dt");
    if (pulse_start.value() < 0.0 || !(pulse_duration.value() > 0.0) || pulse_start + pulse_duration > record) {
        throw ConfigurationError("timing: heater pulse must lie inside the record");
    }
    if (discard.value() < 0.0 || discard >= record) {
        throw ConfigurationError("timing: discard must lie inside the record");
    }
    if (baseline.begin < discard || !(baseline.begin < baseline.end) || !(baseline.end <= signal.begin) ||
        !(signal.begin < signal.end) || signal.end > record) {
        throw ConfigurationError("timing: need discard <= baseline < signal <= record");
    }
}

PowerWatts delivered_heater_power(const ChipConfig& chip, std::size_t bolometer, std::span<const ToneSpec> tones) {
    check_channel(chip, bolometer);
    const FilterParams& filter = chip.filters[chip.channel_map[bolometer]];
    double total = 0.0;
    for (const ToneSpec& tone : tones) {
        const Decibels floor =
            chip.floor_matrix ? (*chip.floor_matrix)[bolometer][nearest_filter(chip, tone.frequency)]
                              : filter.stopband_floor;
        total += dbm_to_watts(tone.power + chip.line_attenuation).value() *
                 filter_transmission(filter, tone.frequency, floor);
    }
    return PowerWatts(total);
}

std::vector<OperatingPoint> operating_points(const ChipConfig& chip, const ExecutionOptions& exec) {
    std::vector<OperatingPoint> ops;
    for (std::size_t i = 0; i < chip.size(); ++i) {
        check_probe_power(chip, i, chip.probes[i].power, exec);
        ops.push_back(
            solve_operating_point(chip.bolometers[i], chip.probes[i].frequency, dbm_to_watts(chip.probes[i].power)));
    }
    return ops;
}

TimeTrace simulate_clean(const ChipConfig& chip, std::span<const PulseSpec> pulses, const Timing& timing,
                         const ExecutionOptions& exec) {
    chip.validate();
    check_nyquist(chip);
    timing.validate();
    const double fs = chip.sample_rate.value();
    const std::size_t n = integer_ratio(timing.record.value() * fs, 1.0, "record length in samples");
    const std::size_t spp = integer_ratio(timing.dt.value() * fs, 1.0, "samples per thermal step");
    const std::size_t n_steps = n / spp;
    const auto ops = operating_points(chip, exec);

    TimeTrace trace{chip.sample_rate, Seconds(0.0), std::vector<double>(n, 0.0), std::nullopt};
    std::vector<ToneSpec> active;
    for (std::size_t i = 0; i < chip.size(); ++i) {
        const BolometerParams& p = chip.bolometers[i];
        const ToneSpec& probe = chip.probes[i];
        const double a = tone_amplitude(dbm_to_watts(probe.power)).value();
        const double f = probe.frequency.value();
        const PowerWatts p_probe = dbm_to_watts(probe.power);
        const double tau = p.tau_th.value();
        const double tb = p.t_bath.value();
        const double g = p.g_th.value();

        std::vector<double> decay(spp);
        for (std::size_t m = 0; m < spp; ++m) decay[m] = std::exp(-static_cast<double>(m) / fs / tau);

        BolometerState state(p, ops[i].t_star);
        for (std::size_t s = 0; s < n_steps; ++s) {
            const Seconds t_mid((static_cast<double>(s) + 0.5) * timing.dt.value());
            active.clear();
            for (const PulseSpec& pulse : pulses) {
                if (pulse.active_at(t_mid)) active.push_back(pulse.tone);
            }
            const PowerWatts p_heat = active.empty() ? PowerWatts(0.0) : delivered_heater_power(chip, i, active);
            // Midpoint rule for the feedback term: predict T at dt/2, hold P_abs(T_mid) over the step.
            const PowerWatts p_start = absorbed_probe_power(p, state, probe.frequency, p_probe) + p_heat;
            const BolometerState mid = thermal_step(p, state, timing.dt * 0.5, p_start);
            const PowerWatts p_step = absorbed_probe_power(p, mid, probe.frequency, p_probe) + p_heat;
            const double t_inf = tb + p_step.value() / g;
            const double t0 = state.t_e().value();
            for (std::size_t m = 0; m < spp; ++m) {
                const std::size_t idx = s * spp + m;
                const Kelvin te(t_inf + (t0 - t_inf) * decay[m]);
                const std::complex<double> gamma = reflection_at(p, resonance_at(p, te), probe.frequency);
                const double cycles = std::fmod(f * static_cast<double>(idx), fs) / fs;
                const double phase = 2.0 * std::numbers::pi * cycles + probe.phase_rad;
                trace.samples[idx] += a * (gamma.real() * std::cos(phase) - gamma.imag() * std::sin(phase));
            }
            state = thermal_step(p, state, timing.dt, p_step);
        }
    }
    return trace;
}

std::vector<IQTrace> demodulate_channels(const ChipConfig& chip, const TimeTrace& trace, const Timing& timing,
                                         const DspSettings& dsp) {
    std::vector<IQTrace> out;
    for (std::size_t i = 0; i < chip.size(); ++i) {
        out.push_back(demodulate_one(chip, trace, timing, dsp, i));
    }
    return out;
}

SweepResult run_probe_sweep(const ChipConfig& chip, std::size_t channel, std::span<const FrequencyHz> freqs,
                            std::span<const PowerDbm> powers, const ExecutionOptions& exec) {
    chip.validate();
    check_channel(chip, channel);
    if (freqs.empty() || powers.empty()) {
        throw InvalidArgument("probe sweep needs at least one frequency and one power");
    }
    for (FrequencyHz f : freqs) {
        if (!(f.value() > 0.0) || !(2.0 * f.value() < chip.sample_rate.value())) {
            std::ostringstream msg;
            msg << "probe frequency " << f.value() << " Hz outside (0, Nyquist)";
            throw ConfigurationError(msg.str());
        }
    }
    for (PowerDbm p : powers) check_probe_power(chip, channel, p, exec);

    const BolometerParams& params = chip.bolometers[channel];
    SweepResult r;
    r.kind = "probe";
    r.channel = channel;
    r.frequencies.assign(freqs.begin(), freqs.end());
    r.powers.assign(powers.begin(), powers.end());
    for (PowerDbm p : powers) {
        std::vector<double> row;
        std::vector<bool> flags;
        for (FrequencyHz f : freqs) {
            try {
                const OperatingPoint op = solve_operating_point(params, f, dbm_to_watts(p));
                row.push_back(std::abs(op.gamma));
                flags.push_back(op.multivalued);
                r.operating_points.push_back(op);
            } catch (const SolverError&) {
                row.push_back(std::numeric_limits<double>::quiet_NaN());
                flags.push_back(true);
                r.operating_points.push_back(OperatingPoint{});
            }
        }
        r.surface.push_back(std::move(row));
        r.flagged.push_back(std::move(flags));
    }
    for (const auto& row : r.surface) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (double v : row) {
            if (std::isfinite(v)) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        }
        std::vector<double> norm;
        for (double v : row) norm.push_back(hi > lo ? (v - lo) / (hi - lo) : 0.0);
        r.normalized.push_back(std::move(norm));
    }
    return r;
}

SweepResult run_filter_sweep(const ChipConfig& chip, std::size_t channel, std::span<const FrequencyHz> heater_freqs,
                             PowerDbm heater_power, const ExecutionOptions& exec) {
    chip.validate();
    check_channel(chip, channel);
    check_probe_power(chip, channel, chip.probes[channel].power, exec);
    const BolometerParams& params = chip.bolometers[channel];
    const ToneSpec& probe = chip.probes[channel];
    const PowerWatts p_probe = dbm_to_watts(probe.power);
    const OperatingPoint cold = solve_operating_point(params, probe.frequency, p_probe);

    SweepResult r;
    r.kind = "filter";
    r.channel = channel;
    r.frequencies.assign(heater_freqs.begin(), heater_freqs.end());
    r.powers = {heater_power};
    std::vector<double> row;
    std::vector<bool> flags;
    for (FrequencyHz f : heater_freqs) {
        const ToneSpec tone{f, heater_power, 0.0};
        const PowerWatts p_heat = delivered_heater_power(chip, channel, std::span(&tone, 1));
        try {
            const OperatingPoint op = solve_operating_point(params, probe.frequency, p_probe, p_heat);
            row.push_back(std::abs(op.gamma - cold.gamma));
            flags.push_back(op.multivalued);
            r.operating_points.push_back(op);
        } catch (const SolverError&) {
            row.push_back(std::numeric_limits<double>::quiet_NaN());
            flags.push_back(true);
            r.operating_points.push_back(OperatingPoint{});
        }
    }
    double hi = 0.0;
    for (double v : row) {
        if (std::isfinite(v)) hi = std::max(hi, v);
    }
    std::vector<double> norm;
    for (double v : row) norm.push_back(hi > 0.0 ? v / hi : 0.0);
    r.surface.push_back(std::move(row));
    r.normalized.push_back(std::move(norm));
    r.flagged.push_back(std::move(flags));
    return r;
}

SweepResult run_power_sweep(const ChipConfig& chip, FrequencyHz heater_frequency, std::span<const PowerDbm> powers,
                            const Timing& timing, const DspSettings& dsp, std::size_t n_avg, std::uint64_t seed,
                            const ExecutionOptions& exec) {
    chip.validate();
    if (powers.empty()) {
        throw InvalidArgument("power sweep needs at least one power");
    }
    for (std::size_t k = 1; k < powers.size(); ++k) {
        if (!(powers[k] > powers[k - 1])) {
            throw InvalidArgument("power sweep: powers must be strictly ascending");
        }
    }
    SweepResult r;
    r.kind = "power";
    r.frequencies = {heater_frequency};
    r.powers.assign(powers.begin(), powers.end());
    r.surface.assign(chip.size(), std::vector<double>(powers.size(), 0.0));
    r.flagged.assign(chip.size(), std::vector<bool>(powers.size(), false));
    r.operating_points = operating_points(chip, exec);
    for (std::size_t k = 0; k < powers.size(); ++k) {
        const PulseSpec pulse{ToneSpec{heater_frequency, powers[k], 0.0}, timing.pulse_start, timing.pulse_duration};
        const TimeTrace clean = simulate_clean(chip, std::span(&pulse, 1), timing, exec);
        const TimeTrace record = n_avg > 0 ? averaged_record(clean, chip.noise_sigma, n_avg, seed, kPowerSweepStreams,
                                                             stream_label(heater_frequency, k), exec.threads)
                                           : clean;
        const auto iqs = demodulate_channels(chip, record, timing, dsp);
        for (std::size_t i = 0; i < chip.size(); ++i) {
            const ResponseMetric m = response_metric(iqs[i], timing.baseline, timing.signal);
            r.surface[i][k] = (m.signal_mean - m.baseline_mean).value();
        }
    }
    for (const auto& row : r.surface) {
        const double hi = *std::max_element(row.begin(), row.end());
        const double lo = *std::min_element(row.begin(), row.end());
        std::vector<double> norm;
        for (double v : row) norm.push_back(hi > lo ? (v - lo) / (hi - lo) : 0.0);
        r.normalized.push_back(std::move(norm));
    }
    return r;
}

MultiplexRun run_trigger(const ChipConfig& chip, const TriggerPattern& pattern, PowerDbm heater_power,
                         const Timing& timing, const DspSettings& dsp, std::size_t n_avg, std::uint64_t seed,
                         const ExecutionOptions& exec) {
    chip.validate();
    const auto centers = heater_centers(chip);
    const auto pulses = schedule_heaters(pattern, centers, heater_power, timing.pulse_start, timing.pulse_duration);
    const TimeTrace clean = simulate_clean(chip, pulses, timing, exec);
    const TimeTrace record = n_avg > 0 ? averaged_record(clean, chip.noise_sigma, n_avg, seed,
                                                         static_cast<std::uint64_t>(StreamKind::trigger),
                                                         pattern.value(), exec.threads)
                                       : clean;
    MultiplexRun run;
    run.pattern = pattern;
    run.probe_frequencies = probe_frequencies(chip);
    run.traces = demodulate_channels(chip, record, timing, dsp);
    for (const IQTrace& iq : run.traces) {
        run.metrics.push_back(response_metric(iq, timing.baseline, timing.signal));
    }
    return run;
}

std::vector<MultiplexRun> run_full_multiplex(const ChipConfig& chip, PowerDbm heater_power, const Timing& timing,
                                             const DspSettings& dsp, std::size_t n_avg, std::uint64_t seed,
                                             const ExecutionOptions& exec) {
    const std::size_t n = chip.size();
    if (n > 16) {
        throw ConfigurationError("full multiplex is limited to 16 channels");
    }
    std::vector<MultiplexRun> runs;
    for (unsigned long v = 0; v < (1UL << n); ++v) {
        runs.push_back(run_trigger(chip, TriggerPattern::from_value(v, n), heater_power, timing, dsp, n_avg, seed, exec));
    }
    return runs;
}

TimeConstantResult extract_time_constant(const IQTrace& iq, const Timing& timing, double loop_gain, Seconds settle) {
    TimeConstantResult r;
    r.fit_start = timing.pulse_start + timing.pulse_duration + settle;
    const auto mag = iq.magnitude();
    std::vector<Seconds> t;
    std::vector<double> v;
    const double eps = 1e-9 / iq.sample_rate.value();
    for (std::size_t k = 0; k < iq.size(); ++k) {
        if (iq.time_at(k).value() >= r.fit_start.value() - eps) {
            t.push_back(iq.time_at(k));
            v.push_back(mag[k]);
        }
    }
    if (t.size() < 5) {
        throw InvalidArgument("time-constant fit window holds fewer than 5 samples");
    }
    r.fit_end = t.back();
    r.fit = fit_exponential(t, v);
    r.loop_gain = loop_gain;
    r.tau_thermal = r.fit.tau * (1.0 + loop_gain);
    return r;
}

TimeConstantResult measure_time_constant(const ChipConfig& chip, std::size_t channel, PowerDbm heater_power,
                                         const Timing& timing, const DspSettings& dsp, std::size_t n_avg,
                                         std::uint64_t seed, const ExecutionOptions& exec) {
    chip.validate();
    check_channel(chip, channel);
    TriggerPattern pattern;
    pattern.bits.assign(chip.size(), false);
    pattern.bits[channel] = true;
    const MultiplexRun run = run_trigger(chip, pattern, heater_power, timing, dsp, n_avg, seed, exec);
    const auto ops = operating_points(chip, exec);
    const double l = loop_gain(chip.bolometers[channel], ops[channel], chip.probes[channel].frequency,
                               dbm_to_watts(chip.probes[channel].power));
    return extract_time_constant(run.traces[channel], timing, l);
}

Volts measure_noise_floor(const ChipConfig& chip, const Timing& timing, std::size_t n_avg, std::uint64_t seed,
                          const ExecutionOptions& exec) {
    const TimeTrace clean = simulate_clean(chip, {}, timing, exec);
    const TimeTrace avg = averaged_record(clean, chip.noise_sigma, n_avg, seed,
                                          static_cast<std::uint64_t>(StreamKind::noise_floor), 0, exec.threads);
    const double eps = 1e-9 / chip.sample_rate.value();
    std::vector<double> res;
    for (std::size_t k = 0; k < clean.size(); ++k) {
        const double t = clean.time_at(k).value();
        if (t >= timing.baseline.begin.value() - eps && t <= timing.baseline.end.value() + eps) {
            res.push_back(avg.samples[k] - clean.samples[k]);
        }
    }
    if (res.size() < 2) {
        throw InvalidArgument("baseline window selects fewer than 2 samples");
    }
    double mean = 0.0;
    for (double x : res) mean += x;
    mean /= static_cast<double>(res.size());
    double var = 0.0;
    for (double x : res) var += (x - mean) * (x - mean);
    return Volts(std::sqrt(var / static_cast<double>(res.size() - 1)));
}

FrequencyHz matched_heater_shift(const ChipConfig& chip, std::size_t channel, PowerDbm heater_power,
                                 const ExecutionOptions& exec) {
    check_channel(chip, channel);
    check_probe_power(chip, channel, chip.probes[channel].power, exec);
    const BolometerParams& p = chip.bolometers[channel];
    const ToneSpec& probe = chip.probes[channel];
    const ToneSpec tone{chip.filters[chip.channel_map[channel]].f_center, heater_power, 0.0};
    const PowerWatts p_heat = delivered_heater_power(chip, channel, std::span(&tone, 1));
    const OperatingPoint cold = solve_operating_point(p, probe.frequency, dbm_to_watts(probe.power));
    const OperatingPoint hot = solve_operating_point(p, probe.frequency, dbm_to_watts(probe.power), p_heat);
    return cold.f_r_star - hot.f_r_star;
}

CalibrationResult calibrate_chip(const ChipConfig& chip, const CalibrationTargets& targets, const Timing& timing,
                                 const DspSettings& dsp, const ExecutionOptions& exec) {
    chip.validate();
    timing.validate();
    if (!(targets.shift_linewidths > 0.0) || !(targets.snr > 0.0) || targets.n_avg < 1 || targets.realizations < 1) {
        throw InvalidArgument("calibration targets must be positive");
    }
    ChipConfig out = chip;
    CalibrationReport report;

    const auto shift_error = [&](std::size_t i, double dfdT) {
        out.bolometers[i].dfdT = HertzPerKelvin(dfdT);
        const FrequencyHz s = matched_heater_shift(out, i, targets.heater_power, exec);
        return s / out.bolometers[i].linewidth() - targets.shift_linewidths;
    };
    const auto solve_dfdT = [&](std::size_t i) {
        double lo = std::log(targets.dfdT_min.value());
        double hi = std::log(targets.dfdT_max.value());
        // The operating-point solver gives up at extreme loop gain; pull the bracket in until it answers.
        double e_hi = 0.0;
        for (;;) {
            try {
                e_hi = shift_error(i, std::exp(hi));
                break;
            } catch (const SolverError&) {
                hi -= std::log(10.0);
                if (hi <= lo) {
                    throw CalibrationError("calibration of " + out.bolometers[i].name +
                                           ": operating point unsolvable across the dfdT range");
                }
            }
        }
        const double e_lo = shift_error(i, std::exp(lo));
        if (!(e_lo < 0.0 && e_hi > 0.0)) {
            std::ostringstream msg;
            msg << "calibration of " << out.bolometers[i].name << ": shift target " << targets.shift_linewidths
                << " linewidths not reachable with dfdT in [" << std::exp(lo) << ", " << std::exp(hi)
                << "] Hz/K (achieved " << e_lo + targets.shift_linewidths << " to " << e_hi + targets.shift_linewidths
                << ")";
            throw CalibrationError(msg.str());
        }
        for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
            const double mid = 0.5 * (lo + hi);
            (shift_error(i, std::exp(mid)) < 0.0 ? lo : hi) = mid;
        }
        out.bolometers[i].dfdT = HertzPerKelvin(std::exp(0.5 * (lo + hi)));
    };

    for (std::size_t i = 0; i < out.size(); ++i) {
        BolometerParams& p = out.bolometers[i];
        ToneSpec& probe = out.probes[i];
        if (targets.place_probes) {
            const double x = steepest_offset(p);
            for (int it = 0; it < 10; ++it) {
                solve_dfdT(i);
                const OperatingPoint op = solve_operating_point(p, probe.frequency, dbm_to_watts(probe.power));
                probe.frequency = op.f_r_star + p.linewidth() * x;
            }
            const double grid = targets.probe_grid_hz;
            probe.frequency = FrequencyHz(std::round(probe.frequency.value() / grid) * grid);
        }
        solve_dfdT(i);
        const OperatingPoint op = solve_operating_point(p, probe.frequency, dbm_to_watts(probe.power));
        ChannelCalibration c;
        c.name = p.name;
        c.probe_frequency = probe.frequency;
        c.dfdT = p.dfdT;
        c.shift_linewidths = matched_heater_shift(out, i, targets.heater_power, exec) / p.linewidth();
        c.loop_gain = loop_gain(p, op, probe.frequency, dbm_to_watts(probe.power));
        report.channels.push_back(c);
    }
    out.validate();

    // Averaged record = clean + sigma * (averaged unit noise), so each trial sigma costs one DSP pass.
    const auto centers = heater_centers(out);
    std::vector<TimeTrace> clean;
    std::vector<std::vector<std::vector<double>>> unit(targets.realizations);
    for (std::size_t i = 0; i < out.size(); ++i) {
        TriggerPattern pattern;
        pattern.bits.assign(out.size(), false);
        pattern.bits[i] = true;
        const auto pulses =
            schedule_heaters(pattern, centers, targets.heater_power, timing.pulse_start, timing.pulse_duration);
        clean.push_back(simulate_clean(out, pulses, timing, exec));
        for (std::size_t r = 0; r < targets.realizations; ++r) {
            const std::uint64_t label = (static_cast<std::uint64_t>(r) << out.size()) + pattern.value();
            unit[r].push_back(averaged_unit_noise(clean.back().size(), targets.n_avg, targets.seed,
                                                  static_cast<std::uint64_t>(StreamKind::calibration), label,
                                                  exec.threads));
        }
    }
    const auto snr_at = [&](double log_sigma) {
        return mean_matched_snr(out, clean, unit, Volts(std::exp(log_sigma)), timing, dsp, nullptr);
    };
    double lo = std::log(targets.sigma_min.value());
    double hi = std::log(targets.sigma_max.value());
    const double snr_lo_sigma = snr_at(lo);
    const double snr_hi_sigma = snr_at(hi);
    if (!(snr_lo_sigma > targets.snr && snr_hi_sigma < targets.snr)) {
        std::ostringstream msg;
        msg << "calibration: mean matched SNR " << targets.snr << " unreachable; noise sigma in ["
            << targets.sigma_min.value() << ", " << targets.sigma_max.value() << "] V gives SNR from " << snr_hi_sigma
            << " to " << snr_lo_sigma;
        throw CalibrationError(msg.str());
    }
    for (int it = 0; it < 200 && hi - lo > 1e-7; ++it) {
        const double mid = 0.5 * (lo + hi);
        (snr_at(mid) > targets.snr ? lo : hi) = mid;
    }
    out.noise_sigma = Volts(std::exp(0.5 * (lo + hi)));
    std::vector<double> per_channel;
    report.mean_snr = mean_matched_snr(out, clean, unit, out.noise_sigma, timing, dsp, &per_channel);
    for (std::size_t i = 0; i < out.size(); ++i) report.channels[i].matched_snr = per_channel[i];
    report.noise_sigma = out.noise_sigma;
    return CalibrationResult{out, report};
}

}  // namespace mxbolo
