#include "mxbolo/dsp.hpp"

#include <cmath>
#include <future>
#include <numbers>
#include <sstream>

#include "fft.hpp"
#include "mxbolo/error.hpp"

namespace mxbolo {
namespace {

// Tolerance for "inclusive" band edges, as a fraction of the bin spacing.
constexpr double kEdgeTolerance = 1e-9;

void check_band(const TimeTrace& trace, FrequencyHz lo, FrequencyHz hi, const char* what) {
    const double nyquist = 0.5 * trace.sample_rate.value();
    if (lo.value() < 0.0 || hi.value() > nyquist) {
        std::ostringstream msg;
        msg << what << ": band [" << lo.value() << ", " << hi.value() << "] Hz lies outside [0, " << nyquist
            << "] Hz";
        throw ConfigurationError(msg.str());
    }
}

std::vector<double> sum_range(std::size_t lo, std::size_t hi,
                              const std::function<std::vector<double>(std::size_t)>& make, unsigned budget) {
    if (hi - lo == 1) {
        return make(lo);
    }
    const std::size_t mid = lo + (hi - lo) / 2;
    std::vector<double> left;
    std::vector<double> right;
    if (budget > 1) {
        auto fut = std::async(std::launch::async, sum_range, lo, mid, std::cref(make), budget / 2);
        right = sum_range(mid, hi, make, budget - budget / 2);
        left = fut.get();
    } else {
        left = sum_range(lo, mid, make, 1);
        right = sum_range(mid, hi, make, 1);
    }
    if (left.size() != right.size()) {
        throw InvalidArgument("pairwise_mean: realizations differ in length");
    }
    for (std::size_t i = 0; i < left.size(); ++i) {
        left[i] += right[i];
    }
    return left;
}

}  // namespace

std::vector<double> IQTrace::magnitude() const {
    std::vector<double> m(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        m[i] = std::abs(samples[i]);
    }
    return m;
}

TimeTrace add_noise(const TimeTrace& trace, Volts sigma, RandomStream& stream) {
    if (sigma.value() < 0.0) {
        throw InvalidArgument("add_noise: sigma must be >= 0");
    }
    if (sigma.value() == 0.0) {
        return trace;
    }
    TimeTrace out{trace.sample_rate, trace.t0, trace.samples, std::nullopt};
    for (double& v : out.samples) {
        v += sigma.value() * stream.normal();
    }
    return out;
}

TimeTrace brickwall_bandpass(const TimeTrace& trace, FrequencyHz f_center, FrequencyHz bandwidth) {
    const double nyquist = 0.5 * trace.sample_rate.value();
    if (!(f_center.value() > 0.0 && f_center.value() < nyquist) || !(bandwidth.value() > 0.0)) {
        throw ConfigurationError("brickwall_bandpass: center must lie in (0, Nyquist) and bandwidth be positive");
    }
    const Band band{f_center - bandwidth * 0.5, f_center + bandwidth * 0.5};
    check_band(trace, band.lo, band.hi, "brickwall_bandpass");

    // Projection onto a band the samples already occupy is the identity.
    if (trace.band && band.contains(*trace.band)) {
        return trace;
    }

    const std::size_t n = trace.size();
    auto bins = detail::rfft(trace.samples);
    const double df = trace.sample_rate.value() / static_cast<double>(n);
    const double eps = kEdgeTolerance * df;
    for (std::size_t k = 0; k < bins.size(); ++k) {
        const double f = static_cast<double>(k) * df;
        if (f < band.lo.value() - eps || f > band.hi.value() + eps) {
            bins[k] = 0.0;
        }
    }
    TimeTrace out{trace.sample_rate, trace.t0, detail::irfft(bins, n), band};
    if (trace.band) {
        out.band = Band{std::max(band.lo, trace.band->lo), std::min(band.hi, trace.band->hi)};
    }
    return out;
}

IQTrace demodulate(const TimeTrace& trace, FrequencyHz f_carrier, FrequencyHz lp_bandwidth, std::size_t decimation) {
    const std::size_t n = trace.size();
    if (n == 0) {
        throw InvalidArgument("demodulate: empty trace");
    }
    if (decimation < 1 || n % decimation != 0) {
        throw ConfigurationError("demodulate: decimation " + std::to_string(decimation) +
                                 " must be >= 1 and divide the trace length " + std::to_string(n));
    }
    if (!(lp_bandwidth.value() > 0.0)) {
        throw ConfigurationError("demodulate: low-pass bandwidth must be positive");
    }
    check_band(trace, f_carrier - lp_bandwidth * 0.5, f_carrier + lp_bandwidth * 0.5, "demodulate");

    const double fs = trace.sample_rate.value();
    const double fc = f_carrier.value();
    const double t0_cycles = fc * trace.t0.value() - std::floor(fc * trace.t0.value());
    std::vector<std::complex<double>> mixed(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double cycles = std::fmod(fc * static_cast<double>(i), fs) / fs + t0_cycles;
        const double phase = -2.0 * std::numbers::pi * cycles;
        mixed[i] = trace.samples[i] * std::complex<double>(std::cos(phase), std::sin(phase));
    }

    auto spectrum = detail::fft(mixed, false);
    const double df = fs / static_cast<double>(n);
    const double half = 0.5 * lp_bandwidth.value() + kEdgeTolerance * df;
    for (std::size_t k = 0; k < n; ++k) {
        const double f = (k <= n / 2 ? static_cast<double>(k) : static_cast<double>(k) - static_cast<double>(n)) * df;
        if (std::abs(f) > half) {
            spectrum[k] = 0.0;
        }
    }
    const auto baseband = detail::fft(spectrum, true);

    IQTrace out{f_carrier, FrequencyHz(fs / static_cast<double>(decimation)), trace.t0, {}};
    out.samples.reserve(n / decimation);
    for (std::size_t i = 0; i < n; i += decimation) {
        out.samples.push_back(baseband[i]);
    }
    return out;
}

std::vector<double> pairwise_mean(std::size_t n, const std::function<std::vector<double>(std::size_t)>& make,
                                  unsigned threads) {
    if (n == 0) {
        throw InvalidArgument("pairwise_mean: no realizations");
    }
    auto sum = sum_range(0, n, make, std::max(threads, 1u));
    const double inv = 1.0 / static_cast<double>(n);
    for (double& v : sum) {
        v *= inv;
    }
    return sum;
}

TimeTrace average_traces(std::span<const TimeTrace> traces) {
    if (traces.empty()) {
        throw InvalidArgument("average_traces: empty list");
    }
    const TimeTrace& first = traces.front();
    for (const TimeTrace& t : traces) {
        if (t.size() != first.size() || t.sample_rate != first.sample_rate || t.t0 != first.t0) {
            throw InvalidArgument("average_traces: traces differ in shape");
        }
    }
    TimeTrace out{first.sample_rate, first.t0,
                  pairwise_mean(traces.size(), [&](std::size_t i) { return traces[i].samples; }), first.band};
    for (const TimeTrace& t : traces) {
        if (t.band != first.band) {
            out.band.reset();
        }
    }
    return out;
}

IQTrace average_traces(std::span<const IQTrace> traces) {
    if (traces.empty()) {
        throw InvalidArgument("average_traces: empty list");
    }
    const IQTrace& first = traces.front();
    for (const IQTrace& t : traces) {
        if (t.size() != first.size() || t.sample_rate != first.sample_rate || t.t0 != first.t0 ||
            t.carrier != first.carrier) {
            throw InvalidArgument("average_traces: traces differ in shape");
        }
    }
    // Interleaved re/im so the same reduction tree serves both types.
    const auto mean = pairwise_mean(traces.size(), [&](std::size_t i) {
        std::vector<double> flat(2 * traces[i].size());
        for (std::size_t k = 0; k < traces[i].size(); ++k) {
            flat[2 * k] = traces[i].samples[k].real();
            flat[2 * k + 1] = traces[i].samples[k].imag();
        }
        return flat;
    });
    IQTrace out{first.carrier, first.sample_rate, first.t0, std::vector<std::complex<double>>(first.size())};
    for (std::size_t k = 0; k < first.size(); ++k) {
        out.samples[k] = {mean[2 * k], mean[2 * k + 1]};
    }
    return out;
}

ResponseMetric response_metric(const IQTrace& iq, TimeWindow baseline, TimeWindow signal) {
    if (!(baseline.begin <= baseline.end) || !(signal.begin <= signal.end)) {
        throw InvalidArgument("response_metric: window end precedes its start");
    }
    if (baseline.end > signal.begin) {
        throw InvalidArgument("response_metric: baseline window must precede the signal window");
    }
    const double dt = 1.0 / iq.sample_rate.value();
    const double eps = 1e-9 * dt;
    const auto mag = iq.magnitude();

    const auto select = [&](TimeWindow w) {
        std::vector<double> v;
        for (std::size_t i = 0; i < mag.size(); ++i) {
            const double t = iq.time_at(i).value();
            if (t >= w.begin.value() - eps && t <= w.end.value() + eps) {
                v.push_back(mag[i]);
            }
        }
        return v;
    };
    const auto base = select(baseline);
    const auto sig = select(signal);
    if (base.size() < 2 || sig.empty()) {
        throw InvalidArgument("response_metric: window selects too few samples (baseline " +
                              std::to_string(base.size()) + ", signal " + std::to_string(sig.size()) + ")");
    }

    double base_mean = 0.0;
    for (double v : base) base_mean += v;
    base_mean /= static_cast<double>(base.size());
    double var = 0.0;
    for (double v : base) var += (v - base_mean) * (v - base_mean);
    var /= static_cast<double>(base.size() - 1);
    double sig_mean = 0.0;
    for (double v : sig) sig_mean += v;
    sig_mean /= static_cast<double>(sig.size());

    ResponseMetric m;
    m.signal_mean = Volts(sig_mean);
    m.baseline_mean = Volts(base_mean);
    m.baseline_std = Volts(std::sqrt(var));
    const double scale = std::max(std::abs(base_mean), std::abs(sig_mean));
    if (m.baseline_std.value() <= 1e-9 * scale || m.baseline_std.value() == 0.0) {
        m.zero_noise = true;
        m.snr = 0.0;
    } else {
        m.snr = (sig_mean - base_mean) / m.baseline_std.value();
    }
    return m;
}

}  // namespace mxbolo
