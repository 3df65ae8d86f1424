#include "mxbolo/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "levenberg_marquardt.hpp"
#include "mxbolo/error.hpp"

namespace mxbolo {
namespace {

constexpr double kLn10 = 2.302585092994046;
constexpr double kMinCompressionDb = 0.01;

void require_finite(std::span<const double> v, const std::string& what) {
    for (double x : v) {
        if (!std::isfinite(x)) {
            throw InvalidArgument(what + ": non-finite value in input");
        }
    }
}

double max_abs(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

}  // namespace

LorentzianFit fit_lorentzian(std::span<const FrequencyHz> freqs, std::span<const double> values,
                             std::optional<LorentzianGuess> guess, const FitOptions& options) {
    const std::size_t m = freqs.size();
    if (m != values.size()) {
        throw InvalidArgument("fit_lorentzian: frequency and value counts differ");
    }
    if (m < 5) {
        throw FitError("fit_lorentzian: need at least 5 points");
    }
    require_finite(values, "fit_lorentzian");

    const auto [fmin_it, fmax_it] = std::minmax_element(freqs.begin(), freqs.end());
    const double x_mid = 0.5 * (fmin_it->value() + fmax_it->value());
    const double x_scale = 0.5 * (fmax_it->value() - fmin_it->value());
    if (!(x_scale > 0.0)) {
        throw FitError("fit_lorentzian: frequencies span zero width");
    }
    const double y_scale = std::max(max_abs(values), 1e-300);

    Eigen::VectorXd xs(m);
    Eigen::VectorXd ys(m);
    for (std::size_t i = 0; i < m; ++i) {
        xs[static_cast<Eigen::Index>(i)] = (freqs[i].value() - x_mid) / x_scale;
        ys[static_cast<Eigen::Index>(i)] = values[i] / y_scale;
    }

    Eigen::VectorXd p(4);
    if (guess) {
        p << (guess->f_r.value() - x_mid) / x_scale, guess->fwhm.value() / x_scale, guess->depth / y_scale,
            guess->offset / y_scale;
    } else {
        const Eigen::Index imin = [&] {
            Eigen::Index k;
            ys.minCoeff(&k);
            return k;
        }();
        const double c0 = ys.maxCoeff();
        const double d0 = c0 - ys[imin];
        if (!(d0 > 1e-12)) {
            throw FitError("fit_lorentzian: no dip found (depth not significant)");
        }
        double w_sum = 0.0;
        double m2 = 0.0;
        for (Eigen::Index i = 0; i < ys.size(); ++i) {
            const double w = c0 - ys[i];
            if (w >= 0.5 * d0) {
                w_sum += w;
                m2 += w * (xs[i] - xs[imin]) * (xs[i] - xs[imin]);
            }
        }
        const double spacing = 2.0 / static_cast<double>(m - 1);
        double w0 = 3.826 * std::sqrt(m2 / w_sum);
        if (!(w0 > spacing)) w0 = 2.0 * spacing;
        p << xs[imin], w0, d0, c0;
    }

    const auto model = [&](const Eigen::VectorXd& q, Eigen::VectorXd& r, Eigen::MatrixXd& J) {
        const double x0 = q[0];
        const double w = q[1];
        const double d = q[2];
        const double c = q[3];
        for (Eigen::Index i = 0; i < xs.size(); ++i) {
            const double u = 2.0 * (xs[i] - x0) / w;
            const double l = 1.0 / (1.0 + u * u);
            r[i] = c - d * l - ys[i];
            J(i, 0) = -4.0 * d * u * l * l / w;
            J(i, 1) = -2.0 * d * u * u * l * l / w;
            J(i, 2) = -l;
            J(i, 3) = 1.0;
        }
    };
    const auto res = detail::levenberg_marquardt(model, p, static_cast<Eigen::Index>(m), options, "fit_lorentzian");
    const auto& q = res.params;
    const auto sd = [&](int k) { return std::sqrt(std::max(res.covariance(k, k), 0.0)); };
    if (!(std::abs(q[2]) > 2.0 * sd(2))) {
        throw FitError("fit_lorentzian: depth not significant");
    }

    LorentzianFit out;
    out.f_r = FrequencyHz(x_mid + q[0] * x_scale);
    out.fwhm = FrequencyHz(std::abs(q[1]) * x_scale);
    out.depth = q[2] * y_scale;
    out.offset = q[3] * y_scale;
    out.sigma_f_r = FrequencyHz(sd(0) * x_scale);
    out.sigma_fwhm = FrequencyHz(sd(1) * x_scale);
    out.sigma_depth = sd(2) * y_scale;
    out.sigma_offset = sd(3) * y_scale;
    out.residual_norm = res.residual_norm * y_scale;
    out.iterations = res.iterations;
    return out;
}

ExponentialFit fit_exponential(std::span<const Seconds> times, std::span<const double> values,
                               const FitOptions& options) {
    const std::size_t m = times.size();
    if (m != values.size()) {
        throw InvalidArgument("fit_exponential: time and value counts differ");
    }
    if (m < 5) {
        throw FitError("fit_exponential: need at least 5 points");
    }
    require_finite(values, "fit_exponential");
    const double t_first = times.front().value();
    const double t_scale = times.back().value() - t_first;
    if (!(t_scale > 0.0)) {
        throw InvalidArgument("fit_exponential: times must increase");
    }
    const double y_scale = std::max(max_abs(values), 1e-300);

    Eigen::VectorXd s(m);
    Eigen::VectorXd ys(m);
    for (std::size_t i = 0; i < m; ++i) {
        s[static_cast<Eigen::Index>(i)] = (times[i].value() - t_first) / t_scale;
        ys[static_cast<Eigen::Index>(i)] = values[i] / y_scale;
    }

    // Offset from the tail, rate from a log-linear fit of what remains.
    const std::size_t tail = std::max<std::size_t>(m / 10, 1);
    double c0 = 0.0;
    for (std::size_t i = m - tail; i < m; ++i) c0 += ys[static_cast<Eigen::Index>(i)];
    c0 /= static_cast<double>(tail);
    const double a0 = ys[0] - c0;
    double spread = 0.0;
    for (Eigen::Index i = 0; i < ys.size(); ++i) spread = std::max(spread, std::abs(ys[i] - ys[0]));
    if (!(std::abs(a0) > 1e-12) || !(spread > 1e-12)) {
        throw FitError("fit_exponential: amplitude not significant");
    }
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    int k = 0;
    for (Eigen::Index i = 0; i < ys.size(); ++i) {
        const double e = (ys[i] - c0) / a0;
        if (e > 0.1) {
            const double ly = std::log(e);
            sx += s[i];
            sy += ly;
            sxx += s[i] * s[i];
            sxy += s[i] * ly;
            ++k;
        }
    }
    double r0 = 3.0;
    if (k >= 2) {
        const double den = k * sxx - sx * sx;
        if (den > 0.0) {
            const double slope = (k * sxy - sx * sy) / den;
            if (slope < 0.0) r0 = -slope;
        }
    }

    Eigen::VectorXd p(3);
    p << r0, a0, c0;
    const auto model = [&](const Eigen::VectorXd& q, Eigen::VectorXd& r, Eigen::MatrixXd& J) {
        for (Eigen::Index i = 0; i < s.size(); ++i) {
            const double e = std::exp(-q[0] * s[i]);
            r[i] = q[2] + q[1] * e - ys[i];
            J(i, 0) = -q[1] * s[i] * e;
            J(i, 1) = e;
            J(i, 2) = 1.0;
        }
    };
    const auto res = detail::levenberg_marquardt(model, p, static_cast<Eigen::Index>(m), options, "fit_exponential");
    const auto& q = res.params;
    const auto sd = [&](int j) { return std::sqrt(std::max(res.covariance(j, j), 0.0)); };
    if (!(q[0] > 0.0)) {
        throw FitError("fit_exponential: fitted rate is not a decay");
    }
    if (!(std::abs(q[1]) > 2.0 * sd(1))) {
        throw FitError("fit_exponential: amplitude not significant");
    }

    ExponentialFit out;
    out.tau = Seconds(t_scale / q[0]);
    out.amplitude = q[1] * y_scale;
    out.offset = q[2] * y_scale;
    out.sigma_tau = Seconds(t_scale * sd(0) / (q[0] * q[0]));
    out.sigma_amplitude = sd(1) * y_scale;
    out.sigma_offset = sd(2) * y_scale;
    out.residual_norm = res.residual_norm * y_scale;
    out.iterations = res.iterations;
    return out;
}

PowerDbm compression_point(PowerWatts p_sat) {
    if (!(p_sat.value() > 0.0)) {
        throw DomainError("compression_point: saturation power must be positive");
    }
    return watts_to_dbm(PowerWatts((std::pow(10.0, 0.05) - 1.0) * p_sat.value()));
}

CompressionFit fit_compression(std::span<const PowerDbm> powers, std::span<const double> responses,
                               const FitOptions& options) {
    const std::size_t m = powers.size();
    if (m != responses.size()) {
        throw InvalidArgument("fit_compression: power and response counts differ");
    }
    if (m < 4) {
        throw FitError("fit_compression: need at least 4 points");
    }
    require_finite(responses, "fit_compression");

    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return powers[a] < powers[b]; });
    std::vector<double> pw(m);
    std::vector<double> rv(m);
    for (std::size_t i = 0; i < m; ++i) {
        pw[i] = dbm_to_watts(powers[order[i]]).value();
        rv[i] = responses[order[i]];
    }
    const double p_ref = pw.back();
    const double y_scale = max_abs(rv);
    if (!(y_scale > 0.0)) {
        throw FitError("fit_compression: response is identically zero");
    }
    Eigen::VectorXd y(m);
    Eigen::VectorXd rs(m);
    for (std::size_t i = 0; i < m; ++i) {
        y[static_cast<Eigen::Index>(i)] = pw[i] / p_ref;
        rs[static_cast<Eigen::Index>(i)] = rv[i] / y_scale;
    }

    // Small-signal gain through the origin over the lowest decade of power.
    double num = 0.0;
    double den = 0.0;
    std::size_t n_low = 0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (pw[static_cast<std::size_t>(i)] <= 10.0 * pw.front() || n_low < 2) {
            num += y[i] * rs[i];
            den += y[i] * y[i];
            ++n_low;
        }
    }
    const double a0 = num / den;
    if (!(std::abs(a0) > 0.0) || !std::isfinite(a0)) {
        throw FitError("fit_compression: small-signal gain not significant");
    }
    double q0 = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (rs[i] / (a0 * y[i]) <= 0.5) {
            q0 = 1.0 / y[i];
            break;
        }
    }
    if (q0 == 0.0) {
        const double g_last = rs[y.size() - 1] / (a0 * y[y.size() - 1]);
        q0 = (g_last > 0.0 && g_last < 1.0) ? (1.0 / g_last - 1.0) : 1e-3;
    }

    Eigen::VectorXd p(2);
    p << a0, q0;
    const auto model = [&](const Eigen::VectorXd& q, Eigen::VectorXd& r, Eigen::MatrixXd& J) {
        for (Eigen::Index i = 0; i < y.size(); ++i) {
            const double d = 1.0 + q[1] * y[i];
            r[i] = q[0] * y[i] / d - rs[i];
            J(i, 0) = y[i] / d;
            J(i, 1) = -q[0] * y[i] * y[i] / (d * d);
        }
    };
    const auto res = detail::levenberg_marquardt(model, p, static_cast<Eigen::Index>(m), options, "fit_compression");
    const auto& q = res.params;
    const auto sd = [&](int j) { return std::sqrt(std::max(res.covariance(j, j), 0.0)); };
    // Compression at the highest measured power, amplitude dB.
    const double top_compression_db = 20.0 * std::log10(1.0 + std::max(q[1], 0.0));
    if (!(q[1] > 0.0) || !(q[1] > 2.0 * sd(1)) || top_compression_db < kMinCompressionDb) {
        throw FitError("fit_compression: data entirely linear: widen power range");
    }

    CompressionFit out;
    out.gain = q[0] * y_scale / p_ref;
    out.p_sat = PowerWatts(p_ref / q[1]);
    out.p_1db = compression_point(out.p_sat);
    out.sigma_gain = sd(0) * y_scale / p_ref;
    out.sigma_p_sat = PowerWatts(p_ref * sd(1) / (q[1] * q[1]));
    out.sigma_p_1db = Decibels(10.0 / kLn10 * sd(1) / q[1]);
    out.residual_norm = res.residual_norm * y_scale;
    out.iterations = res.iterations;
    return out;
}

CrosstalkMatrix crosstalk_matrix(const std::vector<std::vector<std::optional<PowerDbm>>>& p1db,
                                 std::span<const std::size_t> channel_map) {
    const std::size_t n = p1db.size();
    if (n == 0 || channel_map.size() != n) {
        throw InvalidArgument("crosstalk_matrix: channel map must have one entry per bolometer");
    }
    std::vector<std::size_t> owner(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        if (p1db[i].size() != n) {
            throw InvalidArgument("crosstalk_matrix: matrix must be square");
        }
        if (channel_map[i] >= n || owner[channel_map[i]] != n) {
            throw InvalidArgument("crosstalk_matrix: channel map is not a permutation");
        }
        owner[channel_map[i]] = i;
        if (!p1db[i][channel_map[i]]) {
            throw InvalidArgument("crosstalk_matrix: missing matched compression point for bolometer " +
                                  std::to_string(i));
        }
    }

    CrosstalkMatrix out;
    out.values.assign(n, std::vector<std::optional<Decibels>>(n));
    out.matched.assign(n, std::vector<bool>(n, false));
    out.column_values.assign(n, std::vector<std::optional<Decibels>>(n));
    bool any_row = false;
    bool any_col = false;
    for (std::size_t i = 0; i < n; ++i) {
        const PowerDbm own = *p1db[i][channel_map[i]];
        for (std::size_t j = 0; j < n; ++j) {
            if (j == channel_map[i]) {
                out.values[i][j] = Decibels(0.0);
                out.matched[i][j] = true;
                continue;
            }
            if (p1db[i][j]) {
                const Decibels v = own - *p1db[i][j];
                out.values[i][j] = v;
                out.row_min = any_row ? std::min(out.row_min, v) : v;
                out.row_max = any_row ? std::max(out.row_max, v) : v;
                any_row = true;
            }
            const std::size_t o = owner[j];
            if (o != i && p1db[i][j] && p1db[o][j]) {
                const Decibels v = *p1db[o][j] - *p1db[i][j];
                out.column_values[i][j] = v;
                out.column_min = any_col ? std::min(out.column_min, v) : v;
                out.column_max = any_col ? std::max(out.column_max, v) : v;
                any_col = true;
            }
        }
    }
    return out;
}

std::string SnrTable::column_label(std::size_t channel) const {
    return megahertz_label(probe_frequencies.at(channel));
}

TriggerPattern snr_table_pattern(std::size_t n_channels, std::size_t channel, std::size_t row) {
    if (n_channels == 0 || n_channels > 20 || channel >= n_channels) {
        throw InvalidArgument("snr_table_pattern: channel out of range");
    }
    const std::size_t n_rows = std::size_t{1} << (n_channels - 1);
    if (row > n_rows) {
        throw InvalidArgument("snr_table_pattern: row out of range");
    }
    TriggerPattern p;
    p.bits.assign(n_channels, false);
    if (row == n_rows) {
        p.bits[channel] = true;
        return p;
    }
    std::size_t bit = 0;
    for (std::size_t k = 0; k < n_channels; ++k) {
        if (k == channel) continue;
        p.bits[k] = ((row >> bit) & 1U) != 0;
        ++bit;
    }
    return p;
}

SnrTable snr_table(std::span<const MultiplexRun> runs) {
    if (runs.empty()) {
        throw InvalidArgument("snr_table: no runs");
    }
    const std::size_t n = runs.front().pattern.size();
    if (n == 0 || n > 20) {
        throw InvalidArgument("snr_table: unsupported channel count");
    }
    for (const auto& r : runs) {
        if (r.pattern.size() != n || r.metrics.size() != n) {
            throw InvalidArgument("snr_table: runs disagree on the channel count");
        }
    }
    const std::size_t n_rows = (std::size_t{1} << (n - 1)) + 1;
    std::vector<bool> seen(std::size_t{1} << n, false);
    for (const auto& r : runs) seen[r.pattern.value()] = true;
    if (std::count(seen.begin(), seen.end(), true) != static_cast<long>(seen.size())) {
        throw InvalidArgument("snr_table: runs must cover all " + std::to_string(seen.size()) + " patterns");
    }

    SnrTable t;
    t.probe_frequencies = runs.front().probe_frequencies;
    if (n == 3) {
        t.row_labels = {"all heaters off", "one heater on", "the other heater on", "both heaters on", "SNR"};
    } else if (n == 2) {
        t.row_labels = {"all heaters off", "other heater on", "SNR"};
    } else if (n == 1) {
        t.row_labels = {"heater off", "SNR"};
    } else {
        for (std::size_t r = 0; r + 1 < n_rows; ++r) {
            std::string label = "others ";
            for (std::size_t b = n - 1; b-- > 0;) label += ((r >> b) & 1U) ? '1' : '0';
            t.row_labels.push_back(label);
        }
        t.row_labels.push_back("SNR");
    }
    t.values.assign(n_rows, std::vector<double>(n, 0.0));
    t.zero_noise.assign(n_rows, std::vector<bool>(n, false));
    for (std::size_t ch = 0; ch < n; ++ch) {
        for (std::size_t row = 0; row < n_rows; ++row) {
            const TriggerPattern want = snr_table_pattern(n, ch, row);
            const auto it = std::find_if(runs.begin(), runs.end(), [&](const MultiplexRun& r) { return r.pattern == want; });
            if (it == runs.end()) {
                throw InvalidArgument("snr_table: no run for pattern " + pattern_to_label(want));
            }
            t.values[row][ch] = it->metrics[ch].snr;
            t.zero_noise[row][ch] = it->metrics[ch].zero_noise;
        }
    }
    return t;
}

long capacity_estimate(FrequencyHz f_min, FrequencyHz f_max, FrequencyHz spacing) {
    if (!(spacing.value() > 0.0)) {
        throw InvalidArgument("capacity_estimate: spacing must be positive");
    }
    if (!(f_max > f_min) || !(f_min.value() >= 0.0)) {
        throw InvalidArgument("capacity_estimate: need 0 <= f_min < f_max");
    }
    return static_cast<long>(std::floor((f_max - f_min) / spacing * (1.0 + 1e-12)));
}

PeakShape peak_shape(std::span<const FrequencyHz> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 3) {
        throw InvalidArgument("peak_shape: need at least 3 matching points");
    }
    require_finite(y, "peak_shape");
    const std::size_t k = static_cast<std::size_t>(std::max_element(y.begin(), y.end()) - y.begin());
    const double peak = y[k];
    if (!(peak > 0.0)) {
        throw InvalidArgument("peak_shape: no positive peak");
    }
    const double half = 0.5 * peak;
    const auto cross = [&](std::size_t a, std::size_t b) {
        const double t = (y[a] - half) / (y[a] - y[b]);
        return x[a].value() + t * (x[b].value() - x[a].value());
    };
    std::optional<double> left;
    for (std::size_t i = k; i > 0; --i) {
        if (y[i - 1] < half) {
            left = cross(i, i - 1);
            break;
        }
    }
    std::optional<double> right;
    for (std::size_t i = k; i + 1 < y.size(); ++i) {
        if (y[i + 1] < half) {
            right = cross(i, i + 1);
            break;
        }
    }
    if (!left || !right) {
        throw InvalidArgument("peak_shape: half maximum not bracketed by the scan");
    }
    return PeakShape{FrequencyHz(0.5 * (*left + *right)), FrequencyHz(*right - *left), peak};
}

std::string megahertz_label(FrequencyHz f) {
    std::ostringstream s;
    s << std::llround(f.value() / 1e6) << " MHz";
    return s.str();
}

}  // namespace mxbolo
