#include "mxbolo/workflows.hpp"

#include <algorithm>
#include <cmath>

#include "mxbolo/error.hpp"

namespace mxbolo {

std::vector<FrequencyHz> frequency_grid(FrequencyHz center, FrequencyHz half_span, FrequencyHz step) {
    if (!(step.value() > 0.0) || half_span.value() < 0.0) {
        throw InvalidArgument("frequency grid needs step > 0 and half span >= 0");
    }
    const auto k = static_cast<long>(std::floor(half_span / step * (1.0 + 1e-12)));
    std::vector<FrequencyHz> grid;
    for (long i = -k; i <= k; ++i) {
        grid.push_back(center + step * static_cast<double>(i));
    }
    return grid;
}

std::vector<PowerDbm> power_grid(PowerDbm lo, PowerDbm hi, Decibels step) {
    if (!(step.value() > 0.0) || hi < lo) {
        throw InvalidArgument("power grid needs step > 0 and hi >= lo");
    }
    const auto k = static_cast<long>(std::floor((hi - lo).value() / step.value() * (1.0 + 1e-12)));
    std::vector<PowerDbm> grid;
    for (long i = 0; i <= k; ++i) {
        grid.push_back(PowerDbm(lo.value() + step.value() * static_cast<double>(i)));
    }
    return grid;
}

Characterization characterize_channel(const ChipConfig& chip, std::size_t channel, std::span<const PowerDbm> powers,
                                      FrequencyHz half_span, FrequencyHz step, const ExecutionOptions& exec) {
    if (channel >= chip.size()) {
        throw InvalidArgument("channel out of range");
    }
    std::vector<PowerDbm> sorted(powers.begin(), powers.end());
    std::sort(sorted.begin(), sorted.end());
    const auto freqs = frequency_grid(chip.probes[channel].frequency, half_span, step);

    Characterization c;
    c.channel = channel;
    c.sweep = run_probe_sweep(chip, channel, freqs, sorted, exec);
    for (std::size_t r = 0; r < sorted.size(); ++r) {
        ResonanceFitRow row{sorted[r], std::nullopt, {}};
        std::vector<FrequencyHz> f;
        std::vector<double> y;
        for (std::size_t k = 0; k < freqs.size(); ++k) {
            const double m = c.sweep.surface[r][k];
            if (std::isfinite(m)) {
                f.push_back(freqs[k]);
                y.push_back(m * m);
            }
        }
        try {
            row.fit = fit_lorentzian(f, y);
        } catch (const FitError& err) {
            row.error = err.what();
        }
        c.rows.push_back(row);
    }
    if (!c.rows.empty() && c.rows.front().fit) {
        c.f_r0 = c.rows.front().fit->f_r;
        c.linewidth = c.rows.front().fit->fwhm;
    }
    return c;
}

FilterScan filterscan_channel(const ChipConfig& chip, std::size_t channel, PowerDbm heater_power,
                              FrequencyHz half_span, FrequencyHz step, const ExecutionOptions& exec) {
    if (channel >= chip.size()) {
        throw InvalidArgument("channel out of range");
    }
    const auto freqs = frequency_grid(chip.filters[chip.channel_map[channel]].f_center, half_span, step);
    FilterScan s;
    s.channel = channel;
    s.sweep = run_filter_sweep(chip, channel, freqs, heater_power, exec);
    const auto& row = s.sweep.surface.front();
    std::size_t best = 0;
    for (std::size_t k = 1; k < row.size(); ++k) {
        if (row[k] > row[best]) best = k;
    }
    s.grid_peak = freqs[best];
    try {
        s.shape = peak_shape(freqs, row);
    } catch (const InvalidArgument& err) {
        s.error = err.what();
    }
    return s;
}

PowerSweepAnalysis powersweep_chip(const ChipConfig& chip, std::span<const PowerDbm> powers, const Timing& timing,
                                   const DspSettings& dsp, std::size_t n_avg, std::uint64_t seed,
                                   const ExecutionOptions& exec) {
    chip.validate();
    const std::size_t n = chip.size();
    PowerSweepAnalysis a;
    a.fits.assign(n, std::vector<std::optional<CompressionFit>>(n));
    a.errors.assign(n, std::vector<std::string>(n));
    a.p_1db.assign(n, std::vector<std::optional<PowerDbm>>(n));
    for (std::size_t j = 0; j < n; ++j) {
        a.sweeps.push_back(run_power_sweep(chip, chip.filters[j].f_center, powers, timing, dsp, n_avg, seed,
                                           exec));
        for (std::size_t i = 0; i < n; ++i) {
            try {
                const CompressionFit fit = fit_compression(powers, a.sweeps.back().surface[i]);
                a.fits[i][j] = fit;
                a.p_1db[i][j] = fit.p_1db;
            } catch (const FitError& err) {
                a.errors[i][j] = err.what();
            }
        }
    }
    try {
        a.crosstalk = crosstalk_matrix(a.p_1db, chip.channel_map);
    } catch (const InvalidArgument& err) {
        a.crosstalk_error = err.what();
    }
    return a;
}

}  // namespace mxbolo
