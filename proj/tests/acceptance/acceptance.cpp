// One PASS/FAIL line per acceptance criterion; exits 1 when any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <unistd.h>

#include "mxbolo/analysis.hpp"
#include "mxbolo/cli.hpp"
#include "mxbolo/config.hpp"
#include "mxbolo/device.hpp"
#include "mxbolo/dsp.hpp"
#include "mxbolo/experiments.hpp"
#include "mxbolo/frontend.hpp"
#include "mxbolo/random.hpp"
#include "mxbolo/workflows.hpp"

namespace fs = std::filesystem;
using namespace mxbolo;

namespace tol {
constexpr double f_r0_hz = 0.01e6;
constexpr double linewidth_rel = 0.05;
constexpr double characterize_s = 10.0;
constexpr double dip_jitter_hz = 1.0;  // allowed upward step between adjacent fits
constexpr double feedback_s = 30.0;
constexpr double filter_fwhm_rel = 0.20;
constexpr double filterscan_s = 30.0;
constexpr double p1db_recovery_db = 0.5;
constexpr double p1db_closed_form_dbm = -99.14;
constexpr double p1db_closed_form_db = 0.05;
constexpr double crosstalk_db = 0.01;
constexpr double matched_snr_min = 5.0;
constexpr double leak_snr_max = 1.0;
constexpr double multiplex_s = 120.0;
constexpr double tau_rel = 0.05;
constexpr double tau_s = 30.0;
constexpr double sqrt_n_ratio = 8.0;
constexpr double sqrt_n_rel = 0.20;
constexpr double passband = 1e-9;
constexpr double stopband = 1e-12;
constexpr double comb_rel = 1e-3;
constexpr double semigroup_rel = 1e-12;
constexpr double dsp_suite_s = 60.0;
}  // namespace tol

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int precision = 4) {
    std::ostringstream s;
    s << std::setprecision(precision) << v;
    return s.str();
}

unsigned worker_threads() { return std::max(2u, std::thread::hardware_concurrency()); }

Outcome resonance_characterization(const ExperimentConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o{true, ""};
    const double expected_f[] = {156.7e6, 179.3e6, 193.7e6};
    const double expected_w[] = {0.31e6, 0.14e6, 0.61e6};
    for (std::size_t i = 0; i < cfg.chip.size(); ++i) {
        const auto c = characterize_channel(cfg.chip, i, cfg.sweeps.characterize_powers,
                                            cfg.sweeps.characterize_half_span, cfg.sweeps.characterize_step);
        if (!c.f_r0) {
            o.pass = false;
            o.detail += cfg.chip.bolometers[i].name + " fit failed; ";
            continue;
        }
        const double df = std::abs(c.f_r0->value() - expected_f[i]);
        const double dw = std::abs(c.linewidth->value() - expected_w[i]) / expected_w[i];
        o.pass = o.pass && df <= tol::f_r0_hz && dw <= tol::linewidth_rel;
        o.detail += cfg.chip.bolometers[i].name + " f_r0 " + fmt(c.f_r0->value() / 1e6, 7) + " MHz, linewidth " +
                    fmt(c.linewidth->value() / 1e6, 4) + " MHz; ";
    }
    const double t = seconds_since(t0);
    o.pass = o.pass && t < tol::characterize_s;
    o.detail += fmt(t, 3) + " s";
    return o;
}

Outcome electrothermal_feedback(const ExperimentConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto powers = power_grid(PowerDbm(-160.0), PowerDbm(-130.0), Decibels(2.5));
    Outcome o{true, ""};
    for (std::size_t i = 0; i < cfg.chip.size(); ++i) {
        const auto c = characterize_channel(cfg.chip, i, powers, cfg.sweeps.characterize_half_span,
                                            cfg.sweeps.characterize_step);
        double worst_rise = -std::numeric_limits<double>::infinity();
        bool all_fit = true;
        for (std::size_t k = 0; k < c.rows.size(); ++k) {
            if (!c.rows[k].fit) {
                all_fit = false;
                break;
            }
            if (k > 0) worst_rise = std::max(worst_rise, (c.rows[k].fit->f_r - c.rows[k - 1].fit->f_r).value());
        }
        const bool ok = all_fit && worst_rise <= tol::dip_jitter_hz;
        o.pass = o.pass && ok;
        o.detail += cfg.chip.bolometers[i].name + (all_fit ? " total shift " +
                                                                 fmt((c.rows.back().fit->f_r - c.rows.front().fit->f_r)
                                                                         .value() / 1e3, 4) +
                                                                 " kHz, largest rise " + fmt(worst_rise, 3) + " Hz; "
                                                           : " fit failed; ");
    }
    const double t = seconds_since(t0);
    o.pass = o.pass && t < tol::feedback_s;
    o.detail += fmt(t, 3) + " s";
    return o;
}

Outcome filter_scan(const ExperimentConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o{true, ""};
    const double expected[] = {5.8e9, 4.4e9, 7.6e9};
    for (std::size_t i = 0; i < cfg.chip.size(); ++i) {
        const auto s = filterscan_channel(cfg.chip, i, cfg.sweeps.filterscan_power, cfg.sweeps.filterscan_half_span,
                                          cfg.sweeps.filterscan_step);
        const bool peak_ok = std::abs(s.grid_peak.value() - expected[i]) <= cfg.sweeps.filterscan_step.value();
        const bool fwhm_ok = s.shape && std::abs(s.shape->fwhm.value() - 100e6) / 100e6 <= tol::filter_fwhm_rel;
        o.pass = o.pass && peak_ok && fwhm_ok;
        o.detail += cfg.chip.bolometers[i].name + " peak " + fmt(s.grid_peak.value() / 1e9, 4) + " GHz, FWHM " +
                    (s.shape ? fmt(s.shape->fwhm.value() / 1e6, 4) + " MHz; " : "n/a; ");
    }
    const double t = seconds_since(t0);
    o.pass = o.pass && t < tol::filterscan_s;
    o.detail += fmt(t, 3) + " s";
    return o;
}

Outcome compression_pipeline(const ExperimentConfig& cfg) {
    Outcome o{true, ""};
    const double closed = compression_point(PowerWatts(1e-12)).value();
    o.pass = std::abs(closed - tol::p1db_closed_form_dbm) <= tol::p1db_closed_form_db;
    o.detail = "P1dB(1 pW) " + fmt(closed, 6) + " dBm; ";
    const auto powers = power_grid(cfg.sweeps.powersweep_min, cfg.sweeps.powersweep_max, cfg.sweeps.powersweep_step);
    double worst = 0.0;
    for (double p_sat : {3e-15, 1e-13, 2e-12}) {
        for (double noise : {0.0, 0.002}) {
            RandomStream stream = derive_stream(11, {static_cast<std::uint64_t>(p_sat * 1e18)});
            constexpr double gain = 4e8;
            const double r_max = gain * p_sat;
            std::vector<double> r;
            for (PowerDbm p : powers) {
                const double w = dbm_to_watts(p).value();
                r.push_back(gain * w / (1.0 + w / p_sat) + noise * r_max * stream.normal());
            }
            const auto fit = fit_compression(powers, r);
            worst = std::max(worst, std::abs(fit.p_1db.value() - compression_point(PowerWatts(p_sat)).value()));
        }
    }
    o.pass = o.pass && worst <= tol::p1db_recovery_db;
    o.detail += "worst P1dB recovery error " + fmt(worst, 3) + " dB over 6 synthetic sweeps";
    return o;
}

Outcome crosstalk_arithmetic() {
    // Rows in chip order (B2, B3, B1); columns 4.4, 5.8, 7.6 GHz.
    const std::vector<std::vector<std::optional<PowerDbm>>> p1db = {
        {PowerDbm(-114.3), PowerDbm(-135.5), PowerDbm(-116.4)},
        {PowerDbm(-132.0), PowerDbm(-120.0), PowerDbm(-120.0)},
        {PowerDbm(-106.3), PowerDbm(-101.9), PowerDbm(-128.2)},
    };
    const std::vector<std::size_t> map = {1, 0, 2};
    const auto x = crosstalk_matrix(p1db, map);
    const double b3 = x.values[1][1]->value();
    const double b1 = x.values[2][1]->value();
    Outcome o;
    o.pass = std::abs(b3 - -12.0) <= tol::crosstalk_db && std::abs(b1 - -26.3) <= tol::crosstalk_db;
    o.detail = "B3 via 5.8 GHz " + fmt(b3, 6) + " dB, B1 via 5.8 GHz " + fmt(b1, 6) + " dB";
    return o;
}

Outcome multiplexed_isolation(const ExperimentConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    ExecutionOptions exec;
    exec.threads = worker_threads();
    const auto runs = run_full_multiplex(cfg.chip, PowerDbm(-135.0), cfg.timing, cfg.dsp, cfg.n_avg, cfg.seed, exec);
    double min_matched = std::numeric_limits<double>::infinity();
    double max_leak = 0.0;
    std::string worst_leak;
    for (const auto& run : runs) {
        for (std::size_t i = 0; i < run.metrics.size(); ++i) {
            const double snr = run.metrics[i].snr;
            if (run.pattern.bits[i]) {
                min_matched = std::min(min_matched, snr);
            } else if (std::abs(snr) > max_leak) {
                max_leak = std::abs(snr);
                worst_leak = pattern_to_label(run.pattern) + "/" + cfg.chip.bolometers[i].name;
            }
        }
    }
    const double t = seconds_since(t0);
    Outcome o;
    o.pass = min_matched > tol::matched_snr_min && max_leak < tol::leak_snr_max && t < tol::multiplex_s;
    o.detail = "preset " + cfg.preset + ", seed " + std::to_string(cfg.seed) + ": min matched SNR " +
               fmt(min_matched, 3) + ", max |leakage| " + fmt(max_leak, 3) + " (" + worst_leak + "); " + fmt(t, 3) +
               " s";
    return o;
}

Outcome time_constants(const ExperimentConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o{true, ""};
    for (std::size_t i = 0; i < cfg.chip.size(); ++i) {
        const auto r = measure_time_constant(cfg.chip, i, cfg.sweeps.time_constant_power, cfg.timing, cfg.dsp,
                                             cfg.sweeps.time_constant_n_avg, cfg.seed);
        const double expected = cfg.chip.bolometers[i].tau_th.value();
        const double rel = std::abs(r.tau_thermal.value() - expected) / expected;
        o.pass = o.pass && rel <= tol::tau_rel;
        o.detail += cfg.chip.bolometers[i].name + " " + fmt(r.tau_thermal.value() * 1e6, 4) + " us (configured " +
                    fmt(expected * 1e6, 3) + "); ";
    }
    const double t = seconds_since(t0);
    o.pass = o.pass && t < tol::tau_s;
    o.detail += fmt(t, 3) + " s";
    return o;
}

Outcome sqrt_n_averaging(const ExperimentConfig& cfg) {
    ExecutionOptions exec;
    exec.threads = worker_threads();
    const double s16 = measure_noise_floor(cfg.chip, cfg.timing, 16, cfg.seed, exec).value();
    const double s1024 = measure_noise_floor(cfg.chip, cfg.timing, 1024, cfg.seed, exec).value();
    const double ratio = s16 / s1024;
    Outcome o;
    o.pass = std::abs(ratio - tol::sqrt_n_ratio) / tol::sqrt_n_ratio <= tol::sqrt_n_rel;
    o.detail = "std(n=16) / std(n=1024) = " + fmt(ratio, 5);
    return o;
}

int run_cli(const std::vector<std::string>& args, std::string& out_text) {
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out;
    std::ostringstream err;
    const int rc = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
    out_text = out.str() + err.str();
    return rc;
}

Outcome capacity() {
    std::string text;
    const int rc = run_cli({"mxbolo", "capacity", "--fmin", "100e6", "--fmax", "1e9", "--spacing", "5e6"}, text);
    Outcome o;
    o.pass = rc == 0 && text == "180\n";
    o.detail = "printed '" + text.substr(0, text.find('\n')) + "', exit " + std::to_string(rc);
    return o;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome determinism() {
    const fs::path base = fs::temp_directory_path() / ("mxbolo-acceptance-" + std::to_string(::getpid()));
    fs::remove_all(base);
    std::string text;
    const int rc1 = run_cli({"mxbolo", "--threads", "1", "--out", (base / "serial").string(), "multiplex"}, text);
    const int rc2 = run_cli({"mxbolo", "--threads", std::to_string(worker_threads() + 2), "--out",
                             (base / "parallel").string(), "multiplex"},
                            text);
    Outcome o{rc1 == 0 && rc2 == 0, ""};
    std::size_t compared = 0;
    std::vector<std::string> differing;
    for (const auto& e : fs::recursive_directory_iterator(base / "serial")) {
        if (!e.is_regular_file() || e.path().filename() == "manifest.json") continue;
        const fs::path rel = fs::relative(e.path(), base / "serial");
        ++compared;
        if (!fs::exists(base / "parallel" / rel) || slurp(e.path()) != slurp(base / "parallel" / rel)) {
            differing.push_back(rel.string());
        }
    }
    std::size_t parallel_files = 0;
    for (const auto& e : fs::recursive_directory_iterator(base / "parallel")) {
        if (e.is_regular_file() && e.path().filename() != "manifest.json") ++parallel_files;
    }
    o.pass = o.pass && differing.empty() && compared > 0 && compared == parallel_files;
    o.detail = std::to_string(compared) + " files compared, " + std::to_string(differing.size()) + " differ";
    fs::remove_all(base);
    return o;
}

Outcome dsp_invariants() {
    const auto t0 = std::chrono::steady_clock::now();
    constexpr double fs_hz = 1e9;
    constexpr std::size_t n = 100000;  // 100 us, 10 kHz bins
    const std::vector<ToneSpec> comb = {
        {FrequencyHz(156.74e6), PowerDbm(-144.0), 0.3},
        {FrequencyHz(179.32e6), PowerDbm(-141.0), 1.1},
        {FrequencyHz(193.79e6), PowerDbm(-147.0), 2.0},
    };
    TimeTrace x = make_probe_comb(comb, FrequencyHz(fs_hz), Seconds(n / fs_hz));
    RandomStream noise = derive_stream(5, {1});
    x = add_noise(x, Volts(1e-7), noise);

    Outcome o{true, ""};
    // Idempotency, bit-exact.
    const TimeTrace once = brickwall_bandpass(x, comb[0].frequency, FrequencyHz(1e6));
    const TimeTrace twice = brickwall_bandpass(once, comb[0].frequency, FrequencyHz(1e6));
    const bool idempotent = once.samples == twice.samples;

    // Passband identity: a bin-aligned tone inside the band survives unchanged.
    const ToneSpec in_band{FrequencyHz(156.74e6), PowerDbm(-140.0), 0.7};
    const TimeTrace tone = make_probe_comb(std::span(&in_band, 1), FrequencyHz(fs_hz), Seconds(n / fs_hz));
    const TimeTrace kept = brickwall_bandpass(tone, in_band.frequency, FrequencyHz(1e6));
    const double a = tone_amplitude(dbm_to_watts(in_band.power)).value();
    double pass_err = 0.0;
    for (std::size_t k = 0; k < n; ++k) pass_err = std::max(pass_err, std::abs(kept.samples[k] - tone.samples[k]) / a);

    // Stopband annihilation: 10 MHz away from a 1 MHz band.
    const TimeTrace gone = brickwall_bandpass(tone, in_band.frequency + FrequencyHz(10e6), FrequencyHz(1e6));
    double stop = 0.0;
    for (double v : gone.samples) stop = std::max(stop, std::abs(v) / a);

    // Comb recovery: each demodulated channel carries a_k / 2.
    const TimeTrace clean_comb = make_probe_comb(comb, FrequencyHz(fs_hz), Seconds(n / fs_hz));
    double comb_err = 0.0;
    for (const auto& c : comb) {
        const IQTrace iq = demodulate(brickwall_bandpass(clean_comb, c.frequency, FrequencyHz(1e6)), c.frequency,
                                      FrequencyHz(1e6), 100);
        const double want = tone_amplitude(dbm_to_watts(c.power)).value() / 2.0;
        for (std::size_t k = iq.size() / 10; k < iq.size() * 9 / 10; ++k) {
            comb_err = std::max(comb_err, std::abs(std::abs(iq.samples[k]) - want) / want);
        }
    }

    // Thermal semigroup: one step of 2 dt equals two steps of dt.
    BolometerParams p;
    p.name = "probe";
    p.f_r0 = FrequencyHz(180e6);
    p.kappa_ext = FrequencyHz(92120);
    p.kappa_int = FrequencyHz(47880);
    p.tau_th = Seconds(8e-6);
    p.g_th = WattsPerKelvin(1e-14);
    p.dfdT = HertzPerKelvin(5e7);
    p.t_bath = Kelvin(0.05);
    double semi = 0.0;
    for (double dt : {1e-8, 1e-7, 3e-6}) {
        for (double t_start : {0.05, 0.06, 0.2}) {
            const BolometerState s0(p, Kelvin(t_start));
            const PowerWatts pw(3e-16);
            const auto one = thermal_step(p, s0, Seconds(2 * dt), pw);
            const auto two = thermal_step(p, thermal_step(p, s0, Seconds(dt), pw), Seconds(dt), pw);
            semi = std::max(semi, std::abs(one.t_e().value() - two.t_e().value()) / one.t_e().value());
        }
    }
    const double t = seconds_since(t0);
    o.pass = idempotent && pass_err < tol::passband && stop < tol::stopband && comb_err < tol::comb_rel &&
             semi < tol::semigroup_rel && t < tol::dsp_suite_s;
    o.detail = std::string("idempotent ") + (idempotent ? "bit-exact" : "NO") + ", passband " + fmt(pass_err, 3) +
               ", stopband " + fmt(stop, 3) + ", comb " + fmt(comb_err, 3) + ", semigroup " + fmt(semi, 3) + "; " +
               fmt(t, 3) + " s";
    return o;
}

}  // namespace

int main() {
    const ExperimentConfig cfg = load_config({});
    struct Criterion {
        const char* name;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria = {
        {"resonance characterization", [&] { return resonance_characterization(cfg); }},
        {"electrothermal feedback", [&] { return electrothermal_feedback(cfg); }},
        {"filter scan", [&] { return filter_scan(cfg); }},
        {"compression pipeline", [&] { return compression_pipeline(cfg); }},
        {"crosstalk arithmetic", [] { return crosstalk_arithmetic(); }},
        {"multiplexed isolation", [&] { return multiplexed_isolation(cfg); }},
        {"time-constant extraction", [&] { return time_constants(cfg); }},
        {"sqrt-N averaging", [&] { return sqrt_n_averaging(cfg); }},
        {"capacity", [] { return capacity(); }},
        {"determinism", [] { return determinism(); }},
        {"dsp invariants", [] { return dsp_invariants(); }},
    };
    int failed = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        Outcome o;
        try {
            o = criteria[k].run();
        } catch (const std::exception& e) {
            o = Outcome{false, std::string("threw: ") + e.what()};
        }
        failed += o.pass ? 0 : 1;
        std::cout << (o.pass ? "PASS" : "FAIL") << " " << std::setw(2) << k + 1 << " " << criteria[k].name << ": "
                  << o.detail << std::endl;
    }
    std::cout << criteria.size() - static_cast<std::size_t>(failed) << "/" << criteria.size() << " criteria passed"
              << std::endl;
    return failed == 0 ? 0 : 1;
}
