#include "mxbolo/cli.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <thread>

#include "mxbolo/config.hpp"
#include "mxbolo/error.hpp"
#include "mxbolo/io.hpp"
#include "mxbolo/svg.hpp"
#include "mxbolo/workflows.hpp"

namespace mxbolo {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string preset;
    unsigned threads = std::max(1u, std::thread::hardware_concurrency());
};

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InvalidArgument("cannot open " + path.string());
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string compact_mhz(FrequencyHz f) {
    std::string label = megahertz_label(f);
    label.erase(std::remove(label.begin(), label.end(), ' '), label.end());
    return label;
}

std::string ghz_label(FrequencyHz f) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << f.value() / 1e9 << "GHz";
    return s.str();
}

std::string trace_file(const ChipConfig& chip, std::size_t i) {
    return chip.bolometers[i].name + "_" + compact_mhz(chip.probes[i].frequency) + ".csv";
}

json metric_json(const ResponseMetric& m) {
    return {{"signal_mean_v", m.signal_mean.value()},
            {"baseline_mean_v", m.baseline_mean.value()},
            {"baseline_std_v", m.baseline_std.value()},
            {"snr", m.snr},
            {"zero_noise", m.zero_noise}};
}

std::string surface_csv(const std::string& corner, const std::vector<std::string>& columns,
                        const std::vector<double>& rows, const std::vector<std::vector<double>>& surface) {
    std::string s = corner;
    for (const auto& c : columns) s += "," + c;
    s += '\n';
    for (std::size_t r = 0; r < rows.size(); ++r) {
        s += format_double(rows[r]);
        for (double v : surface[r]) s += "," + format_double(v);
        s += '\n';
    }
    return s;
}

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

Table read_table(const fs::path& path) {
    std::istringstream in(read_text(path));
    Table t;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ls(line);
        std::string f;
        while (std::getline(ls, f, ',')) fields.push_back(f);
        if (t.header.empty()) {
            t.header = fields;
            continue;
        }
        if (fields.size() != t.header.size()) {
            throw ParseError(line_no, path.string() + ": expected " + std::to_string(t.header.size()) + " columns");
        }
        std::vector<double> row;
        for (const auto& v : fields) row.push_back(parse_double(v, line_no));
        t.rows.push_back(row);
    }
    if (t.header.empty()) {
        throw ParseError(1, path.string() + ": empty table");
    }
    return t;
}

std::vector<fs::path> sorted_entries(const fs::path& dir, const std::string& suffix) {
    std::vector<fs::path> out;
    if (!fs::is_directory(dir)) return out;
    for (const auto& e : fs::directory_iterator(dir)) {
        const std::string name = e.path().filename().string();
        if (suffix.empty() ? e.is_directory() : name.ends_with(suffix)) out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

/// One command's output directory, effective config and manifest.
class Session {
public:
    Session(const Globals& g, const std::string& command)
        : config_(load_config(g.config, ConfigOverrides{g.seed, g.preset.empty() ? std::nullopt
                                                                                 : std::optional(g.preset)})),
          writer_(g.out.empty() ? fs::path("mxbolo-out") / command : fs::path(g.out)) {
        exec_.threads = g.threads;
        manifest_.tool = "mxbolo";
        manifest_.version = kToolVersion;
        manifest_.command = command;
        manifest_.config_hash = config_hash(config_);
        manifest_.seed = config_.seed;
        manifest_.preset = config_.preset;
        manifest_.threads = g.threads;
        manifest_.started_utc = utc_timestamp();
        writer_.write("config.json", json::parse(config_.canonical_json).dump(2) + "\n");
    }

    const ExperimentConfig& config() const { return config_; }
    const ExecutionOptions& exec() const { return exec_; }
    ResultWriter& writer() { return writer_; }
    void finish() { writer_.finish(manifest_); }

private:
    ExperimentConfig config_;
    ExecutionOptions exec_;
    ResultWriter writer_;
    RunManifest manifest_;
};

void write_run(Session& s, const MultiplexRun& run) {
    const ChipConfig& chip = s.config().chip;
    const std::string dir = "runs/" + pattern_to_label(run.pattern) + "/";
    json channels = json::array();
    for (std::size_t i = 0; i < chip.size(); ++i) {
        const std::string file = trace_file(chip, i);
        s.writer().write_trace(dir + file, run.traces[i]);
        json c = metric_json(run.metrics[i]);
        c["name"] = chip.bolometers[i].name;
        c["probe_frequency_hz"] = run.probe_frequencies[i].value();
        c["trace"] = file;
        channels.push_back(c);
    }
    const json doc{{"pattern", pattern_to_label(run.pattern)}, {"channels", channels}};
    s.writer().write(dir + "metrics.json", doc.dump(2) + "\n");
}

json snr_table_json(const SnrTable& t) {
    json cols = json::array();
    for (std::size_t c = 0; c < t.probe_frequencies.size(); ++c) {
        cols.push_back({{"label", t.column_label(c)}, {"probe_frequency_hz", t.probe_frequencies[c].value()}});
    }
    json rows = json::array();
    for (std::size_t r = 0; r < t.values.size(); ++r) {
        json flags = json::array();
        for (bool z : t.zero_noise[r]) flags.push_back(z);
        rows.push_back({{"label", t.row_labels[r]}, {"values", t.values[r]}, {"zero_noise", flags}});
    }
    return {{"columns", cols}, {"rows", rows}};
}

void print_snr_table(std::ostream& out, const SnrTable& t) {
    out << std::left << std::setw(22) << "";
    for (std::size_t c = 0; c < t.probe_frequencies.size(); ++c) out << std::right << std::setw(10) << t.column_label(c);
    out << '\n';
    for (std::size_t r = 0; r < t.values.size(); ++r) {
        out << std::left << std::setw(22) << t.row_labels[r];
        for (double v : t.values[r]) out << std::right << std::setw(10) << std::fixed << std::setprecision(2) << v;
        out << '\n';
    }
}

int cmd_characterize(const Globals& g, std::ostream& out) {
    Session s(g, "characterize");
    const auto& cfg = s.config();
    json channels = json::array();
    for (std::size_t i = 0; i < cfg.chip.size(); ++i) {
        const BolometerParams& p = cfg.chip.bolometers[i];
        const Characterization c = characterize_channel(cfg.chip, i, cfg.sweeps.characterize_powers,
                                                        cfg.sweeps.characterize_half_span,
                                                        cfg.sweeps.characterize_step, s.exec());
        std::vector<std::string> cols;
        for (FrequencyHz f : c.sweep.frequencies) cols.push_back(format_double(f.value()));
        std::vector<double> rows;
        for (PowerDbm pw : c.sweep.powers) rows.push_back(pw.value());
        s.writer().write("sweeps/" + p.name + "_probe_sweep.csv", surface_csv("power_dbm", cols, rows, c.sweep.surface));

        json fit_rows = json::array();
        for (std::size_t r = 0; r < c.rows.size(); ++r) {
            const auto& row = c.rows[r];
            const auto flagged = static_cast<std::size_t>(
                std::count(c.sweep.flagged[r].begin(), c.sweep.flagged[r].end(), true));
            json j{{"power_dbm", row.power.value()}, {"flagged_cells", flagged}};
            if (row.fit) {
                j["f_r_hz"] = row.fit->f_r.value();
                j["fwhm_hz"] = row.fit->fwhm.value();
                j["depth"] = row.fit->depth;
                j["offset"] = row.fit->offset;
                j["sigma_f_r_hz"] = row.fit->sigma_f_r.value();
                j["sigma_fwhm_hz"] = row.fit->sigma_fwhm.value();
            } else {
                j["error"] = row.error;
            }
            fit_rows.push_back(j);
        }
        json ch{{"name", p.name},
                {"configured_f_r0_hz", p.f_r0.value()},
                {"configured_linewidth_hz", p.linewidth().value()},
                {"fits", fit_rows}};
        out << p.name << ":";
        if (c.f_r0) {
            ch["f_r0_hz"] = c.f_r0->value();
            ch["linewidth_hz"] = c.linewidth->value();
            out << std::fixed << std::setprecision(4) << " f_r0 " << c.f_r0->value() / 1e6 << " MHz (configured "
                << p.f_r0.value() / 1e6 << "), linewidth " << c.linewidth->value() / 1e6 << " MHz (configured "
                << p.linewidth().value() / 1e6 << ")";
        } else {
            out << " lowest-power fit failed: " << c.rows.front().error;
        }
        out << '\n';
        for (const auto& row : c.rows) {
            out << "  " << std::setw(8) << std::setprecision(1) << row.power.value() << " dBm  ";
            if (row.fit) {
                out << "dip " << std::setprecision(4) << row.fit->f_r.value() / 1e6 << " MHz\n";
            } else {
                out << row.error << '\n';
            }
        }
        channels.push_back(ch);
    }
    s.writer().write("characterize.json", json{{"channels", channels}}.dump(2) + "\n");
    s.finish();
    return 0;
}

int cmd_filterscan(const Globals& g, std::ostream& out) {
    Session s(g, "filterscan");
    const auto& cfg = s.config();
    json channels = json::array();
    for (std::size_t i = 0; i < cfg.chip.size(); ++i) {
        const BolometerParams& p = cfg.chip.bolometers[i];
        const FilterScan f = filterscan_channel(cfg.chip, i, cfg.sweeps.filterscan_power,
                                                cfg.sweeps.filterscan_half_span, cfg.sweeps.filterscan_step, s.exec());
        std::string csv = "heater_frequency_hz,delta_gamma,normalized\n";
        for (std::size_t k = 0; k < f.sweep.frequencies.size(); ++k) {
            csv += format_double(f.sweep.frequencies[k].value()) + "," + format_double(f.sweep.surface[0][k]) + "," +
                   format_double(f.sweep.normalized[0][k]) + "\n";
        }
        s.writer().write("sweeps/" + p.name + "_filter_scan.csv", csv);
        const FilterParams& filter = cfg.chip.filters[cfg.chip.channel_map[i]];
        json ch{{"name", p.name},
                {"filter_center_hz", filter.f_center.value()},
                {"filter_fwhm_hz", filter.fwhm.value()},
                {"grid_peak_hz", f.grid_peak.value()}};
        out << p.name << ": peak " << std::fixed << std::setprecision(3) << f.grid_peak.value() / 1e9 << " GHz";
        if (f.shape) {
            ch["center_hz"] = f.shape->center.value();
            ch["fwhm_hz"] = f.shape->fwhm.value();
            out << ", FWHM " << std::setprecision(1) << f.shape->fwhm.value() / 1e6 << " MHz";
        } else {
            ch["error"] = f.error;
            out << ", FWHM unavailable: " << f.error;
        }
        out << " (filter " << std::setprecision(3) << filter.f_center.value() / 1e9 << " GHz)\n";
        channels.push_back(ch);
    }
    s.writer().write("filterscan.json", json{{"channels", channels}}.dump(2) + "\n");
    s.finish();
    return 0;
}

json compression_json(const PowerSweepAnalysis& a, const ChipConfig& chip) {
    json fits = json::array();
    for (std::size_t i = 0; i < chip.size(); ++i) {
        for (std::size_t j = 0; j < chip.size(); ++j) {
            json e{{"bolometer", chip.bolometers[i].name}, {"filter_center_hz", chip.filters[j].f_center.value()},
                   {"matched", chip.channel_map[i] == j}};
            if (a.fits[i][j]) {
                const auto& f = *a.fits[i][j];
                e["gain_v_per_w"] = f.gain;
                e["p_sat_w"] = f.p_sat.value();
                e["p_1db_dbm"] = f.p_1db.value();
                e["sigma_p_1db_db"] = f.sigma_p_1db.value();
            } else {
                e["error"] = a.errors[i][j];
            }
            fits.push_back(e);
        }
    }
    return fits;
}

int cmd_powersweep(const Globals& g, std::ostream& out) {
    Session s(g, "powersweep");
    const auto& cfg = s.config();
    const auto powers = power_grid(cfg.sweeps.powersweep_min, cfg.sweeps.powersweep_max, cfg.sweeps.powersweep_step);
    const PowerSweepAnalysis a =
        powersweep_chip(cfg.chip, powers, cfg.timing, cfg.dsp, cfg.sweeps.powersweep_n_avg, cfg.seed, s.exec());
    std::vector<std::string> names;
    for (const auto& b : cfg.chip.bolometers) names.push_back(b.name);
    std::vector<double> rows;
    for (PowerDbm p : powers) rows.push_back(p.value());
    for (std::size_t j = 0; j < cfg.chip.size(); ++j) {
        std::vector<std::vector<double>> by_power(powers.size(), std::vector<double>(cfg.chip.size()));
        for (std::size_t i = 0; i < cfg.chip.size(); ++i) {
            for (std::size_t k = 0; k < powers.size(); ++k) by_power[k][i] = a.sweeps[j].surface[i][k];
        }
        s.writer().write("sweeps/heater_" + ghz_label(cfg.chip.filters[j].f_center) + ".csv",
                         surface_csv("power_dbm", names, rows, by_power));
    }
    std::string xt = "bolometer";
    for (const auto& f : cfg.chip.filters) xt += "," + ghz_label(f.f_center);
    xt += '\n';
    out << "P1dB (dBm), rows bolometers, columns heater filters\n" << std::setw(8) << "";
    for (const auto& f : cfg.chip.filters) out << std::setw(10) << ghz_label(f.f_center);
    out << '\n';
    for (std::size_t i = 0; i < cfg.chip.size(); ++i) {
        out << std::setw(8) << std::left << names[i] << std::right;
        xt += names[i];
        for (std::size_t j = 0; j < cfg.chip.size(); ++j) {
            if (a.p_1db[i][j]) {
                out << std::setw(10) << std::fixed << std::setprecision(1) << a.p_1db[i][j]->value();
            } else {
                out << std::setw(10) << "n/a";
            }
            xt += ",";
            if (a.crosstalk && a.crosstalk->values[i][j]) xt += format_double(a.crosstalk->values[i][j]->value());
        }
        xt += '\n';
        out << '\n';
    }
    if (a.crosstalk) {
        out << "crosstalk (row-wise) from " << std::setprecision(1) << a.crosstalk->row_min.value() << " to "
            << a.crosstalk->row_max.value() << " dB\n";
    } else {
        out << "crosstalk unavailable: " << a.crosstalk_error << '\n';
    }
    json doc{{"fits", compression_json(a, cfg.chip)}};
    if (!a.crosstalk_error.empty()) doc["crosstalk_error"] = a.crosstalk_error;
    s.writer().write("compression.json", doc.dump(2) + "\n");
    s.writer().write("crosstalk.csv", xt);
    s.finish();
    return 0;
}

int cmd_trigger(const Globals& g, const std::string& label, std::ostream& out) {
    const TriggerPattern pattern = pattern_from_label(label);
    Session s(g, "trigger");
    const auto& cfg = s.config();
    if (pattern.size() != cfg.chip.size()) {
        throw InvalidArgument("pattern '" + label + "' has " + std::to_string(pattern.size()) + " bits; the chip has " +
                              std::to_string(cfg.chip.size()) + " channels");
    }
    const MultiplexRun run = run_trigger(cfg.chip, pattern, cfg.heater_power, cfg.timing, cfg.dsp, cfg.n_avg, cfg.seed,
                                         s.exec());
    write_run(s, run);
    for (std::size_t i = 0; i < cfg.chip.size(); ++i) {
        out << megahertz_label(run.probe_frequencies[i]) << ": snr " << std::fixed << std::setprecision(2)
            << run.metrics[i].snr << (run.metrics[i].zero_noise ? " (zero noise)" : "") << '\n';
    }
    s.finish();
    return 0;
}

int cmd_multiplex(const Globals& g, std::ostream& out) {
    Session s(g, "multiplex");
    const auto& cfg = s.config();
    const auto runs = run_full_multiplex(cfg.chip, cfg.heater_power, cfg.timing, cfg.dsp, cfg.n_avg, cfg.seed, s.exec());
    for (const auto& run : runs) write_run(s, run);
    const SnrTable table = snr_table(runs);
    s.writer().write("snr_table.csv", snr_table_to_csv(table));
    s.writer().write("snr_table.json", snr_table_json(table).dump(2) + "\n");
    print_snr_table(out, table);
    s.finish();
    return 0;
}

int cmd_calibrate(const Globals& g, std::ostream& out) {
    Session s(g, "calibrate");
    const auto& cfg = s.config();
    const CalibrationResult r = calibrate_chip(cfg.chip, cfg.calibration, cfg.timing, cfg.dsp, s.exec());
    json channels = json::array();
    for (const auto& c : r.report.channels) {
        channels.push_back({{"name", c.name},
                            {"probe_frequency_hz", c.probe_frequency.value()},
                            {"dfdT_hz_per_k", c.dfdT.value()},
                            {"shift_linewidths", c.shift_linewidths},
                            {"loop_gain", c.loop_gain},
                            {"matched_snr", c.matched_snr}});
        out << c.name << ": probe " << std::fixed << std::setprecision(2) << c.probe_frequency.value() / 1e6
            << " MHz, dfdT " << std::scientific << std::setprecision(4) << c.dfdT.value() << " Hz/K, shift "
            << std::fixed << std::setprecision(3) << c.shift_linewidths << " linewidths, loop gain " << c.loop_gain
            << ", matched SNR " << std::setprecision(2) << c.matched_snr << '\n';
    }
    out << "noise sigma " << std::scientific << std::setprecision(6) << r.report.noise_sigma.value() << " V, mean SNR "
        << std::fixed << std::setprecision(3) << r.report.mean_snr << '\n';
    const json report{{"channels", channels},
                      {"noise_sigma_v", r.report.noise_sigma.value()},
                      {"mean_snr", r.report.mean_snr},
                      {"calibration_seed", cfg.calibration.seed},
                      {"calibration_n_avg", cfg.calibration.n_avg}};
    s.writer().write("calibration.json", report.dump(2) + "\n");
    s.writer().write("calibrated_config.json", calibrated_config_json(cfg, r));
    s.finish();
    return 0;
}

void require_verified(const fs::path& dir, std::ostream& err) {
    const auto problems = verify_manifest(dir);
    if (!problems.empty()) {
        for (const auto& p : problems) err << "verify: " << p << '\n';
        throw InvalidArgument("result directory " + dir.string() + " failed manifest verification");
    }
}

RunManifest derived_manifest(const std::string& command, const ExperimentConfig& cfg, unsigned threads) {
    RunManifest m;
    m.tool = "mxbolo";
    m.version = kToolVersion;
    m.command = command;
    m.config_hash = config_hash(cfg);
    m.seed = cfg.seed;
    m.preset = cfg.preset;
    m.threads = threads;
    m.started_utc = utc_timestamp();
    return m;
}

int cmd_analyze(const Globals& g, const fs::path& dir, std::ostream& out, std::ostream& err) {
    require_verified(dir, err);
    const ExperimentConfig cfg = parse_config(read_text(dir / "config.json"));
    ExecutionOptions exec;
    exec.threads = g.threads;
    ResultWriter w(dir / "analysis");
    RunManifest manifest = derived_manifest("analyze", cfg, g.threads);

    std::vector<MultiplexRun> runs;
    json taus = json::array();
    const auto ops = operating_points(cfg.chip, exec);
    for (const auto& run_dir : sorted_entries(dir / "runs", "")) {
        const json stored = json::parse(read_text(run_dir / "metrics.json"));
        MultiplexRun run;
        run.pattern = pattern_from_label(stored.at("pattern").get<std::string>());
        json channels = json::array();
        for (const auto& c : stored.at("channels")) {
            IQTrace iq = read_iq_trace(run_dir / c.at("trace").get<std::string>());
            const ResponseMetric m = response_metric(iq, cfg.timing.baseline, cfg.timing.signal);
            json j = metric_json(m);
            j["name"] = c.at("name");
            j["stored_snr"] = c.at("snr");
            channels.push_back(j);
            run.probe_frequencies.push_back(FrequencyHz(c.at("probe_frequency_hz").get<double>()));
            run.traces.push_back(std::move(iq));
            run.metrics.push_back(m);
        }
        const std::string label = pattern_to_label(run.pattern);
        w.write("runs/" + label + "/metrics.json", json{{"pattern", label}, {"channels", channels}}.dump(2) + "\n");
        if (std::count(run.pattern.bits.begin(), run.pattern.bits.end(), true) == 1) {
            const auto ch = static_cast<std::size_t>(
                std::find(run.pattern.bits.begin(), run.pattern.bits.end(), true) - run.pattern.bits.begin());
            const BolometerParams& p = cfg.chip.bolometers[ch];
            const double l = loop_gain(p, ops[ch], cfg.chip.probes[ch].frequency, dbm_to_watts(cfg.chip.probes[ch].power));
            json t{{"pattern", label}, {"name", p.name}, {"configured_tau_s", p.tau_th.value()}};
            try {
                const auto tc = extract_time_constant(run.traces[ch], cfg.timing, l, cfg.sweeps.time_constant_settle);
                t["tau_fit_s"] = tc.fit.tau.value();
                t["sigma_tau_fit_s"] = tc.fit.sigma_tau.value();
                t["loop_gain"] = tc.loop_gain;
                t["tau_thermal_s"] = tc.tau_thermal.value();
                out << p.name << ": tau " << std::fixed << std::setprecision(2) << tc.tau_thermal.value() * 1e6
                    << " us (fit " << tc.fit.tau.value() * 1e6 << " us, loop gain " << std::setprecision(3)
                    << tc.loop_gain << ", configured " << std::setprecision(2) << p.tau_th.value() * 1e6 << " us)\n";
            } catch (const FitError& e) {
                t["error"] = e.what();
                out << p.name << ": tau fit failed: " << e.what() << '\n';
            }
            taus.push_back(t);
        }
        runs.push_back(std::move(run));
    }
    if (!taus.empty()) w.write("time_constants.json", json{{"fits", taus}}.dump(2) + "\n");
    if (!runs.empty() && runs.size() == (std::size_t{1} << cfg.chip.size())) {
        const SnrTable table = snr_table(runs);
        w.write("snr_table.csv", snr_table_to_csv(table));
        print_snr_table(out, table);
    }

    json resonance = json::array();
    for (const auto& path : sorted_entries(dir / "sweeps", "_probe_sweep.csv")) {
        const Table t = read_table(path);
        std::vector<FrequencyHz> freqs;
        for (std::size_t c = 1; c < t.header.size(); ++c) freqs.emplace_back(parse_double(t.header[c], 1));
        json rows = json::array();
        for (const auto& row : t.rows) {
            std::vector<FrequencyHz> f;
            std::vector<double> y;
            for (std::size_t c = 1; c < row.size(); ++c) {
                if (std::isfinite(row[c])) {
                    f.push_back(freqs[c - 1]);
                    y.push_back(row[c] * row[c]);
                }
            }
            json j{{"power_dbm", row[0]}};
            try {
                const auto fit = fit_lorentzian(f, y);
                j["f_r_hz"] = fit.f_r.value();
                j["fwhm_hz"] = fit.fwhm.value();
            } catch (const FitError& e) {
                j["error"] = e.what();
            }
            rows.push_back(j);
        }
        resonance.push_back({{"file", path.filename().string()}, {"fits", rows}});
    }
    if (!resonance.empty()) w.write("resonance_fits.json", json{{"sweeps", resonance}}.dump(2) + "\n");

    json compression = json::array();
    for (const auto& path : sorted_entries(dir / "sweeps", ".csv")) {
        if (!path.filename().string().starts_with("heater_")) continue;
        const Table t = read_table(path);
        std::vector<PowerDbm> powers;
        for (const auto& row : t.rows) powers.emplace_back(row[0]);
        for (std::size_t c = 1; c < t.header.size(); ++c) {
            std::vector<double> r;
            for (const auto& row : t.rows) r.push_back(row[c]);
            json j{{"file", path.filename().string()}, {"bolometer", t.header[c]}};
            try {
                const auto fit = fit_compression(powers, r);
                j["p_1db_dbm"] = fit.p_1db.value();
                j["p_sat_w"] = fit.p_sat.value();
            } catch (const FitError& e) {
                j["error"] = e.what();
            }
            compression.push_back(j);
        }
    }
    if (!compression.empty()) w.write("compression.json", json{{"fits", compression}}.dump(2) + "\n");
    w.finish(manifest);
    out << "analysis written to " << (dir / "analysis").string() << '\n';
    return 0;
}

int cmd_report(const Globals& g, const fs::path& dir, bool svg, std::ostream& out, std::ostream& err) {
    require_verified(dir, err);
    const ExperimentConfig cfg = parse_config(read_text(dir / "config.json"));
    ResultWriter w(dir / "report");
    RunManifest manifest = derived_manifest("report", cfg, g.threads);

    for (const auto& run_dir : sorted_entries(dir / "runs", "")) {
        const json stored = json::parse(read_text(run_dir / "metrics.json"));
        const std::string label = stored.at("pattern");
        std::vector<Series> series;
        std::string csv = "time_us";
        std::vector<std::vector<double>> mags;
        std::vector<double> t_us;
        for (const auto& c : stored.at("channels")) {
            const IQTrace iq = read_iq_trace(run_dir / c.at("trace").get<std::string>());
            csv += "," + megahertz_label(FrequencyHz(c.at("probe_frequency_hz").get<double>()));
            if (t_us.empty()) {
                for (std::size_t k = 0; k < iq.size(); ++k) t_us.push_back(iq.time_at(k).value() * 1e6);
            }
            mags.push_back(iq.magnitude());
            series.push_back(Series{megahertz_label(FrequencyHz(c.at("probe_frequency_hz").get<double>())), t_us,
                                    mags.back()});
        }
        csv += '\n';
        for (std::size_t k = 0; k < t_us.size(); ++k) {
            csv += format_double(t_us[k]);
            for (const auto& m : mags) csv += "," + format_double(m[k]);
            csv += '\n';
        }
        w.write("traces_" + label + ".csv", csv);
        if (svg) {
            w.write("traces_" + label + ".svg", line_plot_svg("pattern " + label, "time (us)", "|IQ| (V)", series));
        }
    }

    const fs::path table_path =
        fs::exists(dir / "analysis" / "snr_table.csv") ? dir / "analysis" / "snr_table.csv" : dir / "snr_table.csv";
    if (fs::exists(table_path)) {
        const SnrTable t = snr_table_from_csv(read_text(table_path));
        std::ostringstream s;
        s << "row";
        for (std::size_t c = 0; c < t.probe_frequencies.size(); ++c) s << "," << t.column_label(c);
        s << '\n';
        for (std::size_t r = 0; r < t.values.size(); ++r) {
            s << t.row_labels[r];
            for (double v : t.values[r]) s << "," << std::fixed << std::setprecision(2) << v;
            s << '\n';
        }
        w.write("snr_table.csv", s.str());
    }

    for (const auto& path : sorted_entries(dir / "sweeps", "_probe_sweep.csv")) {
        const Table t = read_table(path);
        const std::string stem = path.stem().string();
        std::vector<double> f_mhz;
        for (std::size_t c = 1; c < t.header.size(); ++c) f_mhz.push_back(parse_double(t.header[c], 1) / 1e6);
        std::vector<double> powers;
        std::vector<std::vector<double>> norm;
        std::string csv = "power_dbm,frequency_mhz,normalized\n";
        for (const auto& row : t.rows) {
            powers.push_back(row[0]);
            double lo = std::numeric_limits<double>::infinity();
            double hi = -lo;
            for (std::size_t c = 1; c < row.size(); ++c) {
                if (std::isfinite(row[c])) {
                    lo = std::min(lo, row[c]);
                    hi = std::max(hi, row[c]);
                }
            }
            std::vector<double> n;
            for (std::size_t c = 1; c < row.size(); ++c) {
                n.push_back(hi > lo ? (row[c] - lo) / (hi - lo) : 0.0);
                csv += format_double(row[0]) + "," + format_double(f_mhz[c - 1]) + "," + format_double(n.back()) + "\n";
            }
            norm.push_back(n);
        }
        w.write(stem + ".csv", csv);
        if (svg) {
            w.write(stem + ".svg", heatmap_svg(stem, "probe frequency (MHz)", "probe power (dBm)", f_mhz, powers, norm));
        }
    }
    for (const auto& path : sorted_entries(dir / "sweeps", "_filter_scan.csv")) {
        const Table t = read_table(path);
        const std::string stem = path.stem().string();
        Series s{stem, {}, {}};
        std::string csv = "frequency_ghz,normalized\n";
        for (const auto& row : t.rows) {
            s.x.push_back(row[0] / 1e9);
            s.y.push_back(row[2]);
            csv += format_double(row[0] / 1e9) + "," + format_double(row[2]) + "\n";
        }
        w.write(stem + ".csv", csv);
        if (svg) w.write(stem + ".svg", line_plot_svg(stem, "heater frequency (GHz)", "normalized response", {s}));
    }
    for (const auto& path : sorted_entries(dir / "sweeps", ".csv")) {
        if (!path.filename().string().starts_with("heater_")) continue;
        const Table t = read_table(path);
        const std::string stem = path.stem().string();
        std::vector<Series> series;
        for (std::size_t c = 1; c < t.header.size(); ++c) {
            Series s{t.header[c], {}, {}};
            for (const auto& row : t.rows) {
                s.x.push_back(row[0]);
                s.y.push_back(row[c]);
            }
            series.push_back(s);
        }
        w.write(stem + ".csv", read_text(path));
        if (svg) w.write(stem + ".svg", line_plot_svg(stem, "heater power (dBm)", "response (V)", series));
    }
    w.finish(manifest);
    out << "report written to " << (dir / "report").string() << '\n';
    return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Simulated frequency-multiplexed bolometer readout", "mxbolo"};
    app.set_version_flag("--version", kToolVersion);
    app.fallthrough();
    app.require_subcommand(1);

    Globals g;
    app.add_option("--config", g.config, "JSON config merged over the shipped default");
    app.add_option("--seed", g.seed, "Master seed");
    app.add_option("--out", g.out, "Output directory");
    app.add_option("--preset", g.preset, "Preset name (desk, paper, fig3, ...)");
    app.add_option("--threads", g.threads, "Worker threads for averaging")->check(CLI::PositiveNumber);

    auto* characterize = app.add_subcommand("characterize", "Probe sweeps and resonance fits");
    auto* filterscan = app.add_subcommand("filterscan", "Heater-frequency sweeps of every channel");
    auto* powersweep = app.add_subcommand("powersweep", "Heater-power sweeps, compression fits and crosstalk");
    auto* trigger = app.add_subcommand("trigger", "One multiplexed trigger experiment");
    std::string pattern;
    trigger->add_option("--pattern", pattern, "Heater bits, lowest probe frequency first")->required();
    auto* multiplex = app.add_subcommand("multiplex", "Every trigger pattern and the SNR table");
    auto* analyze = app.add_subcommand("analyze", "Verify a result directory and recompute its metrics and fits");
    std::string analyze_dir;
    analyze->add_option("dir", analyze_dir, "Result directory")->required();
    auto* report = app.add_subcommand("report", "Emit plot-ready tables (and SVG) for a result directory");
    std::string report_dir;
    bool svg = false;
    report->add_option("dir", report_dir, "Result directory")->required();
    report->add_flag("--svg", svg, "Also render SVG plots");
    auto* calibrate = app.add_subcommand("calibrate", "Calibrate dfdT, probe placement and noise");
    auto* capacity = app.add_subcommand("capacity", "Channel count fitting a probe band");
    double fmin = 0.0;
    double fmax = 0.0;
    double spacing = 0.0;
    capacity->add_option("--fmin", fmin, "Lowest probe frequency (Hz)")->required();
    capacity->add_option("--fmax", fmax, "Highest probe frequency (Hz)")->required();
    capacity->add_option("--spacing", spacing, "Channel spacing (Hz)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << kToolVersion << '\n';
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 1;
    }

    try {
        if (characterize->parsed()) return cmd_characterize(g, out);
        if (filterscan->parsed()) return cmd_filterscan(g, out);
        if (powersweep->parsed()) return cmd_powersweep(g, out);
        if (trigger->parsed()) return cmd_trigger(g, pattern, out);
        if (multiplex->parsed()) return cmd_multiplex(g, out);
        if (analyze->parsed()) return cmd_analyze(g, analyze_dir, out, err);
        if (report->parsed()) return cmd_report(g, report_dir, svg, out, err);
        if (calibrate->parsed()) return cmd_calibrate(g, out);
        if (capacity->parsed()) {
            out << capacity_estimate(FrequencyHz(fmin), FrequencyHz(fmax), FrequencyHz(spacing)) << '\n';
            return 0;
        }
    } catch (const UserError& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "failed: " << e.what() << '\n';
        return 2;
    }
    return 1;
}

}  // namespace mxbolo
