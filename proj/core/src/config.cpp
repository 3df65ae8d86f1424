#include "mxbolo/config.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

#include "default_config.hpp"
#include "mxbolo/error.hpp"
#include "mxbolo/io.hpp"

namespace mxbolo {
namespace {

using nlohmann::json;

std::string join(const std::string& pointer, const std::string& key) {
    std::string escaped;
    for (char c : key) {
        if (c == '~') {
            escaped += "~0";
        } else if (c == '/') {
            escaped += "~1";
        } else {
            escaped += c;
        }
    }
    return pointer + "/" + escaped;
}

std::string show(double v) {
    std::ostringstream s;
    s << v;
    return s.str();
}

// Interpreter for the schema keywords the published schema uses.
void validate_node(const json& value, const json& schema, const std::string& ptr) {
    const std::string where = ptr.empty() ? "/" : ptr;
    if (schema.contains("type")) {
        const std::string type = schema["type"];
        bool ok = false;
        if (type == "object") ok = value.is_object();
        else if (type == "array") ok = value.is_array();
        else if (type == "string") ok = value.is_string();
        else if (type == "boolean") ok = value.is_boolean();
        else if (type == "number") ok = value.is_number();
        else if (type == "integer") ok = value.is_number_integer() ||
                                         (value.is_number_float() && std::floor(value.get<double>()) == value.get<double>());
        if (!ok) {
            throw SchemaError(where, "expected " + type);
        }
    }
    if (value.is_number()) {
        const double v = value.get<double>();
        if (!std::isfinite(v)) {
            throw SchemaError(where, "must be finite");
        }
        if (schema.contains("minimum") && v < schema["minimum"].get<double>()) {
            throw SchemaError(where, "must be >= " + show(schema["minimum"].get<double>()));
        }
        if (schema.contains("exclusiveMinimum") && !(v > schema["exclusiveMinimum"].get<double>())) {
            throw SchemaError(where, "must be > " + show(schema["exclusiveMinimum"].get<double>()));
        }
        if (schema.contains("maximum") && v > schema["maximum"].get<double>()) {
            throw SchemaError(where, "must be <= " + show(schema["maximum"].get<double>()));
        }
    }
    if (value.is_string() && schema.contains("minLength") &&
        value.get<std::string>().size() < schema["minLength"].get<std::size_t>()) {
        throw SchemaError(where, "string too short");
    }
    if (value.is_array()) {
        if (schema.contains("minItems") && value.size() < schema["minItems"].get<std::size_t>()) {
            throw SchemaError(where, "needs at least " + schema["minItems"].dump() + " items");
        }
        if (schema.contains("maxItems") && value.size() > schema["maxItems"].get<std::size_t>()) {
            throw SchemaError(where, "allows at most " + schema["maxItems"].dump() + " items");
        }
        if (schema.contains("items")) {
            for (std::size_t i = 0; i < value.size(); ++i) {
                validate_node(value[i], schema["items"], ptr + "/" + std::to_string(i));
            }
        }
    }
    if (value.is_object()) {
        if (schema.contains("required")) {
            for (const auto& key : schema["required"]) {
                if (!value.contains(key.get<std::string>())) {
                    throw SchemaError(join(ptr, key.get<std::string>()), "required field missing");
                }
            }
        }
        const json props = schema.value("properties", json::object());
        for (const auto& [key, child] : value.items()) {
            if (props.contains(key)) {
                validate_node(child, props[key], join(ptr, key));
            } else if (schema.contains("additionalProperties")) {
                const json& extra = schema["additionalProperties"];
                if (extra.is_boolean()) {
                    if (!extra.get<bool>()) {
                        throw SchemaError(join(ptr, key), "unknown key");
                    }
                } else {
                    validate_node(child, extra, join(ptr, key));
                }
            }
        }
    }
}

const json& schema_document() {
    static const json schema = json::parse(detail::kConfigSchemaJson);
    return schema;
}

double num(const json& j, const char* key) { return j.at(key).get<double>(); }

TimeWindow window(const json& j) { return TimeWindow{Seconds(j.at(0).get<double>()), Seconds(j.at(1).get<double>())}; }

/// Invariants that span several fields.
void check_cross_field(const json& doc) {
    const json& chip = doc["chip"];
    const std::size_t n = chip["bolometers"].size();
    for (const char* key : {"probes", "filters", "channel_map"}) {
        if (chip[key].size() != n) {
            throw SchemaError(std::string("/chip/") + key,
                              "must have one entry per bolometer (" + std::to_string(n) + ")");
        }
    }
    std::vector<bool> used(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        const auto j = chip["channel_map"][i].get<std::size_t>();
        if (j >= n || used[j]) {
            throw SchemaError("/chip/channel_map/" + std::to_string(i), "channel_map must be a bijection onto filters");
        }
        used[j] = true;
    }
    for (std::size_t i = 1; i < n; ++i) {
        if (!(num(chip["probes"][i], "frequency_hz") > num(chip["probes"][i - 1], "frequency_hz"))) {
            throw SchemaError("/chip/probes/" + std::to_string(i) + "/frequency_hz",
                              "probe tones must ascend in frequency");
        }
    }
    if (chip.contains("floor_matrix_db")) {
        const json& m = chip["floor_matrix_db"];
        if (m.size() != n) {
            throw SchemaError("/chip/floor_matrix_db", "needs one row per bolometer");
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (m[i].size() != n) {
                throw SchemaError("/chip/floor_matrix_db/" + std::to_string(i), "needs one column per filter");
            }
        }
    }
    const std::string preset = doc["preset"];
    if (!doc["presets"].contains(preset)) {
        throw SchemaError("/preset", "unknown preset '" + preset + "'");
    }
    const auto& t = doc["timing"];
    for (const char* key : {"baseline_window_s", "signal_window_s"}) {
        if (!(t[key][0].get<double>() < t[key][1].get<double>())) {
            throw SchemaError(std::string("/timing/") + key, "window end must follow its start");
        }
    }
    const auto& ps = doc["experiments"]["powersweep"];
    if (!(num(ps, "max_dbm") > num(ps, "min_dbm"))) {
        throw SchemaError("/experiments/powersweep/max_dbm", "must exceed min_dbm");
    }
}

ExperimentConfig resolve(const json& doc) {
    ExperimentConfig c;
    const json& chip = doc["chip"];
    for (const auto& b : chip["bolometers"]) {
        BolometerParams p;
        p.name = b["name"];
        p.f_r0 = FrequencyHz(num(b, "f_r0_hz"));
        p.kappa_ext = FrequencyHz(num(b, "kappa_ext_hz"));
        p.kappa_int = FrequencyHz(num(b, "kappa_int_hz"));
        p.tau_th = Seconds(num(b, "tau_th_s"));
        p.g_th = WattsPerKelvin(num(b, "g_th_w_per_k"));
        p.dfdT = HertzPerKelvin(num(b, "dfdT_hz_per_k"));
        p.t_bath = Kelvin(num(b, "t_bath_k"));
        p.p_nonlinear = PowerDbm(num(b, "p_nonlinear_dbm"));
        c.chip.bolometers.push_back(p);
    }
    for (const auto& t : chip["probes"]) {
        c.chip.probes.push_back(
            ToneSpec{FrequencyHz(num(t, "frequency_hz")), PowerDbm(num(t, "power_dbm")), t.value("phase_rad", 0.0)});
    }
    for (const auto& f : chip["filters"]) {
        FilterParams fp;
        fp.f_center = FrequencyHz(num(f, "f_center_hz"));
        fp.fwhm = FrequencyHz(num(f, "fwhm_hz"));
        fp.insertion_loss = Decibels(f.value("insertion_loss_db", 0.0));
        fp.stopband_floor = Decibels(f.value("stopband_floor_db", -17.9));
        c.chip.filters.push_back(fp);
    }
    for (const auto& j : chip["channel_map"]) c.chip.channel_map.push_back(j.get<std::size_t>());
    if (chip.contains("floor_matrix_db")) {
        std::vector<std::vector<Decibels>> m;
        for (const auto& row : chip["floor_matrix_db"]) {
            std::vector<Decibels> r;
            for (const auto& v : row) r.emplace_back(v.get<double>());
            m.push_back(r);
        }
        c.chip.floor_matrix = m;
    }
    c.chip.line_attenuation = Decibels(num(chip, "line_attenuation_db"));

    c.preset = doc["preset"];
    const json& preset = doc["presets"][c.preset];
    c.chip.sample_rate = FrequencyHz(num(preset, "sample_rate_hz"));
    c.chip.noise_sigma = Volts(num(preset, "noise_sigma_v"));
    c.n_avg = preset["n_avg"].get<std::size_t>();

    const json& t = doc["timing"];
    c.timing.record = Seconds(preset.value("record_s", num(t, "record_s")));
    c.timing.pulse_start = Seconds(num(t, "pulse_start_s"));
    c.timing.pulse_duration = Seconds(preset.value("pulse_duration_s", num(t, "pulse_duration_s")));
    c.timing.discard = Seconds(num(t, "discard_s"));
    c.timing.dt = Seconds(num(t, "dt_s"));
    c.timing.baseline = window(t["baseline_window_s"]);
    c.timing.signal = window(t["signal_window_s"]);
    if (preset.contains("pulse_duration_s")) {
        // Signal window keeps its offset from the end of the pulse.
        const double shift = c.timing.pulse_duration.value() - num(t, "pulse_duration_s");
        c.timing.signal.begin += Seconds(shift);
        c.timing.signal.end += Seconds(shift);
    }

    c.dsp.bandwidth = FrequencyHz(num(doc["dsp"], "bandwidth_hz"));
    c.dsp.output_rate = FrequencyHz(num(doc["dsp"], "output_rate_hz"));
    c.seed = doc["seed"].get<std::uint64_t>();

    const json& e = doc["experiments"];
    c.heater_power = PowerDbm(num(e, "heater_power_dbm"));
    for (const auto& p : e["characterize"]["powers_dbm"]) c.sweeps.characterize_powers.emplace_back(p.get<double>());
    c.sweeps.characterize_half_span = FrequencyHz(num(e["characterize"], "half_span_hz"));
    c.sweeps.characterize_step = FrequencyHz(num(e["characterize"], "step_hz"));
    c.sweeps.filterscan_power = PowerDbm(num(e["filterscan"], "heater_power_dbm"));
    c.sweeps.filterscan_half_span = FrequencyHz(num(e["filterscan"], "half_span_hz"));
    c.sweeps.filterscan_step = FrequencyHz(num(e["filterscan"], "step_hz"));
    c.sweeps.powersweep_min = PowerDbm(num(e["powersweep"], "min_dbm"));
    c.sweeps.powersweep_max = PowerDbm(num(e["powersweep"], "max_dbm"));
    c.sweeps.powersweep_step = Decibels(num(e["powersweep"], "step_db"));
    c.sweeps.powersweep_n_avg = e["powersweep"]["n_avg"].get<std::size_t>();
    c.sweeps.time_constant_power = PowerDbm(num(e["time_constant"], "heater_power_dbm"));
    c.sweeps.time_constant_settle = Seconds(num(e["time_constant"], "settle_s"));
    c.sweeps.time_constant_n_avg = e["time_constant"]["n_avg"].get<std::size_t>();

    const json& cal = doc["calibration"];
    c.calibration.shift_linewidths = num(cal, "shift_linewidths");
    c.calibration.heater_power = PowerDbm(num(cal, "heater_power_dbm"));
    c.calibration.snr = num(cal, "snr");
    c.calibration.n_avg = cal["n_avg"].get<std::size_t>();
    c.calibration.seed = cal["seed"].get<std::uint64_t>();
    c.calibration.probe_grid_hz = num(cal, "probe_grid_hz");
    c.calibration.place_probes = cal["place_probes"].get<bool>();
    c.calibration.realizations = cal["realizations"].get<std::size_t>();

    // Remaining per-type invariants (bolometer and filter parameter relations).
    try {
        c.chip.validate();
    } catch (const InvalidArgument& err) {
        throw SchemaError("/chip", err.what());
    } catch (const ConfigurationError& err) {
        throw SchemaError("/chip", err.what());
    }
    try {
        c.timing.validate();
    } catch (const ConfigurationError& err) {
        throw SchemaError("/timing", err.what());
    }
    c.canonical_json = doc.dump();
    return c;
}

}  // namespace

const std::string& default_config_json() {
    static const std::string text = detail::kDefaultConfigJson;
    return text;
}

const std::string& config_schema_json() {
    static const std::string text = detail::kConfigSchemaJson;
    return text;
}

ExperimentConfig parse_config(std::string_view json_text, const ConfigOverrides& overrides) {
    json doc = json::parse(default_config_json());
    json patch;
    try {
        patch = json::parse(json_text);
    } catch (const json::parse_error& err) {
        throw ParseError(1, std::string("invalid JSON: ") + err.what());
    }
    if (!patch.is_object()) {
        throw SchemaError("/", "configuration must be a JSON object");
    }
    doc.merge_patch(patch);
    if (overrides.seed) doc["seed"] = *overrides.seed;
    if (overrides.preset) doc["preset"] = *overrides.preset;
    validate_node(doc, schema_document(), "");
    check_cross_field(doc);
    return resolve(doc);
}

ExperimentConfig load_config(const std::filesystem::path& path, const ConfigOverrides& overrides) {
    if (path.empty()) {
        return parse_config("{}", overrides);
    }
    std::ifstream in(path);
    if (!in) {
        throw InvalidArgument("cannot open config file " + path.string());
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), overrides);
}

std::string config_hash(const ExperimentConfig& config) { return sha256_hex(config.canonical_json); }

Volts scale_noise_sigma(Volts sigma, FrequencyHz from_rate, std::size_t from_avg, FrequencyHz to_rate,
                        std::size_t to_avg) {
    return Volts(sigma.value() * std::sqrt(to_rate / from_rate) *
                 std::sqrt(static_cast<double>(to_avg) / static_cast<double>(from_avg)));
}

std::string calibrated_config_json(const ExperimentConfig& config, const CalibrationResult& result) {
    json doc = json::parse(config.canonical_json);
    json& chip = doc["chip"];
    for (std::size_t i = 0; i < result.chip.size(); ++i) {
        chip["bolometers"][i]["dfdT_hz_per_k"] = result.chip.bolometers[i].dfdT.value();
        chip["probes"][i]["frequency_hz"] = result.chip.probes[i].frequency.value();
    }
    for (auto& [name, preset] : doc["presets"].items()) {
        preset["noise_sigma_v"] =
            scale_noise_sigma(result.chip.noise_sigma, config.chip.sample_rate, config.calibration.n_avg,
                              FrequencyHz(preset["sample_rate_hz"].get<double>()), preset["n_avg"].get<std::size_t>())
                .value();
    }
    return doc.dump(2) + "\n";
}

}  // namespace mxbolo
