#include "mxbolo/io.hpp"

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <charconv>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <memory>
#include <sstream>

#include "mxbolo/error.hpp"

namespace mxbolo {
namespace {

using nlohmann::json;

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.push_back(line);
        pos = end + 1;
    }
    return lines;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    for (;;) {
        const std::size_t comma = line.find(',', pos);
        out.push_back(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    return out;
}

/// Parses "# key=value" at lines[index]; returns the value.
std::string_view header_value(const std::vector<std::string_view>& lines, std::size_t index, std::string_view key) {
    const std::size_t line_no = index + 1;
    if (index >= lines.size()) {
        throw ParseError(line_no, "missing '# " + std::string(key) + "=' header");
    }
    const std::string prefix = "# " + std::string(key) + "=";
    if (lines[index].substr(0, prefix.size()) != prefix) {
        throw ParseError(line_no, "expected '" + prefix + "<value>' header");
    }
    return lines[index].substr(prefix.size());
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InvalidArgument("cannot open " + path.string());
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw InvalidArgument("cannot write " + path.string());
    }
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) {
        throw Error("write failed for " + path.string());
    }
}

std::string header(FrequencyHz rate, Seconds t0, const char* kind) {
    return "# sample_rate_hz=" + format_double(rate.value()) + "\n# t0_s=" + format_double(t0.value()) +
           "\n# kind=" + kind + "\n";
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(std::string_view text, std::size_t line) {
    double v = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
        throw ParseError(line, "not a number: '" + std::string(text) + "'");
    }
    return v;
}

std::string sha256_hex(std::string_view bytes) {
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
        throw Error("sha256 computation failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xF];
    }
    return out;
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_file(path)); }

std::string trace_to_csv(const TimeTrace& trace) {
    std::string s = header(trace.sample_rate, trace.t0, "real");
    if (trace.band) {
        s += "# band_hz=" + format_double(trace.band->lo.value()) + "," + format_double(trace.band->hi.value()) + "\n";
    }
    for (std::size_t i = 0; i < trace.size(); ++i) {
        s += std::to_string(i);
        s += ',';
        s += format_double(trace.samples[i]);
        s += '\n';
    }
    return s;
}

std::string trace_to_csv(const IQTrace& trace) {
    std::string s = header(trace.sample_rate, trace.t0, "iq");
    s += "# carrier_hz=" + format_double(trace.carrier.value()) + "\n";
    for (std::size_t i = 0; i < trace.size(); ++i) {
        s += std::to_string(i);
        s += ',';
        s += format_double(trace.samples[i].real());
        s += ',';
        s += format_double(trace.samples[i].imag());
        s += '\n';
    }
    return s;
}

std::variant<TimeTrace, IQTrace> trace_from_csv(std::string_view text) {
    const auto lines = split_lines(text);
    const double rate = parse_double(header_value(lines, 0, "sample_rate_hz"), 1);
    if (!(rate > 0.0)) {
        throw ParseError(1, "sample rate must be positive");
    }
    const double t0 = parse_double(header_value(lines, 1, "t0_s"), 2);
    const std::string_view kind = header_value(lines, 2, "kind");
    if (kind != "real" && kind != "iq") {
        throw ParseError(3, "kind must be 'real' or 'iq'");
    }
    std::size_t row = 3;
    std::optional<Band> band;
    double carrier = 0.0;
    if (kind == "real" && row < lines.size() && lines[row].starts_with("# band_hz=")) {
        const auto f = split_fields(lines[row].substr(10));
        if (f.size() != 2) {
            throw ParseError(row + 1, "band needs two values");
        }
        band = Band{FrequencyHz(parse_double(f[0], row + 1)), FrequencyHz(parse_double(f[1], row + 1))};
        ++row;
    }
    if (kind == "iq") {
        carrier = parse_double(header_value(lines, row, "carrier_hz"), row + 1);
        ++row;
    }
    const std::size_t columns = kind == "real" ? 2 : 3;
    std::vector<double> re;
    std::vector<double> im;
    for (; row < lines.size(); ++row) {
        if (lines[row].empty()) continue;
        const auto f = split_fields(lines[row]);
        if (f.size() != columns) {
            throw ParseError(row + 1, "expected " + std::to_string(columns) + " columns");
        }
        const double index = parse_double(f[0], row + 1);
        if (index != static_cast<double>(re.size())) {
            throw ParseError(row + 1, "sample index out of sequence");
        }
        re.push_back(parse_double(f[1], row + 1));
        if (columns == 3) im.push_back(parse_double(f[2], row + 1));
    }
    if (re.empty()) {
        throw ParseError(lines.size(), "trace has no samples");
    }
    if (kind == "real") {
        return TimeTrace{FrequencyHz(rate), Seconds(t0), std::move(re), band};
    }
    IQTrace iq{FrequencyHz(carrier), FrequencyHz(rate), Seconds(t0), std::vector<std::complex<double>>(re.size())};
    for (std::size_t i = 0; i < re.size(); ++i) iq.samples[i] = {re[i], im[i]};
    return iq;
}

void write_trace(const TimeTrace& trace, const std::filesystem::path& path) { write_file(path, trace_to_csv(trace)); }
void write_trace(const IQTrace& trace, const std::filesystem::path& path) { write_file(path, trace_to_csv(trace)); }

std::variant<TimeTrace, IQTrace> read_trace(const std::filesystem::path& path) {
    return trace_from_csv(read_file(path));
}

TimeTrace read_time_trace(const std::filesystem::path& path) {
    auto v = read_trace(path);
    if (!std::holds_alternative<TimeTrace>(v)) {
        throw ParseError(3, path.string() + " holds an IQ trace, expected a real trace");
    }
    return std::get<TimeTrace>(std::move(v));
}

IQTrace read_iq_trace(const std::filesystem::path& path) {
    auto v = read_trace(path);
    if (!std::holds_alternative<IQTrace>(v)) {
        throw ParseError(3, path.string() + " holds a real trace, expected an IQ trace");
    }
    return std::get<IQTrace>(std::move(v));
}

std::string snr_table_to_csv(const SnrTable& table) {
    std::string s = "row";
    for (std::size_t c = 0; c < table.probe_frequencies.size(); ++c) {
        s += "," + format_double(table.probe_frequencies[c].value());
    }
    s += '\n';
    for (std::size_t r = 0; r < table.values.size(); ++r) {
        s += table.row_labels.at(r);
        for (double v : table.values[r]) s += "," + format_double(v);
        s += '\n';
    }
    return s;
}

SnrTable snr_table_from_csv(std::string_view text) {
    const auto lines = split_lines(text);
    if (lines.empty() || !lines[0].starts_with("row,")) {
        throw ParseError(1, "expected header 'row,<probe frequencies in Hz>'");
    }
    SnrTable t;
    const auto head = split_fields(lines[0]);
    for (std::size_t c = 1; c < head.size(); ++c) t.probe_frequencies.emplace_back(parse_double(head[c], 1));
    for (std::size_t r = 1; r < lines.size(); ++r) {
        if (lines[r].empty()) continue;
        const auto f = split_fields(lines[r]);
        if (f.size() != head.size()) {
            throw ParseError(r + 1, "expected " + std::to_string(head.size()) + " columns");
        }
        t.row_labels.emplace_back(f[0]);
        std::vector<double> row;
        for (std::size_t c = 1; c < f.size(); ++c) row.push_back(parse_double(f[c], r + 1));
        t.values.push_back(row);
        t.zero_noise.emplace_back(row.size(), false);
    }
    return t;
}

std::string manifest_to_json(const RunManifest& m) {
    json j;
    j["tool"] = m.tool;
    j["version"] = m.version;
    j["command"] = m.command;
    j["config_sha256"] = m.config_hash;
    j["seed"] = m.seed;
    j["preset"] = m.preset;
    j["threads"] = m.threads;
    j["started_utc"] = m.started_utc;
    j["finished_utc"] = m.finished_utc;
    j["files"] = json::array();
    for (const auto& f : m.files) {
        j["files"].push_back({{"path", f.path}, {"sha256", f.sha256}, {"bytes", f.bytes}});
    }
    return j.dump(2) + "\n";
}

RunManifest manifest_from_json(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& err) {
        throw ParseError(1, std::string("manifest is not valid JSON: ") + err.what());
    }
    try {
        RunManifest m;
        m.tool = j.at("tool");
        m.version = j.at("version");
        m.command = j.at("command");
        m.config_hash = j.at("config_sha256");
        m.seed = j.at("seed");
        m.preset = j.at("preset");
        m.threads = j.at("threads");
        m.started_utc = j.at("started_utc");
        m.finished_utc = j.at("finished_utc");
        for (const auto& f : j.at("files")) {
            m.files.push_back(ManifestEntry{f.at("path"), f.at("sha256"), f.at("bytes")});
        }
        return m;
    } catch (const json::exception& err) {
        throw ParseError(0, std::string("manifest is missing fields: ") + err.what());
    }
}

std::vector<std::string> verify_manifest(const std::filesystem::path& dir) {
    const auto path = dir / "manifest.json";
    if (!std::filesystem::exists(path)) {
        return {"manifest.json missing in " + dir.string()};
    }
    const RunManifest m = manifest_from_json(read_file(path));
    std::vector<std::string> problems;
    for (const auto& f : m.files) {
        const auto p = dir / f.path;
        if (!std::filesystem::exists(p)) {
            problems.push_back(f.path + ": missing");
        } else if (sha256_file(p) != f.sha256) {
            problems.push_back(f.path + ": checksum mismatch");
        }
    }
    return problems;
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

ResultWriter::ResultWriter(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
}

void ResultWriter::write(const std::string& relative, std::string_view content) {
    write_file(dir_ / relative, content);
    files_.push_back(ManifestEntry{relative, sha256_hex(content), content.size()});
}

void ResultWriter::write_trace(const std::string& relative, const TimeTrace& trace) {
    write(relative, trace_to_csv(trace));
}

void ResultWriter::write_trace(const std::string& relative, const IQTrace& trace) {
    write(relative, trace_to_csv(trace));
}

void ResultWriter::finish(RunManifest manifest) {
    manifest.files = files_;
    manifest.finished_utc = utc_timestamp();
    write_file(dir_ / "manifest.json", manifest_to_json(manifest));
}

}  // namespace mxbolo
