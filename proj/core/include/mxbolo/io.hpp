#pragma once

// Result persistence: trace CSVs with bit-exact round trip, SNR tables,
// checksummed run manifests and a single-writer output directory.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mxbolo/analysis.hpp"
#include "mxbolo/trace.hpp"

namespace mxbolo {

/// Shortest decimal that parses back to the same double.
std::string format_double(double v);
double parse_double(std::string_view text, std::size_t line);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

std::string trace_to_csv(const TimeTrace& trace);
std::string trace_to_csv(const IQTrace& trace);
std::variant<TimeTrace, IQTrace> trace_from_csv(std::string_view text);

void write_trace(const TimeTrace& trace, const std::filesystem::path& path);
void write_trace(const IQTrace& trace, const std::filesystem::path& path);
std::variant<TimeTrace, IQTrace> read_trace(const std::filesystem::path& path);
/// Reads a file that must hold the given kind.
TimeTrace read_time_trace(const std::filesystem::path& path);
IQTrace read_iq_trace(const std::filesystem::path& path);

/// Header row "row,<col labels>", one row per table row, SNR values last.
std::string snr_table_to_csv(const SnrTable& table);
SnrTable snr_table_from_csv(std::string_view text);

struct ManifestEntry {
    std::string path;       ///< relative to the output directory, '/'-separated
    std::string sha256;
    std::uintmax_t bytes = 0;
};

struct RunManifest {
    std::string tool;
    std::string version;
    std::string command;
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string preset;
    unsigned threads = 1;
    std::string started_utc;
    std::string finished_utc;
    std::vector<ManifestEntry> files;
};

std::string manifest_to_json(const RunManifest& manifest);
RunManifest manifest_from_json(std::string_view text);

/// Problems found when checking `dir` against its manifest.json; empty when
/// every listed file exists with the recorded checksum.
std::vector<std::string> verify_manifest(const std::filesystem::path& dir);

std::string utc_timestamp();

/// Writes files below one directory, recording each checksum, and closes
/// with manifest.json.
class ResultWriter {
public:
    explicit ResultWriter(std::filesystem::path dir);

    const std::filesystem::path& dir() const { return dir_; }
    void write(const std::string& relative, std::string_view content);
    void write_trace(const std::string& relative, const TimeTrace& trace);
    void write_trace(const std::string& relative, const IQTrace& trace);
    /// Fills files and finished_utc, then writes manifest.json.
    void finish(RunManifest manifest);

private:
    std::filesystem::path dir_;
    std::vector<ManifestEntry> files_;
};

}  // namespace mxbolo
