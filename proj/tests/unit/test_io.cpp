#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "mxbolo/dsp.hpp"
#include "mxbolo/error.hpp"
#include "mxbolo/io.hpp"
#include "mxbolo/random.hpp"

using namespace mxbolo;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("mxbolo_io_" + std::to_string(::getpid()) + "_" +
                ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

TimeTrace noisy(std::size_t n) {
    TimeTrace t{FrequencyHz(1e9), Seconds(1.25e-5), std::vector<double>(n, 0.0), std::nullopt};
    RandomStream s = derive_stream(5, {n});
    return add_noise(t, Volts(3.7e-7), s);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST(FormatDouble, ShortestRoundTrip) {
    EXPECT_EQ(format_double(0.1), "0.1");
    EXPECT_EQ(format_double(1e-7), "1e-07");
    RandomStream s = derive_stream(6, {});
    for (int i = 0; i < 10000; ++i) {
        const double v = (s.uniform() - 0.5) * std::pow(10.0, 60.0 * s.uniform() - 30.0);
        ASSERT_EQ(parse_double(format_double(v), 1), v);
    }
    EXPECT_THROW(parse_double("abc", 7), ParseError);
}

TEST(TraceCsv, RealRoundTripBitExact) {
    TempDir dir;
    const auto x = noisy(1000);
    write_trace(x, dir.path / "x.csv");
    const auto y = read_time_trace(dir.path / "x.csv");
    EXPECT_EQ(x, y);
}

TEST(TraceCsv, BandTagSurvives) {
    auto x = brickwall_bandpass(noisy(1000), FrequencyHz(150e6), FrequencyHz(10e6));
    const auto back = std::get<TimeTrace>(trace_from_csv(trace_to_csv(x)));
    EXPECT_EQ(back, x);
}

TEST(TraceCsv, IqHasThreeColumns) {
    IQTrace iq{FrequencyHz(179.32e6), FrequencyHz(1e7), Seconds(1e-5), {}};
    for (int i = 0; i < 10; ++i) iq.samples.emplace_back(0.1 * i, -1e-9 * i);
    const auto text = trace_to_csv(iq);
    EXPECT_NE(text.find("# kind=iq"), std::string::npos);
    std::istringstream in(text);
    std::string line;
    int body = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        ++body;
        EXPECT_EQ(std::count(line.begin(), line.end(), ','), 2) << line;
    }
    EXPECT_EQ(body, 10);
    EXPECT_EQ(std::get<IQTrace>(trace_from_csv(text)), iq);
}

TEST(TraceCsv, MissingSampleRateIsLineOne) {
    auto text = trace_to_csv(noisy(10));
    text = text.substr(text.find('\n') + 1);
    try {
        trace_from_csv(text);
        FAIL() << "accepted";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 1u);
    }
}

TEST(TraceCsv, MalformedBodyReportsLine) {
    auto text = trace_to_csv(noisy(10));
    text += "10,1.0,2.0\n";
    EXPECT_THROW(trace_from_csv(text), ParseError);
}

TEST(TraceCsv, KindMismatch) {
    TempDir dir;
    write_trace(noisy(10), dir.path / "x.csv");
    EXPECT_THROW(read_iq_trace(dir.path / "x.csv"), ParseError);
}

TEST(Sha256, KnownVectors) {
    EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Manifest, JsonRoundTrip) {
    RunManifest m{"mxbolo", "0.1.0", "trigger", std::string(64, 'a'), 7, "desk", 3, "t0", "t1",
                  {{"a/b.csv", std::string(64, 'b'), 12}}};
    const auto back = manifest_from_json(manifest_to_json(m));
    EXPECT_EQ(back.command, "trigger");
    EXPECT_EQ(back.seed, 7u);
    EXPECT_EQ(back.threads, 3u);
    ASSERT_EQ(back.files.size(), 1u);
    EXPECT_EQ(back.files[0].path, "a/b.csv");
    EXPECT_EQ(back.files[0].bytes, 12u);
    EXPECT_THROW(manifest_from_json("{"), ParseError);
}

TEST(Manifest, VerifyDetectsDeletionAndTampering) {
    TempDir dir;
    ResultWriter w(dir.path / "run");
    w.write("a.json", "{}\n");
    w.write_trace("runs/x.csv", noisy(100));
    w.finish(RunManifest{"mxbolo", "0.1.0", "test"});
    EXPECT_TRUE(verify_manifest(dir.path / "run").empty());

    const auto listed = manifest_from_json(slurp(dir.path / "run" / "manifest.json"));
    EXPECT_EQ(listed.files.size(), 2u);

    std::ofstream(dir.path / "run" / "a.json") << "{\"x\":1}\n";
    EXPECT_EQ(verify_manifest(dir.path / "run").size(), 1u);
    fs::remove(dir.path / "run" / "runs" / "x.csv");
    EXPECT_EQ(verify_manifest(dir.path / "run").size(), 2u);
}
