#include <gtest/gtest.h>

#include <cmath>

#include "mxbolo/dsp.hpp"
#include "mxbolo/error.hpp"
#include "mxbolo/frontend.hpp"
#include "oracles.hpp"

using namespace mxbolo;

namespace {

TimeTrace noisy_comb(std::size_t n, double fs, std::uint64_t label) {
    const std::vector<ToneSpec> tones = {{FrequencyHz(156.74e6), PowerDbm(-144.0), 0.2},
                                         {FrequencyHz(179.32e6), PowerDbm(-141.0), 1.4},
                                         {FrequencyHz(193.79e6), PowerDbm(-147.0), 2.9}};
    auto x = make_probe_comb(tones, FrequencyHz(fs), Seconds(static_cast<double>(n) / fs));
    RandomStream s = derive_stream(31, {label});
    return add_noise(x, Volts(3e-8), s);
}

TimeTrace tone(double f, double a, std::size_t n, double fs, double phase = 0.0) {
    TimeTrace t{FrequencyHz(fs), Seconds(0.0), std::vector<double>(n), std::nullopt};
    for (std::size_t i = 0; i < n; ++i) {
        t.samples[i] = a * std::cos(2.0 * std::numbers::pi * f * static_cast<double>(i) / fs + phase);
    }
    return t;
}

}  // namespace

TEST(AddNoise, ZeroSigmaIsIdentity) {
    const auto x = tone(1e6, 1.0, 1000, 1e9);
    RandomStream s = derive_stream(1, {});
    EXPECT_EQ(add_noise(x, Volts(0.0), s).samples, x.samples);
}

TEST(AddNoise, SampleStd) {
    TimeTrace z{FrequencyHz(1e9), Seconds(0.0), std::vector<double>(1000000, 0.0), std::nullopt};
    RandomStream s = derive_stream(1, {2});
    const auto y = add_noise(z, Volts(1e-6), s);
    EXPECT_NEAR(oracle::stddev(y.samples) / 1e-6, 1.0, 0.005);
}

TEST(AddNoise, DeterministicPerStream) {
    TimeTrace z{FrequencyHz(1e9), Seconds(0.0), std::vector<double>(1000, 0.0), std::nullopt};
    RandomStream a = derive_stream(4, {4});
    RandomStream b = derive_stream(4, {4});
    EXPECT_EQ(add_noise(z, Volts(1.0), a).samples, add_noise(z, Volts(1.0), b).samples);
}

TEST(Brickwall, MatchesDirectDft) {
    const auto x = noisy_comb(2000, 1e9, 1);  // 500 kHz bins
    for (double bw : {1e6, 3e6}) {
        const auto got = brickwall_bandpass(x, FrequencyHz(179.5e6), FrequencyHz(bw));
        const auto want = oracle::dft_bandpass(x.samples, 1e9, 179.5e6, bw);
        double scale = 0.0;
        for (double v : want) scale = std::max(scale, std::abs(v));
        for (std::size_t i = 0; i < want.size(); ++i) ASSERT_NEAR(got.samples[i], want[i], 1e-9 * scale);
    }
}

TEST(Brickwall, IdempotentBitExact) {
    const auto x = noisy_comb(100000, 1e9, 2);
    const auto once = brickwall_bandpass(x, FrequencyHz(156.74e6), FrequencyHz(1e6));
    const auto twice = brickwall_bandpass(once, FrequencyHz(156.74e6), FrequencyHz(1e6));
    EXPECT_EQ(once.samples, twice.samples);
}

TEST(Brickwall, RefilteringWithoutBandTagIsNumericallyIdempotent) {
    const auto x = noisy_comb(100000, 1e9, 3);
    auto once = brickwall_bandpass(x, FrequencyHz(156.74e6), FrequencyHz(1e6));
    once.band.reset();
    const auto twice = brickwall_bandpass(once, FrequencyHz(156.74e6), FrequencyHz(1e6));
    double scale = 0.0;
    for (double v : once.samples) scale = std::max(scale, std::abs(v));
    for (std::size_t i = 0; i < once.size(); ++i) ASSERT_NEAR(twice.samples[i], once.samples[i], 1e-12 * scale);
}

TEST(Brickwall, NestedBandsIntersect) {
    const auto x = noisy_comb(100000, 1e9, 4);
    const auto wide = brickwall_bandpass(x, FrequencyHz(180e6), FrequencyHz(10e6));
    const auto narrow = brickwall_bandpass(wide, FrequencyHz(179.32e6), FrequencyHz(1e6));
    const auto direct = brickwall_bandpass(x, FrequencyHz(179.32e6), FrequencyHz(1e6));
    ASSERT_TRUE(narrow.band.has_value());
    EXPECT_EQ(*narrow.band, *direct.band);
    for (std::size_t i = 0; i < x.size(); ++i) ASSERT_NEAR(narrow.samples[i], direct.samples[i], 1e-20);
}

TEST(Brickwall, PassbandIdentity) {
    const auto x = tone(156.74e6, 1e-3, 100000, 1e9, 0.4);
    const auto y = brickwall_bandpass(x, FrequencyHz(156.74e6), FrequencyHz(1e6));
    for (std::size_t i = 0; i < x.size(); ++i) ASSERT_NEAR(y.samples[i], x.samples[i], 1e-9 * 1e-3);
}

TEST(Brickwall, StopbandAnnihilation) {
    const auto x = tone(156.74e6, 1.0, 100000, 1e9);
    const auto y = brickwall_bandpass(x, FrequencyHz(166.74e6), FrequencyHz(1e6));
    for (double v : y.samples) ASSERT_LT(std::abs(v), 1e-12);
}

TEST(Brickwall, NormNonIncreasing) {
    for (std::uint64_t k = 0; k < 5; ++k) {
        const auto x = noisy_comb(20000, 1e9, 10 + k);
        const auto y = brickwall_bandpass(x, FrequencyHz(150e6 + 1e7 * static_cast<double>(k)), FrequencyHz(5e6));
        double ex = 0.0, ey = 0.0;
        for (double v : x.samples) ex += v * v;
        for (double v : y.samples) ey += v * v;
        EXPECT_LE(ey, ex);
    }
}

TEST(Brickwall, RejectsOutOfRangeCenter) {
    const auto x = tone(1e6, 1.0, 1000, 1e9);
    EXPECT_THROW(brickwall_bandpass(x, FrequencyHz(600e6), FrequencyHz(1e6)), ConfigurationError);
    EXPECT_THROW(brickwall_bandpass(x, FrequencyHz(100e6), FrequencyHz(0.0)), ConfigurationError);
}

TEST(Demodulate, EnvelopeConvention) {
    const auto x = tone(156.74e6, 0.1, 100000, 1e9);
    const auto iq = demodulate(x, FrequencyHz(156.74e6), FrequencyHz(1e6), 100);
    ASSERT_EQ(iq.size(), 1000u);
    EXPECT_DOUBLE_EQ(iq.sample_rate.value(), 1e7);
    for (const auto& v : iq.samples) ASSERT_NEAR(std::abs(v), 0.05, 1e-6);
}

TEST(Demodulate, CombRecovery) {
    const std::vector<ToneSpec> tones = {{FrequencyHz(156.74e6), PowerDbm(-144.0), 0.2},
                                         {FrequencyHz(179.32e6), PowerDbm(-141.0), 1.4},
                                         {FrequencyHz(193.79e6), PowerDbm(-147.0), 2.9}};
    const auto x = make_probe_comb(tones, FrequencyHz(1e9), Seconds(100e-6));
    for (const auto& t : tones) {
        const auto iq = demodulate(x, t.frequency, FrequencyHz(1e6), 100);
        const double want = tone_amplitude(dbm_to_watts(t.power)).value() / 2.0;
        for (const auto& v : iq.samples) ASSERT_NEAR(std::abs(v) / want, 1.0, 1e-3);
    }
}

TEST(Demodulate, ZeroInZeroOut) {
    TimeTrace z{FrequencyHz(1e9), Seconds(0.0), std::vector<double>(10000, 0.0), std::nullopt};
    for (const auto& v : demodulate(z, FrequencyHz(150e6), FrequencyHz(1e6), 100).samples) EXPECT_EQ(v, 0.0);
}

TEST(Demodulate, Linearity) {
    const auto x = noisy_comb(100000, 1e9, 5);
    const auto y = noisy_comb(100000, 1e9, 6);
    TimeTrace z = x;
    const double a = 0.7, b = -2.5;
    for (std::size_t i = 0; i < z.size(); ++i) z.samples[i] = a * x.samples[i] + b * y.samples[i];
    const auto dx = demodulate(x, FrequencyHz(179.32e6), FrequencyHz(1e6), 100);
    const auto dy = demodulate(y, FrequencyHz(179.32e6), FrequencyHz(1e6), 100);
    const auto dz = demodulate(z, FrequencyHz(179.32e6), FrequencyHz(1e6), 100);
    double scale = 0.0;
    for (const auto& v : dz.samples) scale = std::max(scale, std::abs(v));
    for (std::size_t i = 0; i < dz.size(); ++i) {
        ASSERT_NEAR(std::abs(dz.samples[i] - (a * dx.samples[i] + b * dy.samples[i])), 0.0, 1e-12 * scale);
    }
}

TEST(Demodulate, FilterThenDemodEqualsDemod) {
    const auto x = noisy_comb(100000, 1e9, 7);
    const FrequencyHz fc(193.79e6);
    const auto direct = demodulate(x, fc, FrequencyHz(1e6), 100);
    const auto filtered = demodulate(brickwall_bandpass(x, fc, FrequencyHz(1e6)), fc, FrequencyHz(1e6), 100);
    double scale = 0.0;
    for (const auto& v : direct.samples) scale = std::max(scale, std::abs(v));
    for (std::size_t i = 0; i < direct.size(); ++i) {
        ASSERT_NEAR(std::abs(direct.samples[i] - filtered.samples[i]), 0.0, 1e-9 * scale);
    }
}

TEST(Demodulate, DecimationMustDivideLength) {
    const auto x = tone(1e6, 1.0, 1001, 1e9);
    EXPECT_THROW(demodulate(x, FrequencyHz(150e6), FrequencyHz(1e6), 100), ConfigurationError);
}

TEST(Average, IdenticalTraces) {
    const auto x = noisy_comb(1000, 1e9, 8);
    const std::vector<TimeTrace> v = {x, x, x};
    const auto m = average_traces(v);
    for (std::size_t i = 0; i < x.size(); ++i) ASSERT_NEAR(m.samples[i], x.samples[i], 1e-22);
}

TEST(Average, EmptyListRejected) {
    EXPECT_THROW(average_traces(std::vector<TimeTrace>{}), InvalidArgument);
    EXPECT_THROW(average_traces(std::vector<IQTrace>{}), InvalidArgument);
}

TEST(Average, SqrtNScaling) {
    const std::size_t len = 4000;
    for (std::size_t n : {16u, 256u, 4096u}) {
        const auto make = [&](std::size_t k) {
            RandomStream s = derive_stream(40, {n, k});
            std::vector<double> v(len, 1.0);
            for (double& x : v) x += s.normal();
            return v;
        };
        const auto m = pairwise_mean(n, make, 2);
        EXPECT_NEAR(oracle::stddev(m) * std::sqrt(static_cast<double>(n)), 1.0, 0.2) << n;
    }
}

TEST(Average, PairwiseMeanThreadIndependent) {
    const auto make = [](std::size_t k) {
        RandomStream s = derive_stream(41, {k});
        std::vector<double> v(257);
        s.fill_normal(v);
        return v;
    };
    const auto one = pairwise_mean(1000, make, 1);
    for (unsigned t : {2u, 3u, 8u}) EXPECT_EQ(pairwise_mean(1000, make, t), one);
}

TEST(ResponseMetric, ConstantTraceFlagged) {
    IQTrace iq{FrequencyHz(1e8), FrequencyHz(1e7), Seconds(10e-6), std::vector<std::complex<double>>(900, {0.3, 0.4})};
    const auto m = response_metric(iq, {Seconds(10e-6), Seconds(30e-6)}, {Seconds(47e-6), Seconds(52e-6)});
    EXPECT_TRUE(m.zero_noise);
    EXPECT_EQ(m.snr, 0.0);
    EXPECT_DOUBLE_EQ(m.signal_mean.value(), m.baseline_mean.value());
}

TEST(ResponseMetric, FiveSigmaStep) {
    // Independent samples so the signal-window mean is tight.
    double mean_snr = 0.0;
    const int reps = 50;
    for (int r = 0; r < reps; ++r) {
        RandomStream s = derive_stream(42, {static_cast<std::uint64_t>(r)});
        IQTrace iq{FrequencyHz(1e8), FrequencyHz(1e7), Seconds(0.0), {}};
        for (int k = 0; k < 1000; ++k) {
            const double t = k * 1e-7;
            iq.samples.emplace_back(1.0 + (t >= 40e-6 ? 5e-3 : 0.0) + 1e-3 * s.normal(), 0.0);
        }
        mean_snr += response_metric(iq, {Seconds(10e-6), Seconds(30e-6)}, {Seconds(47e-6), Seconds(52e-6)}).snr;
    }
    EXPECT_NEAR(mean_snr / reps, 5.0, 0.5);
}

TEST(ResponseMetric, WindowErrors) {
    IQTrace iq{FrequencyHz(1e8), FrequencyHz(1e7), Seconds(0.0), std::vector<std::complex<double>>(100, 1.0)};
    EXPECT_THROW(response_metric(iq, {Seconds(2e-6), Seconds(1e-6)}, {Seconds(5e-6), Seconds(6e-6)}),
                 InvalidArgument);
    EXPECT_THROW(response_metric(iq, {Seconds(5e-6), Seconds(6e-6)}, {Seconds(1e-6), Seconds(2e-6)}),
                 InvalidArgument);
    EXPECT_THROW(response_metric(iq, {Seconds(1e-6), Seconds(2e-6)}, {Seconds(50e-6), Seconds(60e-6)}),
                 InvalidArgument);
}
