#include <gtest/gtest.h>

#include <thread>

#include "mxbolo/random.hpp"
#include "oracles.hpp"

using namespace mxbolo;

TEST(Philox, KnownAnswerVectors) {
    for (const auto& v : oracle::kPhiloxVectors) {
        EXPECT_EQ(philox4x32_10(v.counter, v.key), v.output);
    }
}

TEST(RandomStream, SameSeedSameDraws) {
    RandomStream a = derive_stream(1, {0});
    RandomStream b = derive_stream(1, {0});
    for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.normal(), b.normal());
}

TEST(RandomStream, SeedStructEquivalentToLabels) {
    RandomStream a = derive_stream(Seed{9, {3, 4}});
    RandomStream b = derive_stream(9, {3, 4});
    RandomStream c = derive_stream(Seed{9, {3}}.child(4));
    const double x = a.uniform();
    EXPECT_EQ(x, b.uniform());
    EXPECT_EQ(x, c.uniform());
}

TEST(RandomStream, DistinctLabelsUncorrelated) {
    RandomStream a = derive_stream(1, {0});
    RandomStream b = derive_stream(1, {1});
    std::vector<double> x(1000000), y(1000000);
    a.fill_normal(x);
    b.fill_normal(y);
    EXPECT_LT(std::abs(oracle::correlation(x, y)), 0.01);
}

TEST(RandomStream, DistinctMastersDiffer) {
    EXPECT_NE(derive_stream(2, {0}).uniform(), derive_stream(1, {0}).uniform());
}

TEST(RandomStream, LabelOrderMatters) {
    EXPECT_NE(derive_stream(1, {1, 2}).uniform(), derive_stream(1, {2, 1}).uniform());
    EXPECT_NE(derive_stream(1, {1}).uniform(), derive_stream(1, {1, 0}).uniform());
}

TEST(RandomStream, UniformInOpenInterval) {
    RandomStream s = derive_stream(3, {});
    for (int i = 0; i < 100000; ++i) {
        const double u = s.uniform();
        ASSERT_GT(u, 0.0);
        ASSERT_LT(u, 1.0);
    }
}

TEST(RandomStream, NormalMoments) {
    RandomStream s = derive_stream(4, {7});
    std::vector<double> x(400000);
    s.fill_normal(x);
    const double m = oracle::mean(x);
    const double sd = oracle::stddev(x);
    EXPECT_LT(std::abs(m), 5.0 / std::sqrt(400000.0));
    EXPECT_NEAR(sd, 1.0, 3.0 / std::sqrt(2.0 * 400000.0) * 2.0);
    double m4 = 0.0;
    for (double v : x) m4 += v * v * v * v;
    EXPECT_NEAR(m4 / static_cast<double>(x.size()), 3.0, 0.05);
}

TEST(RandomStream, FillMatchesSequentialDraws) {
    RandomStream a = derive_stream(5, {1});
    RandomStream b = derive_stream(5, {1});
    std::vector<double> x(1001);
    a.fill_normal(x);
    for (double v : x) ASSERT_EQ(v, b.normal());
}

TEST(RandomStream, IndependentOfThreadSchedule) {
    std::vector<double> serial(8), parallel(8);
    for (std::size_t k = 0; k < 8; ++k) serial[k] = derive_stream(6, {k}).normal();
    std::vector<std::thread> workers;
    for (std::size_t k = 8; k-- > 0;) {
        workers.emplace_back([k, &parallel] { parallel[k] = derive_stream(6, {k}).normal(); });
    }
    for (auto& w : workers) w.join();
    EXPECT_EQ(serial, parallel);
}
