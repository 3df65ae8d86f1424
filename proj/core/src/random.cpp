#include "mxbolo/random.hpp"

#include <cmath>
#include <numbers>

namespace mxbolo {
namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

std::array<std::uint32_t, 2> digest(const Seed& seed) {
    // Length is folded in first so that (m, [0]) and (m, [0, 0]) differ.
    std::uint64_t h = splitmix64(seed.master ^ splitmix64(seed.labels.size()));
    for (std::uint64_t label : seed.labels) {
        h = splitmix64(h ^ splitmix64(label + 0x632BE59BD9B4E019ull));
    }
    return {static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
}

}  // namespace

Seed Seed::child(std::uint64_t label) const {
    Seed s = *this;
    s.labels.push_back(label);
    return s;
}

std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                           std::array<std::uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kPhiloxM0, ctr[0], hi0, lo0);
        mulhilo(kPhiloxM1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kPhiloxW0;
        key[1] += kPhiloxW1;
    }
    return ctr;
}

std::array<std::uint32_t, 4> RandomStream::next_block() {
    const std::array<std::uint32_t, 4> ctr = {static_cast<std::uint32_t>(counter_),
                                              static_cast<std::uint32_t>(counter_ >> 32), 0u, 0u};
    ++counter_;
    return philox4x32_10(ctr, key_);
}

double RandomStream::uniform() {
    if (block_pos_ >= 4) {
        block_ = next_block();
        block_pos_ = 0;
    }
    const std::uint64_t hi = block_[block_pos_] >> 5;  // 27 bits
    const std::uint64_t lo = block_[block_pos_ + 1] >> 6;  // 26 bits
    block_pos_ += 2;
    const std::uint64_t bits = (hi << 26) | lo;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

double RandomStream::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_normal_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double phi = 2.0 * std::numbers::pi * u2;
    spare_normal_ = r * std::sin(phi);
    has_spare_ = true;
    return r * std::cos(phi);
}

void RandomStream::fill_normal(std::span<double> out) {
    for (double& v : out) {
        v = normal();
    }
}

RandomStream derive_stream(const Seed& seed) { return RandomStream(digest(seed)); }

RandomStream derive_stream(std::uint64_t master, std::initializer_list<std::uint64_t> labels) {
    return derive_stream(Seed{master, std::vector<std::uint64_t>(labels)});
}

}  // namespace mxbolo
