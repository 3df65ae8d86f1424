#pragma once

// Counter-based random streams. A stream is a pure function of
// (master seed, label tuple, draw index), so any number of streams can be
// created in any order on any thread and still produce the same samples.

#include <array>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace mxbolo {

struct Seed {
    std::uint64_t master = 0;
    std::vector<std::uint64_t> labels;

    /// Copy of this seed with one more label appended.
    Seed child(std::uint64_t label) const;

    friend bool operator==(const Seed&, const Seed&) = default;
};

/// Philox-4x32-10 keyed by a 64-bit digest of the seed; the 128-bit counter
/// is the block index. Not thread-safe: one handle per task.
class RandomStream {
public:
    explicit RandomStream(std::array<std::uint32_t, 2> key) : key_(key) {}

    /// Uniform in the open interval (0, 1), 53-bit resolution.
    double uniform();
    /// Standard normal (Box-Muller on consecutive uniforms).
    double normal();
    void fill_normal(std::span<double> out);

    std::array<std::uint32_t, 2> key() const { return key_; }

private:
    std::array<std::uint32_t, 4> next_block();

    std::array<std::uint32_t, 2> key_;
    std::uint64_t counter_ = 0;
    std::array<std::uint32_t, 4> block_{};
    int block_pos_ = 4;
    double spare_normal_ = 0.0;
    bool has_spare_ = false;
};

RandomStream derive_stream(const Seed& seed);
RandomStream derive_stream(std::uint64_t master, std::initializer_list<std::uint64_t> labels);

/// Raw Philox-4x32-10 bijection, exposed for known-answer tests.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key);

}  // namespace mxbolo
