#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <vector>

#include "mxbolo/units.hpp"

namespace mxbolo {

/// Closed frequency interval [lo, hi].
struct Band {
    FrequencyHz lo;
    FrequencyHz hi;

    bool contains(const Band& other) const { return lo <= other.lo && other.hi <= hi; }
    friend bool operator==(const Band&, const Band&) = default;
};

/// Uniformly sampled real passband signal, volts.
struct TimeTrace {
    FrequencyHz sample_rate;
    Seconds t0;
    std::vector<double> samples;
    /// Set by brick-wall filtering: every DFT bin outside this band is zero.
    std::optional<Band> band;

    std::size_t size() const { return samples.size(); }
    Seconds duration() const { return Seconds(static_cast<double>(samples.size()) / sample_rate.value()); }
    Seconds time_at(std::size_t i) const { return t0 + Seconds(static_cast<double>(i) / sample_rate.value()); }

    friend bool operator==(const TimeTrace&, const TimeTrace&) = default;
};

/// Complex envelope of one channel after down-conversion, volts.
struct IQTrace {
    FrequencyHz carrier;
    FrequencyHz sample_rate;
    Seconds t0;
    std::vector<std::complex<double>> samples;

    std::size_t size() const { return samples.size(); }
    Seconds time_at(std::size_t i) const { return t0 + Seconds(static_cast<double>(i) / sample_rate.value()); }
    std::vector<double> magnitude() const;

    friend bool operator==(const IQTrace&, const IQTrace&) = default;
};

}  // namespace mxbolo
