#pragma once

// Receiver-side processing: digitizer noise, brick-wall band selection by DFT
// bin masking, digital down-conversion, trace averaging and the windowed
// response metric.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "mxbolo/random.hpp"
#include "mxbolo/trace.hpp"
#include "mxbolo/units.hpp"

namespace mxbolo {

struct TimeWindow {
    Seconds begin;
    Seconds end;
};

struct ResponseMetric {
    Volts signal_mean;
    Volts baseline_mean;
    Volts baseline_std;
    double snr = 0.0;
    /// Baseline is flat to rounding level; snr is then reported as 0.
    bool zero_noise = false;
};

/// trace + sigma * N(0, 1), samples drawn in order from the stream.
TimeTrace add_noise(const TimeTrace& trace, Volts sigma, RandomStream& stream);

/// Keeps DFT bins whose |frequency| lies in [f_center - bw/2, f_center + bw/2]
/// (inclusive edges), drops every other bin and returns the real part of the
/// inverse transform.
TimeTrace brickwall_bandpass(const TimeTrace& trace, FrequencyHz f_center, FrequencyHz bandwidth);

/// Mixes with exp(-i 2 pi f_carrier t), keeps |f| <= lp_bandwidth / 2 and
/// decimates. An input a cos(2 pi f_carrier t) maps to a constant of
/// magnitude a / 2.
IQTrace demodulate(const TimeTrace& trace, FrequencyHz f_carrier, FrequencyHz lp_bandwidth, std::size_t decimation);

TimeTrace average_traces(std::span<const TimeTrace> traces);
IQTrace average_traces(std::span<const IQTrace> traces);

/// Mean of n realizations produced on demand by make(i), reduced with a
/// pairwise tree whose shape depends only on n. Subtrees are evaluated on up
/// to `threads` workers; the result is bit-identical for any thread count.
std::vector<double> pairwise_mean(std::size_t n, const std::function<std::vector<double>(std::size_t)>& make,
                                  unsigned threads = 1);

/// Response of |IQ| in the signal window relative to the baseline window.
ResponseMetric response_metric(const IQTrace& iq, TimeWindow baseline, TimeWindow signal);

}  // namespace mxbolo
