#pragma once

#include <string>
#include <vector>

#include "mxbolo/device.hpp"
#include "mxbolo/dsp.hpp"
#include "mxbolo/frontend.hpp"
#include "mxbolo/trace.hpp"

namespace mxbolo {

/// One multiplexed trigger experiment: a pattern and, per bolometer in chip
/// order, the averaged demodulated trace and its response metric.
struct MultiplexRun {
    TriggerPattern pattern;
    std::vector<FrequencyHz> probe_frequencies;
    std::vector<IQTrace> traces;
    std::vector<ResponseMetric> metrics;
};

/// Probe-frequency x probe-power surface (run_probe_sweep) or a 1-D sweep
/// (filter and power sweeps use a single row).
struct SweepResult {
    std::string kind;
    std::size_t channel = 0;
    std::vector<FrequencyHz> frequencies;
    std::vector<PowerDbm> powers;
    /// surface[row][col]; rows follow `powers`, columns follow `frequencies`
    /// (1-D sweeps store a single row over whichever axis is swept).
    std::vector<std::vector<double>> surface;
    /// Per-row min-max normalization of `surface` to [0, 1].
    std::vector<std::vector<double>> normalized;
    /// Cells where the operating-point solver failed or the solution is multivalued.
    std::vector<std::vector<bool>> flagged;
    std::vector<OperatingPoint> operating_points;
};

}  // namespace mxbolo
