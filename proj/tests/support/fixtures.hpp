#pragma once

#include "mxbolo/config.hpp"
#include "mxbolo/device.hpp"

namespace fixture {

inline mxbolo::BolometerParams bolometer(double f_r0 = 179.3e6, double kappa_ext = 92120, double kappa_int = 47880,
                                         double tau = 8e-6, double dfdT = 5e7) {
    mxbolo::BolometerParams p;
    p.name = "B";
    p.f_r0 = mxbolo::FrequencyHz(f_r0);
    p.kappa_ext = mxbolo::FrequencyHz(kappa_ext);
    p.kappa_int = mxbolo::FrequencyHz(kappa_int);
    p.tau_th = mxbolo::Seconds(tau);
    p.g_th = mxbolo::WattsPerKelvin(1e-14);
    p.dfdT = mxbolo::HertzPerKelvin(dfdT);
    p.t_bath = mxbolo::Kelvin(0.05);
    return p;
}

/// The shipped default configuration, parsed once.
inline const mxbolo::ExperimentConfig& defaults() {
    static const mxbolo::ExperimentConfig cfg = mxbolo::load_config({});
    return cfg;
}

}  // namespace fixture
