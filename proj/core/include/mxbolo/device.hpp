#pragma once

// Single-bolometer physics: single-pole thermal model of the absorber,
// linearized thermometry of the tank circuit, one-port reflection and the
// self-consistent operating point under probe self-heating.

#include <complex>
#include <string>

#include "mxbolo/units.hpp"

namespace mxbolo {

struct BolometerParams {
    std::string name;
    FrequencyHz f_r0;        ///< cold tank resonance
    FrequencyHz kappa_ext;   ///< external coupling linewidth
    FrequencyHz kappa_int;   ///< internal loss linewidth
    Seconds tau_th;          ///< thermal time constant C / G
    WattsPerKelvin g_th;     ///< conductance to the bath
    HertzPerKelvin dfdT;     ///< resonance moves down by dfdT per kelvin of heating
    Kelvin t_bath;
    PowerDbm p_nonlinear{-125.0};

    FrequencyHz linewidth() const { return kappa_ext + kappa_int; }
    /// Heat capacity implied by tau_th and g_th, J/K.
    double heat_capacity() const { return g_th.value() * tau_th.value(); }

    /// Throws InvalidArgument naming the first violated invariant.
    void validate() const;
};

/// Electron temperature plus the resonance it implies.
class BolometerState {
public:
    BolometerState(const BolometerParams& params, Kelvin t_e);

    static BolometerState at_bath(const BolometerParams& params) { return {params, params.t_bath}; }

    Kelvin t_e() const { return t_e_; }
    FrequencyHz f_r() const { return f_r_; }

private:
    Kelvin t_e_;
    FrequencyHz f_r_;
};

/// f_r0 - dfdT * (t - t_bath).
FrequencyHz resonance_at(const BolometerParams& params, Kelvin t);

struct OperatingPoint {
    Kelvin t_star;
    FrequencyHz f_r_star;
    std::complex<double> gamma;
    bool stable = false;
    bool multivalued = false;
    /// |g (T* - Tb) - P_abs(T*)| in watts.
    double residual_w = 0.0;
    int iterations = 0;
};

/// Gamma(f) = 1 - k_ext / (i (f - f_r) + (k_ext + k_int) / 2).
std::complex<double> reflection_coefficient(const BolometerParams& params, const BolometerState& state,
                                            FrequencyHz f);
std::complex<double> reflection_at(const BolometerParams& params, FrequencyHz f_r, FrequencyHz f);

PowerWatts absorbed_probe_power(const BolometerParams& params, const BolometerState& state, FrequencyHz f_p,
                                PowerWatts p_in);

/// Exact update of C dT/dt = -G (T - Tb) + p_abs with p_abs held over dt.
BolometerState thermal_step(const BolometerParams& params, const BolometerState& state, Seconds dt,
                            PowerWatts p_abs);

struct SolverOptions {
    double damping = 0.5;
    double tolerance_k = 1e-9;
    int max_iterations = 10000;
    int scan_points = 4096;
};

/// Solves G (T - Tb) = p_probe (1 - |Gamma(f_p; T)|^2) + p_heater by damped
/// fixed-point iteration from T = Tb, falling back to bisection of the lowest
/// bracketed root when the iteration oscillates. Throws SolverError if neither
/// converges.
OperatingPoint solve_operating_point(const BolometerParams& params, FrequencyHz f_p, PowerWatts p_probe,
                                     PowerWatts p_heater = PowerWatts(0.0), const SolverOptions& options = {});

/// Electrothermal loop gain L = -(dP_abs/dT) / G at an operating point. The
/// effective time constant of small excursions is tau_th / (1 + L).
double loop_gain(const BolometerParams& params, const OperatingPoint& op, FrequencyHz f_p, PowerWatts p_probe);

}  // namespace mxbolo
