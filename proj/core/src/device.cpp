#include "mxbolo/device.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <utility>

#include "mxbolo/error.hpp"

namespace mxbolo {
namespace {

// 1 - |Gamma|^2 for the side-coupled one-port, written in closed form so it
// stays non-negative to the last bit.
double absorbed_fraction(const BolometerParams& p, FrequencyHz f_r, FrequencyHz f) {
    const double delta = (f - f_r).value();
    const double half = 0.5 * p.linewidth().value();
    return p.kappa_ext.value() * p.kappa_int.value() / (delta * delta + half * half);
}

void require(bool ok, const std::string& what) {
    if (!ok) {
        throw InvalidArgument("bolometer parameters: " + what);
    }
}

}  // namespace

void BolometerParams::validate() const {
    require(std::isfinite(f_r0.value()) && f_r0.value() > 0.0, "f_r0 must be positive");
    require(kappa_ext.value() > 0.0, "kappa_ext must be > 0");
    require(kappa_int.value() >= 0.0, "kappa_int must be >= 0");
    require(tau_th.value() > 0.0, "tau_th must be > 0");
    require(g_th.value() > 0.0, "g_th must be > 0");
    require(dfdT.value() >= 0.0, "dfdT must be >= 0");
    require(t_bath.value() >= 0.0, "t_bath must be >= 0");
    require(std::isfinite(p_nonlinear.value()), "p_nonlinear must be finite");
}

FrequencyHz resonance_at(const BolometerParams& params, Kelvin t) {
    return params.f_r0 - FrequencyHz(params.dfdT.value() * (t - params.t_bath).value());
}

BolometerState::BolometerState(const BolometerParams& params, Kelvin t_e)
    : t_e_(t_e), f_r_(resonance_at(params, t_e)) {
    if (t_e.value() < params.t_bath.value() - 1e-12) {
        throw InvalidArgument("electron temperature below bath temperature");
    }
}

std::complex<double> reflection_at(const BolometerParams& params, FrequencyHz f_r, FrequencyHz f) {
    const std::complex<double> denom((params.kappa_ext + params.kappa_int).value() * 0.5, (f - f_r).value());
    return 1.0 - params.kappa_ext.value() / denom;
}

std::complex<double> reflection_coefficient(const BolometerParams& params, const BolometerState& state,
                                            FrequencyHz f) {
    return reflection_at(params, state.f_r(), f);
}

PowerWatts absorbed_probe_power(const BolometerParams& params, const BolometerState& state, FrequencyHz f_p,
                                PowerWatts p_in) {
    if (p_in.value() < 0.0) {
        throw InvalidArgument("absorbed_probe_power: negative input power");
    }
    return PowerWatts(p_in.value() * absorbed_fraction(params, state.f_r(), f_p));
}

BolometerState thermal_step(const BolometerParams& params, const BolometerState& state, Seconds dt,
                            PowerWatts p_abs) {
    if (!(dt.value() > 0.0)) {
        throw InvalidArgument("thermal_step: dt must be positive");
    }
    if (p_abs.value() < 0.0) {
        throw InvalidArgument("thermal_step: negative absorbed power");
    }
    const double t_inf = params.t_bath.value() + p_abs.value() / params.g_th.value();
    const double decay = std::exp(-dt.value() / params.tau_th.value());
    return BolometerState(params, Kelvin(t_inf + (state.t_e().value() - t_inf) * decay));
}

OperatingPoint solve_operating_point(const BolometerParams& params, FrequencyHz f_p, PowerWatts p_probe,
                                     PowerWatts p_heater, const SolverOptions& options) {
    if (p_probe.value() < 0.0 || p_heater.value() < 0.0) {
        throw InvalidArgument("solve_operating_point: negative power");
    }
    const double tb = params.t_bath.value();
    const double g = params.g_th.value();
    const double pp = p_probe.value();
    const double ph = p_heater.value();

    const auto residual = [&](double t) {
        return g * (t - tb) - pp * absorbed_fraction(params, resonance_at(params, Kelvin(t)), f_p) - ph;
    };
    const auto image = [&](double t) {
        return tb + (pp * absorbed_fraction(params, resonance_at(params, Kelvin(t)), f_p) + ph) / g;
    };

    OperatingPoint op;
    if (pp == 0.0 && ph == 0.0) {
        op.t_star = params.t_bath;
        op.f_r_star = params.f_r0;
        op.gamma = reflection_at(params, params.f_r0, f_p);
        op.stable = true;
        return op;
    }

    double t = tb;
    bool converged = false;
    int it = 0;
    for (; it < options.max_iterations; ++it) {
        const double step = options.damping * (image(t) - t);
        t += step;
        if (std::abs(step) < options.tolerance_k * options.damping) {
            converged = true;
            break;
        }
    }
    // Bracketing scan for every root. The residual is negative at the bath
    // and non-negative once all available power is dissipated.
    int sign_changes = 0;
    std::optional<std::pair<double, double>> first_bracket;
    const double t_max = tb + (pp + ph) / g;
    double prev_t = tb;
    double prev = residual(tb);
    for (int i = 1; i <= options.scan_points; ++i) {
        const double ti = tb + (t_max - tb) * static_cast<double>(i) / options.scan_points;
        const double cur = residual(ti);
        if ((prev < 0.0 && cur >= 0.0) || (prev > 0.0 && cur <= 0.0)) {
            ++sign_changes;
            if (!first_bracket) {
                first_bracket.emplace(prev_t, ti);
            }
        }
        if (cur != 0.0) {
            prev = cur;
            prev_t = ti;
        }
    }

    if (!converged) {
        // Oscillating iteration (steep negative feedback past resonance):
        // bisect the lowest bracket, the root reached by continuation from Tb.
        if (!first_bracket) {
            throw SolverError("operating point did not converge after " + std::to_string(it) + " iterations",
                              residual(t));
        }
        auto [lo, hi] = *first_bracket;
        for (int k = 0; k < 200 && hi - lo > 0.0; ++k) {
            const double mid = 0.5 * (lo + hi);
            if (mid <= lo || mid >= hi) {
                break;
            }
            (residual(mid) < 0.0 ? lo : hi) = mid;
        }
        t = std::abs(residual(lo)) < std::abs(residual(hi)) ? lo : hi;
    } else {
        // Secant polish: the damped iteration stops at the tolerance, the
        // fixed point itself is wanted to rounding level.
        double t_prev = t - 0.5 * options.tolerance_k;
        double r_prev = residual(t_prev);
        double r = residual(t);
        for (int k = 0; k < 8 && r != 0.0 && r != r_prev; ++k) {
            const double t_next = t - r * (t - t_prev) / (r - r_prev);
            const double r_next = residual(t_next);
            if (!(std::abs(r_next) < std::abs(r))) {
                break;
            }
            t_prev = t;
            r_prev = r;
            t = t_next;
            r = r_next;
        }
    }

    op.t_star = Kelvin(std::max(t, tb));
    op.f_r_star = resonance_at(params, op.t_star);
    op.gamma = reflection_at(params, op.f_r_star, f_p);
    op.stable = true;
    op.multivalued = sign_changes > 1;
    op.residual_w = std::abs(residual(op.t_star.value()));
    op.iterations = it + 1;
    return op;
}

double loop_gain(const BolometerParams& params, const OperatingPoint& op, FrequencyHz f_p, PowerWatts p_probe) {
    const double delta = (f_p - op.f_r_star).value();
    const double half = 0.5 * params.linewidth().value();
    const double den = delta * delta + half * half;
    const double d_frac_d_delta = -2.0 * delta * params.kappa_ext.value() * params.kappa_int.value() / (den * den);
    // delta = f_p - f_r(T) grows with T at rate dfdT.
    const double d_power_d_t = p_probe.value() * d_frac_d_delta * params.dfdT.value();
    return -d_power_d_t / params.g_th.value();
}

}  // namespace mxbolo
