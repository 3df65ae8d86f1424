#include "mxbolo/units.hpp"

#include <cmath>
#include <string>

#include "mxbolo/error.hpp"

namespace mxbolo {

PowerWatts dbm_to_watts(PowerDbm p) {
    if (!std::isfinite(p.value())) {
        throw InvalidArgument("dbm_to_watts: non-finite power " + std::to_string(p.value()));
    }
    return PowerWatts(std::pow(10.0, (p.value() - 30.0) / 10.0));
}

PowerDbm watts_to_dbm(PowerWatts p) {
    if (!(p.value() > 0.0) || !std::isfinite(p.value())) {
        throw DomainError("watts_to_dbm: power must be positive and finite, got " +
                          std::to_string(p.value()));
    }
    return PowerDbm(10.0 * std::log10(p.value()) + 30.0);
}

double db_to_linear(Decibels g) { return std::pow(10.0, g.value() / 10.0); }

Decibels linear_to_db(double ratio) {
    if (!(ratio > 0.0)) {
        throw DomainError("linear_to_db: ratio must be positive");
    }
    return Decibels(10.0 * std::log10(ratio));
}

Volts tone_amplitude(PowerWatts p) {
    if (p.value() < 0.0) {
        throw InvalidArgument("tone_amplitude: negative power");
    }
    return Volts(std::sqrt(2.0 * p.value() * kReferenceOhms));
}

}  // namespace mxbolo
