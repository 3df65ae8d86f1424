#pragma once

// Semantic scalar types. Every value crossing a module boundary carries its
// unit in its type; arithmetic is only defined where it is dimensionally
// meaningful (same-unit addition, scaling by a plain factor, ratios).

#include <compare>
#include <complex>

namespace mxbolo {

template <class Tag>
class Quantity {
public:
    constexpr Quantity() = default;
    constexpr explicit Quantity(double v) : value_(v) {}

    constexpr double value() const { return value_; }

    constexpr Quantity operator-() const { return Quantity(-value_); }
    constexpr Quantity& operator+=(Quantity o) { value_ += o.value_; return *this; }
    constexpr Quantity& operator-=(Quantity o) { value_ -= o.value_; return *this; }
    constexpr Quantity& operator*=(double k) { value_ *= k; return *this; }

    friend constexpr Quantity operator+(Quantity a, Quantity b) { return Quantity(a.value_ + b.value_); }
    friend constexpr Quantity operator-(Quantity a, Quantity b) { return Quantity(a.value_ - b.value_); }
    friend constexpr Quantity operator*(Quantity a, double k) { return Quantity(a.value_ * k); }
    friend constexpr Quantity operator*(double k, Quantity a) { return Quantity(a.value_ * k); }
    friend constexpr Quantity operator/(Quantity a, double k) { return Quantity(a.value_ / k); }
    friend constexpr double operator/(Quantity a, Quantity b) { return a.value_ / b.value_; }
    friend constexpr auto operator<=>(Quantity a, Quantity b) = default;

private:
    double value_ = 0.0;
};

struct HertzTag {};
struct SecondsTag {};
struct KelvinTag {};
struct WattsTag {};
struct VoltsTag {};
struct DecibelTag {};
struct WattsPerKelvinTag {};
struct HertzPerKelvinTag {};

/// Absolute frequency (carriers, centers) or frequency difference (detunings, linewidths).
using FrequencyHz = Quantity<HertzTag>;
using Seconds = Quantity<SecondsTag>;
using Kelvin = Quantity<KelvinTag>;
using PowerWatts = Quantity<WattsTag>;
using Volts = Quantity<VoltsTag>;
/// Power ratio in dB (gains, losses, crosstalk).
using Decibels = Quantity<DecibelTag>;
using WattsPerKelvin = Quantity<WattsPerKelvinTag>;
using HertzPerKelvin = Quantity<HertzPerKelvinTag>;

/// Absolute power in dB relative to 1 mW. Logarithmic, so no addition with
/// itself; shifting by a Decibels ratio is allowed.
class PowerDbm {
public:
    constexpr PowerDbm() = default;
    constexpr explicit PowerDbm(double v) : value_(v) {}

    constexpr double value() const { return value_; }

    friend constexpr PowerDbm operator+(PowerDbm p, Decibels g) { return PowerDbm(p.value_ + g.value()); }
    friend constexpr Decibels operator-(PowerDbm a, PowerDbm b) { return Decibels(a.value_ - b.value_); }
    friend constexpr auto operator<=>(PowerDbm a, PowerDbm b) = default;

private:
    double value_ = 0.0;
};

inline namespace literals {
constexpr FrequencyHz operator""_Hz(long double v) { return FrequencyHz(static_cast<double>(v)); }
constexpr FrequencyHz operator""_MHz(long double v) { return FrequencyHz(static_cast<double>(v) * 1e6); }
constexpr FrequencyHz operator""_GHz(long double v) { return FrequencyHz(static_cast<double>(v) * 1e9); }
constexpr Seconds operator""_us(long double v) { return Seconds(static_cast<double>(v) * 1e-6); }
constexpr Seconds operator""_ns(long double v) { return Seconds(static_cast<double>(v) * 1e-9); }
constexpr PowerDbm operator""_dBm(long double v) { return PowerDbm(static_cast<double>(v)); }
}  // namespace literals

PowerWatts dbm_to_watts(PowerDbm p);
PowerDbm watts_to_dbm(PowerWatts p);

/// Linear power ratio of a dB value.
double db_to_linear(Decibels g);
Decibels linear_to_db(double ratio);

/// 50 ohm reference impedance used for every voltage/power conversion.
inline constexpr double kReferenceOhms = 50.0;

/// Peak amplitude of a sinusoid carrying power p into the reference impedance.
Volts tone_amplitude(PowerWatts p);

}  // namespace mxbolo
