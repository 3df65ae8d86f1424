#pragma once

// Heater-side filters and power delivery, probe-comb synthesis and binary
// trigger-pattern scheduling.

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mxbolo/trace.hpp"
#include "mxbolo/units.hpp"

namespace mxbolo {

struct FilterParams {
    FrequencyHz f_center;
    FrequencyHz fwhm;
    Decibels insertion_loss{0.0};
    Decibels stopband_floor{-17.9};

    void validate() const;
};

struct ToneSpec {
    FrequencyHz frequency;
    PowerDbm power;
    double phase_rad = 0.0;
};

struct PulseSpec {
    ToneSpec tone;
    Seconds t_start;
    Seconds duration;

    bool active_at(Seconds t) const { return t >= t_start && t < t_start + duration; }
};

/// bits[0] is the lowest probe frequency (leftmost digit of the label).
struct TriggerPattern {
    std::vector<bool> bits;

    std::size_t size() const { return bits.size(); }
    /// Binary value with bits[0] as the most significant digit.
    unsigned long value() const;
    static TriggerPattern from_value(unsigned long value, std::size_t n);

    friend bool operator==(const TriggerPattern&, const TriggerPattern&) = default;
};

TriggerPattern pattern_from_label(std::string_view text);
std::string pattern_to_label(const TriggerPattern& pattern);

/// Lorentzian passband scaled by the insertion loss, floored by the stopband
/// leakage. Linear power gain in (0, 1] for insertion loss <= 0 dB.
double filter_transmission(const FilterParams& filter, FrequencyHz f);

/// Same lineshape with the floor replaced (per bolometer/filter-pair leakage).
double filter_transmission(const FilterParams& filter, FrequencyHz f, Decibels floor);

/// Incoherent sum of the tones' powers through one channel's filter. When a
/// floor override is given it replaces the filter's own stopband floor.
PowerWatts heater_power_delivered(const FilterParams& filter, std::span<const ToneSpec> tones,
                                  std::optional<Decibels> floor_override = std::nullopt);
PowerWatts heater_power_delivered(std::span<const FilterParams> filters, std::span<const ToneSpec> tones,
                                  std::size_t channel);

/// v(t) = sum a_k cos(2 pi f_k t + phi_k), a_k = sqrt(2 P_k 50 ohm).
TimeTrace make_probe_comb(std::span<const ToneSpec> specs, FrequencyHz sample_rate, Seconds duration);

/// One pulse per set bit at the matching filter's center, identical timing.
std::vector<PulseSpec> schedule_heaters(const TriggerPattern& pattern, std::span<const FrequencyHz> filter_centers,
                                        PowerDbm power, Seconds t_start, Seconds duration);

}  // namespace mxbolo
