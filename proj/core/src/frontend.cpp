#include "mxbolo/frontend.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "mxbolo/error.hpp"

namespace mxbolo {

void FilterParams::validate() const {
    if (!(fwhm.value() > 0.0)) {
        throw InvalidArgument("filter fwhm must be > 0");
    }
    if (!(f_center.value() > 0.0)) {
        throw InvalidArgument("filter center must be > 0");
    }
    if (!(stopband_floor < insertion_loss)) {
        throw InvalidArgument("filter stopband floor must lie below the insertion loss");
    }
}

unsigned long TriggerPattern::value() const {
    unsigned long v = 0;
    for (bool b : bits) {
        v = (v << 1) | (b ? 1ul : 0ul);
    }
    return v;
}

TriggerPattern TriggerPattern::from_value(unsigned long value, std::size_t n) {
    TriggerPattern p;
    p.bits.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        p.bits[n - 1 - i] = ((value >> i) & 1ul) != 0;
    }
    return p;
}

TriggerPattern pattern_from_label(std::string_view text) {
    if (text.empty()) {
        throw ParseError(0, "empty trigger pattern");
    }
    TriggerPattern p;
    p.bits.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] != '0' && text[i] != '1') {
            throw ParseError(0, "invalid character '" + std::string(1, text[i]) + "' at position " +
                                    std::to_string(i) + " of trigger pattern");
        }
        p.bits.push_back(text[i] == '1');
    }
    return p;
}

std::string pattern_to_label(const TriggerPattern& pattern) {
    std::string s;
    s.reserve(pattern.bits.size());
    for (bool b : pattern.bits) {
        s.push_back(b ? '1' : '0');
    }
    return s;
}

double filter_transmission(const FilterParams& filter, FrequencyHz f, Decibels floor) {
    const double x = 2.0 * (f - filter.f_center).value() / filter.fwhm.value();
    const double passband = db_to_linear(filter.insertion_loss) / (1.0 + x * x);
    return std::max(passband, db_to_linear(floor));
}

double filter_transmission(const FilterParams& filter, FrequencyHz f) {
    return filter_transmission(filter, f, filter.stopband_floor);
}

PowerWatts heater_power_delivered(const FilterParams& filter, std::span<const ToneSpec> tones,
                                  std::optional<Decibels> floor_override) {
    const Decibels floor = floor_override.value_or(filter.stopband_floor);
    double total = 0.0;
    for (const ToneSpec& tone : tones) {
        total += dbm_to_watts(tone.power).value() * filter_transmission(filter, tone.frequency, floor);
    }
    return PowerWatts(total);
}

PowerWatts heater_power_delivered(std::span<const FilterParams> filters, std::span<const ToneSpec> tones,
                                  std::size_t channel) {
    if (channel >= filters.size()) {
        throw InvalidArgument("heater_power_delivered: channel index out of range");
    }
    return heater_power_delivered(filters[channel], tones);
}

TimeTrace make_probe_comb(std::span<const ToneSpec> specs, FrequencyHz sample_rate, Seconds duration) {
    if (!(sample_rate.value() > 0.0) || !(duration.value() > 0.0)) {
        throw ConfigurationError("probe comb needs positive sample rate and duration");
    }
    for (const ToneSpec& s : specs) {
        if (!(2.0 * s.frequency.value() < sample_rate.value())) {
            std::ostringstream msg;
            msg << "probe tone at " << s.frequency.value() << " Hz violates Nyquist for sample rate "
                << sample_rate.value() << " Hz";
            throw ConfigurationError(msg.str());
        }
    }
    const auto n = static_cast<std::size_t>(std::llround(duration.value() * sample_rate.value()));
    TimeTrace trace{sample_rate, Seconds(0.0), std::vector<double>(n, 0.0), std::nullopt};
    const double fs = sample_rate.value();
    for (const ToneSpec& s : specs) {
        const double a = tone_amplitude(dbm_to_watts(s.power)).value();
        const double f = s.frequency.value();
        for (std::size_t i = 0; i < n; ++i) {
            // f * i is exact for integer-Hz tones, so the phase stays exact over long records.
            const double cycles = std::fmod(f * static_cast<double>(i), fs) / fs;
            trace.samples[i] += a * std::cos(2.0 * std::numbers::pi * cycles + s.phase_rad);
        }
    }
    return trace;
}

std::vector<PulseSpec> schedule_heaters(const TriggerPattern& pattern, std::span<const FrequencyHz> filter_centers,
                                        PowerDbm power, Seconds t_start, Seconds duration) {
    if (pattern.size() != filter_centers.size()) {
        throw InvalidArgument("trigger pattern has " + std::to_string(pattern.size()) + " bits but the chip has " +
                              std::to_string(filter_centers.size()) + " heater filters");
    }
    if (!(duration.value() > 0.0) || t_start.value() < 0.0) {
        throw ConfigurationError("heater pulse needs t_start >= 0 and duration > 0");
    }
    std::vector<PulseSpec> pulses;
    for (std::size_t i = 0; i < pattern.size(); ++i) {
        if (pattern.bits[i]) {
            pulses.push_back(PulseSpec{ToneSpec{filter_centers[i], power, 0.0}, t_start, duration});
        }
    }
    return pulses;
}

}  // namespace mxbolo
