#include "drives.hpp"

#include <algorithm>
#include <cmath>

#include "constants.hpp"

namespace fms {

double Envelope::value(double t) const {
    const double tp = t - start_time;
    if (shape == EnvelopeShape::square) {
        return (tp >= 0.0 && tp < plateau_duration) ? 1.0 : 0.0;
    }
    if (tp < 0.0) return 0.0;
    if (tp < ramp_duration) {
        const double s = std::sin(constants::pi * tp / (2.0 * ramp_duration));
        return s * s;
    }
    if (tp < ramp_duration + plateau_duration) return 1.0;
    const double td = tp - ramp_duration - plateau_duration;
    if (td < ramp_duration) {
        const double s = std::sin(constants::pi * (ramp_duration - td) / (2.0 * ramp_duration));
        return s * s;
    }
    return 0.0;
}

double Envelope::end_time() const {
    if (shape == EnvelopeShape::square) return start_time + plateau_duration;
    return start_time + 2.0 * ramp_duration + plateau_duration;
}

void Envelope::validate() const {
    if (plateau_duration < 0.0) throw DomainError("Envelope: plateau_duration must be >= 0");
    if (shape == EnvelopeShape::sin2_ramp && ramp_duration <= 0.0)
        throw DomainError("Envelope: sin2_ramp requires ramp_duration > 0");
    if (shape == EnvelopeShape::square && ramp_duration != 0.0)
        throw DomainError("Envelope: square envelope must have ramp_duration 0");
}

void GradientDrive::validate() const {
    if (omega_g_rabi < 0.0) throw DomainError("GradientDrive: omega_g_rabi must be >= 0");
    if (!(t_on < t_off)) throw DomainError("GradientDrive: require t_on < t_off");
}

void ElectricDrive::validate() const {
    if (omega_e_rabi < 0.0) throw DomainError("ElectricDrive: omega_e_rabi must be >= 0");
    if (omega_e <= 0.0) throw DomainError("ElectricDrive: omega_e must be > 0");
    envelope.validate();
}

void PulseSequence::validate() const {
    if (total_duration <= 0.0) throw DomainError("PulseSequence: total_duration must be > 0");
    for (const auto& e : electric) e.validate();
    for (const auto& g : gradient) g.validate();
    if (!allow_early_gradient && !electric.empty() && !gradient.empty()) {
        const auto first = std::min_element(electric.begin(), electric.end(),
                                            [](const ElectricDrive& a, const ElectricDrive& b) {
                                                return a.envelope.start_time < b.envelope.start_time;
                                            });
        const double ramp_done = first->envelope.ramp_end();
        for (const auto& g : gradient) {
            if (g.t_on < ramp_done)
                throw DomainError(
                    "PulseSequence: gradient window starts before the electric ramp completes "
                    "(set allow_early_gradient to override)");
        }
    }
}

double PulseSequence::max_frequency_hz(double omega_m) const {
    double m = omega_m;
    for (const auto& e : electric) {
        m = std::max(m, e.omega_e);
        m = std::max(m, e.omega_e + omega_m);
    }
    for (const auto& g : gradient) m = std::max(m, std::abs(g.delta));
    return m / constants::two_pi;
}

void IntegratorConfig::validate(double max_frequency_hz) const {
    if (dt <= 0.0) throw ConfigError("IntegratorConfig: dt must be > 0");
    if (norm_check_every <= 0) throw ConfigError("IntegratorConfig: norm_check_every must be > 0");
    if (dt * max_frequency_hz > 0.02)
        throw ConfigError("IntegratorConfig: dt too large for the fastest drive frequency "
                          "(require dt * f_max <= 0.02)");
}

}  // namespace fms
