#include "trapmodel.hpp"

#include <cmath>
#include <complex>
#include <limits>

#include "constants.hpp"
#include "effective.hpp"

namespace fms {

namespace {

double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

}  // namespace

void ElectrodePatch::validate() const {
    if (!(x1 < x2) || !(y1 < y2))
        throw DomainError("ElectrodePatch: require x1 < x2 and y1 < y2");
}

void TrapLayout::validate() const {
    if (ion_height <= 0.0) throw DomainError("TrapLayout: ion_height must be > 0");
    for (const auto& p : patches) p.validate();
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            const double d = dot(mode_axes[i], mode_axes[j]) - (i == j ? 1.0 : 0.0);
            if (std::abs(d) > 1e-9)
                throw DomainError("TrapLayout: mode_axes must be orthonormal within 1e-9");
        }
        if (mode_freqs[i] <= 0.0) throw DomainError("TrapLayout: mode frequencies must be > 0");
    }
}

void ElectrodeDrive::validate(size_t n_patches) const {
    if (voltage_amplitude.size() != n_patches || phase.size() != n_patches)
        throw DomainError("ElectrodeDrive: one amplitude and phase per patch required");
    if (pickup.size() != n_patches)
        throw DomainError("ElectrodeDrive: pickup matrix must be square over the patches");
    for (size_t i = 0; i < n_patches; ++i) {
        if (pickup[i].size() != n_patches)
            throw DomainError("ElectrodeDrive: pickup matrix must be square over the patches");
        if (pickup[i][i] != 1.0)
            throw DomainError("ElectrodeDrive: pickup diagonal must be 1");
        for (size_t j = 0; j < n_patches; ++j) {
            if (i == j) continue;
            if (pickup[i][j] < 0.0 || pickup[i][j] >= 1.0)
                throw DomainError("ElectrodeDrive: off-diagonal pickup must be in [0, 1)");
        }
    }
}

double patch_potential(const Vec3& p, const ElectrodePatch& patch) {
    if (p.z <= 0.0) throw DomainError("patch_potential: point must be above the plane");
    const double u[2] = {patch.x1 - p.x, patch.x2 - p.x};
    const double v[2] = {patch.y1 - p.y, patch.y2 - p.y};
    const double z = p.z;
    double sum = 0.0;
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            const double sgn = ((i + j) % 2 == 0) ? 1.0 : -1.0;
            const double r = std::sqrt(u[i] * u[i] + v[j] * v[j] + z * z);
            sum += sgn * std::atan2(u[i] * v[j], z * r);
        }
    }
    return sum / constants::two_pi;
}

Vec3 patch_field(const Vec3& p, const ElectrodePatch& patch) {
    if (p.z <= 0.0) throw DomainError("patch_field: point must be above the plane");
    const double u[2] = {patch.x1 - p.x, patch.x2 - p.x};
    const double v[2] = {patch.y1 - p.y, patch.y2 - p.y};
    const double z = p.z;
    Vec3 e;
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            const double sgn = ((i + j) % 2 == 0) ? 1.0 : -1.0;
            const double r = std::sqrt(u[i] * u[i] + v[j] * v[j] + z * z);
            // E = -grad Phi of the corner arctangent terms
            e.x += sgn * z * v[j] / (r * (z * z + u[i] * u[i]));
            e.y += sgn * z * u[i] / (r * (z * z + v[j] * v[j]));
            e.z += sgn * u[i] * v[j] * (r * r + z * z) /
                   (r * (z * z + u[i] * u[i]) * (z * z + v[j] * v[j]));
        }
    }
    e.x /= constants::two_pi;
    e.y /= constants::two_pi;
    e.z /= constants::two_pi;
    return e;
}

std::vector<ProfilePoint> omega_eff_profile(const TrapLayout& layout, const ElectrodeDrive& drive,
                                            double omega_g_rabi, double omega_e, int mode_index,
                                            const std::vector<double>& axial_positions,
                                            double mass, double charge) {
    layout.validate();
    drive.validate(layout.patches.size());
    if (mode_index < 0 || mode_index > 2)
        throw DomainError("omega_eff_profile: mode_index must be 0, 1 or 2");
    const double wm = layout.mode_freqs[mode_index];
    if (omega_e == wm)
        throw ResonanceError("omega_eff_profile: drive resonant with the target mode");

    const size_t np = layout.patches.size();
    // pickup-weighted complex voltage on each patch
    std::vector<std::complex<double>> volts(np, 0.0);
    for (size_t j = 0; j < np; ++j) {
        for (size_t k = 0; k < np; ++k) {
            volts[j] += drive.pickup[j][k] * drive.voltage_amplitude[k] *
                        std::exp(std::complex<double>(0.0, drive.phase[k]));
        }
    }

    const FockSpace space(2, wm, mass, charge);
    const double e_to_rabi = charge * space.r0() / constants::hbar;  // Omega_e per (V/m)
    const Vec3& axis = layout.mode_axes[mode_index];

    std::vector<ProfilePoint> profile;
    profile.reserve(axial_positions.size());
    for (double x : axial_positions) {
        const Vec3 ion{x, 0.0, layout.ion_height};
        std::complex<double> ex = 0.0, ey = 0.0, ez = 0.0;
        for (size_t j = 0; j < np; ++j) {
            if (volts[j] == 0.0) continue;
            const Vec3 f = patch_field(ion, layout.patches[j]);
            ex += volts[j] * f.x;
            ey += volts[j] * f.y;
            ez += volts[j] * f.z;
        }
        const std::complex<double> proj = ex * axis.x + ey * axis.y + ez * axis.z;
        const double omega_e_rabi = e_to_rabi * std::abs(proj);
        profile.push_back({x, std::abs(omega_eff(omega_g_rabi, omega_e_rabi, wm, omega_e))});
    }
    return profile;
}

double suppression_ratio(const std::vector<ProfilePoint>& profile, double x_ref, double x_far) {
    const ProfilePoint* ref = nullptr;
    const ProfilePoint* far = nullptr;
    auto matches = [](double a, double b) {
        return std::abs(a - b) <= 1e-12 + 1e-9 * std::max(std::abs(a), std::abs(b));
    };
    for (const auto& p : profile) {
        if (matches(p.position, x_ref)) ref = &p;
        if (matches(p.position, x_far)) far = &p;
    }
    if (!ref || !far)
        throw UsageError("suppression_ratio: both positions must be present in the profile");
    if (far->omega_eff_abs == 0.0) return std::numeric_limits<double>::infinity();
    return ref->omega_eff_abs / far->omega_eff_abs;
}

double field_from_slope(double slope, const FockSpace& space) {
    if (slope < 0.0) throw DomainError("field_from_slope: slope must be >= 0");
    return 2.0 * constants::hbar * slope / (space.charge * space.r0());
}

}  // namespace fms
