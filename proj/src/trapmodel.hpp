#pragma once

// Surface-electrode electrostatics in the gapless-plane approximation:
// closed-form field of rectangular patches held at unit potential in a
// grounded plane, projection onto motional modes, Omega_eff-vs-position
// localization profiles with electrode pickup, and the E-field calibration
// inversion.

#include <array>
#include <string>
#include <vector>

#include "statespace.hpp"

namespace fms {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;
};

struct ElectrodePatch {
    double x1, x2;  // axial extent, meters
    double y1, y2;  // transverse extent, meters
    std::string label;

    void validate() const;
};

struct TrapLayout {
    std::vector<ElectrodePatch> patches;
    double ion_height = 0.0;             // meters above the plane
    std::array<Vec3, 3> mode_axes;       // orthonormal unit vectors
    std::array<double, 3> mode_freqs;    // rad/s

    void validate() const;
};

struct ElectrodeDrive {
    std::vector<double> voltage_amplitude;        // volts, per patch
    std::vector<double> phase;                    // radians, per patch
    std::vector<std::vector<double>> pickup;      // diagonal 1, off-diagonal [0,1)

    void validate(size_t n_patches) const;
};

// Potential of the patch held at 1 V in a grounded plane (solid-angle form).
double patch_potential(const Vec3& point, const ElectrodePatch& patch);

// Analytic gradient of the potential: field in V/m per volt applied.
// Throws DomainError on or below the plane.
Vec3 patch_field(const Vec3& point, const ElectrodePatch& patch);

struct ProfilePoint {
    double position;        // meters along the trap axis
    double omega_eff_abs;   // rad/s
};

// |Omega_eff| versus axial ion position for the pickup-weighted phased drive,
// projected on mode `mode_index`. Mode frequencies and orientations are held
// fixed across positions.
std::vector<ProfilePoint> omega_eff_profile(const TrapLayout& layout, const ElectrodeDrive& drive,
                                            double omega_g_rabi, double omega_e, int mode_index,
                                            const std::vector<double>& axial_positions,
                                            double mass, double charge);

double suppression_ratio(const std::vector<ProfilePoint>& profile, double x_ref, double x_far);

// E = 2 hbar slope / (q r0); exact inverse of resonant_slope.
double field_from_slope(double slope, const FockSpace& space);

}  // namespace fms
