#pragma once

// Scenario configuration: flat INI-style sections with key = value lines,
// parsed strictly (unknown keys are errors) into SI quantities. Config files
// use experimentalist units (MHz meaning omega/2pi, kHz, us, V/m, degrees,
// um); everything is converted once here.

#include <map>
#include <string>
#include <vector>

#include "drives.hpp"
#include "dynamics.hpp"
#include "effective.hpp"
#include "errors.hpp"
#include "trapmodel.hpp"

namespace fms {

enum class ScenarioKind {
    rabi_flop,
    amp_scan,
    detuning_scan,
    phase_scan,
    freq_compensation_scan,
    localization_scan,
    fidelity_vs_nbar,
    pulse_shaping_sweep,
    calibrate_efield,
    frame_equivalence_check,
};

std::string scenario_kind_name(ScenarioKind kind);
ScenarioKind scenario_kind_from_name(const std::string& name);

struct IonParams {
    double mass = 0.0;    // kg
    double charge = 0.0;  // C
};

struct ModesParams {
    double axial = 0.0;         // rad/s
    double radial1 = 0.0;       // rad/s
    double radial2 = 0.0;       // rad/s
    double radial_angle = 0.0;  // radians from the trap surface
};

struct GradientParams {
    double omega_g_rabi = 0.0;  // rad/s
    Branch branch = Branch::plus;
    double delta = 0.0;  // fixed gradient detuning, rad/s (freq-compensation-scan)
    bool has_delta = false;
};

struct EfieldParams {
    double amplitude = 0.0;     // V/m along the target mode (0 when rabi_direct set)
    double rabi_direct = 0.0;   // Omega_e given directly, rad/s (0 = derive from amplitude)
    double omega_e = 0.0;       // rad/s
    double phi_e = 0.0;         // radians
    double radial2_projection = 0.285;  // field projection ratio onto the second radial mode
};

struct EnvelopeParams {
    EnvelopeShape shape = EnvelopeShape::square;
    double ramp = 0.0;     // seconds
    double plateau = 0.0;  // seconds
    double ramp_cycles = 30.0;      // pulse-shaping-sweep: ramp duration in detuning cycles
    double plateau_cycles = 10.25;  // pulse-shaping-sweep: plateau in detuning cycles
};

struct SimParams {
    int n_fock = 60;
    double dt = 1e-9;  // seconds
    double nbar = 0.0;
    bool parallel = false;
    IntegratorMethod method = IntegratorMethod::cf4_exponential;
    Frame frame = Frame::displaced;
};

struct TrapParams {
    double ion_height = 80e-6;  // meters
    std::vector<ElectrodePatch> patches;
    std::vector<int> driven;            // 1-based electrode indices
    std::vector<double> drive_voltages; // volts
    std::vector<double> drive_phases;   // radians
    double pickup = 0.0;                // nearest-neighbour coupling, decays geometrically
};

struct ScanParams {
    double start = 0.0;
    double stop = 0.0;
    int points = 0;
    bool log_spacing = false;

    std::vector<double> grid() const;
};

struct BsbParams {
    double omega0 = 0.0;  // base blue-sideband Rabi rate, rad/s
    int flop_points = 128;
};

struct CheckParams {
    int sets = 24;
    unsigned long long seed = 20240901ULL;
};

struct Scenario {
    ScenarioKind kind = ScenarioKind::rabi_flop;
    std::string output_dir;

    IonParams ion;
    ModesParams modes;
    GradientParams gradient;
    EfieldParams efield;
    EnvelopeParams envelope;
    SimParams sim;
    TrapParams trap;
    ScanParams scan;
    BsbParams bsb;
    CheckParams check;

    // raw key/value echo for the run manifest
    std::map<std::string, std::map<std::string, std::string>> echo;
};

Scenario parse_config(const std::string& path);
Scenario parse_config_text(const std::string& text, const std::string& origin = "<string>");

// needed by trapmodel consumers: pickup matrix P_jk = pickup^{|j-k|}, diagonal 1
std::vector<std::vector<double>> pickup_matrix(size_t n_patches, double pickup);

}  // namespace fms
