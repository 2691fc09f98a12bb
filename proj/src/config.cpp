#include "config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "constants.hpp"

namespace fms {

namespace {

using constants::two_pi;

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

struct Ini {
    // section -> key -> value, with consumption tracking for strictness
    std::map<std::string, std::map<std::string, std::string>> data;
    std::set<std::pair<std::string, std::string>> consumed;

    bool has(const std::string& sec, const std::string& key) const {
        auto s = data.find(sec);
        return s != data.end() && s->second.count(key) > 0;
    }

    std::string take(const std::string& sec, const std::string& key) {
        consumed.insert({sec, key});
        return data.at(sec).at(key);
    }

    double take_double(const std::string& sec, const std::string& key) {
        const std::string v = take(sec, key);
        try {
            size_t pos = 0;
            const double d = std::stod(v, &pos);
            if (trim(v.substr(pos)).empty()) return d;
        } catch (...) {
        }
        throw ConfigError("config: key '" + key + "' in [" + sec + "] must be a number, got '" +
                          v + "'");
    }

    double number(const std::string& sec, const std::string& key, double fallback) {
        return has(sec, key) ? take_double(sec, key) : fallback;
    }

    int integer(const std::string& sec, const std::string& key, int fallback) {
        if (!has(sec, key)) return fallback;
        const double d = take_double(sec, key);
        if (d != std::floor(d))
            throw ConfigError("config: key '" + key + "' in [" + sec + "] must be an integer");
        return int(d);
    }

    std::string text(const std::string& sec, const std::string& key, const std::string& fallback) {
        return has(sec, key) ? trim(take(sec, key)) : fallback;
    }

    bool boolean(const std::string& sec, const std::string& key, bool fallback) {
        if (!has(sec, key)) return fallback;
        const std::string v = trim(take(sec, key));
        if (v == "true" || v == "1" || v == "yes") return true;
        if (v == "false" || v == "0" || v == "no") return false;
        throw ConfigError("config: key '" + key + "' in [" + sec + "] must be true or false");
    }

    std::vector<double> number_list(const std::string& sec, const std::string& key) {
        std::vector<double> out;
        std::stringstream ss(take(sec, key));
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (item.empty())
                throw ConfigError("config: empty list element for '" + key + "' in [" + sec + "]");
            try {
                size_t pos = 0;
                out.push_back(std::stod(item, &pos));
                if (!trim(item.substr(pos)).empty()) throw ConfigError("");
            } catch (...) {
                throw ConfigError("config: key '" + key + "' in [" + sec +
                                  "] must be a comma-separated number list");
            }
        }
        if (out.empty())
            throw ConfigError("config: key '" + key + "' in [" + sec + "] must not be empty");
        return out;
    }

    void reject_unconsumed() const {
        for (const auto& [sec, kv] : data) {
            for (const auto& [key, value] : kv) {
                (void)value;
                if (!consumed.count({sec, key}))
                    throw ConfigError("config: unknown key '" + key + "' in section [" + sec +
                                      "] for this scenario");
            }
        }
    }
};

Ini parse_ini(const std::string& text, const std::string& origin) {
    Ini ini;
    std::string section;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto comment = line.find_first_of("#;");
        if (comment != std::string::npos) line = line.substr(0, comment);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": malformed section");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty())
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty section name");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
        if (section.empty())
            throw ConfigError(origin + ":" + std::to_string(lineno) +
                              ": key outside any [section]");
        if (ini.data[section].count(key))
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key +
                              "'");
        ini.data[section][key] = value;
    }
    return ini;
}

double mhz(double v) { return two_pi * v * 1e6; }
double khz(double v) { return two_pi * v * 1e3; }
double us(double v) { return v * 1e-6; }
double um(double v) { return v * 1e-6; }
double deg(double v) { return v * constants::pi / 180.0; }

const std::map<std::string, ScenarioKind> kScenarioNames = {
    {"rabi-flop", ScenarioKind::rabi_flop},
    {"amp-scan", ScenarioKind::amp_scan},
    {"detuning-scan", ScenarioKind::detuning_scan},
    {"phase-scan", ScenarioKind::phase_scan},
    {"freq-compensation-scan", ScenarioKind::freq_compensation_scan},
    {"localization-scan", ScenarioKind::localization_scan},
    {"fidelity-vs-nbar", ScenarioKind::fidelity_vs_nbar},
    {"pulse-shaping-sweep", ScenarioKind::pulse_shaping_sweep},
    {"calibrate-efield", ScenarioKind::calibrate_efield},
    {"frame-equivalence-check", ScenarioKind::frame_equivalence_check},
};

struct ScanDefaults {
    double start, stop;
    int points;
    bool log_spacing = false;
};

ScanDefaults scan_defaults(ScenarioKind kind) {
    switch (kind) {
        case ScenarioKind::rabi_flop: return {0.0, 500.0, 126};         // us
        case ScenarioKind::amp_scan: return {0.2, 1.2, 6};              // V/m
        case ScenarioKind::detuning_scan: return {2.35, 3.05, 29};      // MHz
        case ScenarioKind::phase_scan: return {0.0, 337.5, 16};         // degrees
        case ScenarioKind::freq_compensation_scan: return {2.07, 2.13, 41};  // MHz
        case ScenarioKind::localization_scan: return {0.0, 500.0, 51};  // um
        case ScenarioKind::fidelity_vs_nbar: return {0.0, 1.0, 3};      // nbar
        case ScenarioKind::pulse_shaping_sweep: return {50.0, 200.0, 3, true};  // kHz
        case ScenarioKind::calibrate_efield: return {4.0, 10.0, 4};     // half motional periods
        case ScenarioKind::frame_equivalence_check: return {0.0, 0.0, 0};
    }
    return {0.0, 0.0, 0};
}

int default_n_fock(ScenarioKind kind) {
    switch (kind) {
        case ScenarioKind::fidelity_vs_nbar: return 150;
        case ScenarioKind::pulse_shaping_sweep: return 192;
        case ScenarioKind::calibrate_efield: return 144;
        case ScenarioKind::frame_equivalence_check: return 40;
        default: return 60;
    }
}

Frame default_frame(ScenarioKind kind) {
    switch (kind) {
        case ScenarioKind::fidelity_vs_nbar:
        case ScenarioKind::pulse_shaping_sweep:
        case ScenarioKind::calibrate_efield:
            return Frame::bare;
        default:
            return Frame::displaced;
    }
}

bool uses_efield_keys(ScenarioKind kind) {
    return kind != ScenarioKind::frame_equivalence_check;
}

bool uses_trap_keys(ScenarioKind kind) { return kind == ScenarioKind::localization_scan; }

}  // namespace

std::string scenario_kind_name(ScenarioKind kind) {
    for (const auto& [name, k] : kScenarioNames)
        if (k == kind) return name;
    return "?";
}

ScenarioKind scenario_kind_from_name(const std::string& name) {
    auto it = kScenarioNames.find(name);
    if (it == kScenarioNames.end())
        throw ConfigError("config: unknown scenario name '" + name + "'");
    return it->second;
}

std::vector<double> ScanParams::grid() const {
    std::vector<double> g;
    g.reserve(points);
    if (points == 1) {
        g.push_back(start);
        return g;
    }
    for (int i = 0; i < points; ++i) {
        if (log_spacing) {
            g.push_back(start * std::pow(stop / start, double(i) / double(points - 1)));
        } else {
            g.push_back(start + (stop - start) * double(i) / double(points - 1));
        }
    }
    return g;
}

std::vector<std::vector<double>> pickup_matrix(size_t n_patches, double pickup) {
    std::vector<std::vector<double>> m(n_patches, std::vector<double>(n_patches, 0.0));
    for (size_t i = 0; i < n_patches; ++i) {
        m[i][i] = 1.0;
        for (size_t j = 0; j < n_patches; ++j) {
            if (i == j) continue;
            m[i][j] = pickup == 0.0 ? 0.0 : std::pow(pickup, double(i > j ? i - j : j - i));
        }
    }
    return m;
}

Scenario parse_config_text(const std::string& text, const std::string& origin) {
    Ini ini = parse_ini(text, origin);

    Scenario s;
    if (!ini.has("scenario", "name"))
        throw ConfigError("config: missing key 'name' in section [scenario]");
    s.kind = scenario_kind_from_name(trim(ini.take("scenario", "name")));
    s.output_dir = ini.text("scenario", "output_dir", "out-" + scenario_kind_name(s.kind));

    // [ion]
    const double mass_amu = ini.number("ion", "mass_amu", constants::ca40_mass_amu);
    const double charge_e = ini.number("ion", "charge_e", 1.0);
    if (mass_amu <= 0.0 || charge_e <= 0.0)
        throw ConfigError("config: [ion] mass_amu and charge_e must be > 0");
    s.ion.mass = mass_amu * constants::amu;
    s.ion.charge = charge_e * constants::elementary_charge;

    // [modes]
    s.modes.axial = mhz(ini.number("modes", "axial_mhz", 1.0));
    s.modes.radial1 = mhz(ini.number("modes", "radial1_mhz", 2.6));
    s.modes.radial2 = mhz(ini.number("modes", "radial2_mhz", 2.8));
    s.modes.radial_angle = deg(ini.number("modes", "radial_angle_deg", 45.0));
    if (s.modes.axial <= 0.0 || s.modes.radial1 <= 0.0 || s.modes.radial2 <= 0.0)
        throw ConfigError("config: [modes] frequencies must be > 0 (MHz)");

    // [gradient]
    s.gradient.omega_g_rabi = khz(ini.number("gradient", "omega_g_khz", 0.5));
    if (s.gradient.omega_g_rabi < 0.0)
        throw ConfigError("config: [gradient] omega_g_khz must be >= 0");
    const std::string branch = ini.text("gradient", "branch", "plus");
    if (branch == "plus") {
        s.gradient.branch = Branch::plus;
    } else if (branch == "minus") {
        s.gradient.branch = Branch::minus;
    } else {
        throw ConfigError("config: [gradient] branch must be 'plus' or 'minus'");
    }
    if (ini.has("gradient", "delta_mhz")) {
        if (s.kind != ScenarioKind::freq_compensation_scan)
            throw ConfigError("config: [gradient] delta_mhz is only valid for "
                              "freq-compensation-scan");
        s.gradient.delta = mhz(ini.take_double("gradient", "delta_mhz"));
        s.gradient.has_delta = true;
    } else if (s.kind == ScenarioKind::freq_compensation_scan) {
        s.gradient.delta = mhz(2.1);
        s.gradient.has_delta = true;
    }

    // [efield]
    if (uses_efield_keys(s.kind)) {
        const bool has_e = ini.has("efield", "amplitude_v_per_m");
        const bool has_awg = ini.has("efield", "awg_amplitude");
        const bool has_rabi = ini.has("efield", "omega_e_rabi_mhz");
        if (int(has_e) + int(has_awg) + int(has_rabi) > 1)
            throw ConfigError("config: [efield] give exactly one of amplitude_v_per_m, "
                              "awg_amplitude, omega_e_rabi_mhz");
        if (has_awg) {
            if (!ini.has("efield", "volts_per_unit"))
                throw ConfigError("config: [efield] awg_amplitude requires volts_per_unit "
                                  "((V/m at the ion) per AWG unit)");
            s.efield.amplitude = ini.take_double("efield", "awg_amplitude") *
                                 ini.take_double("efield", "volts_per_unit");
        } else if (has_rabi) {
            s.efield.rabi_direct = mhz(ini.take_double("efield", "omega_e_rabi_mhz"));
            if (s.efield.rabi_direct < 0.0)
                throw ConfigError("config: [efield] omega_e_rabi_mhz must be >= 0");
        } else {
            s.efield.amplitude = ini.number("efield", "amplitude_v_per_m", 1.2);
        }
        if (s.kind == ScenarioKind::calibrate_efield) {
            if (ini.has("efield", "omega_e_mhz"))
                throw ConfigError("config: calibrate-efield drives the mode resonantly; "
                                  "omega_e_mhz is not a valid key here");
            s.efield.omega_e = s.modes.radial1;
        } else {
            s.efield.omega_e = mhz(ini.number("efield", "omega_e_mhz", 2.5));
        }
        s.efield.phi_e = deg(ini.number("efield", "phi_e_deg", 0.0));
        s.efield.radial2_projection = ini.number("efield", "radial2_projection", 0.285);
        if (s.efield.omega_e <= 0.0)
            throw ConfigError("config: [efield] omega_e_mhz must be > 0");
    }

    // [envelope]
    const std::string shape = ini.text("envelope", "shape", "square");
    if (shape == "square") {
        s.envelope.shape = EnvelopeShape::square;
    } else if (shape == "sin2") {
        s.envelope.shape = EnvelopeShape::sin2_ramp;
    } else {
        throw ConfigError("config: [envelope] shape must be 'square' or 'sin2'");
    }
    s.envelope.ramp = us(ini.number("envelope", "ramp_us", 0.0));
    s.envelope.plateau = us(ini.number("envelope", "plateau_us", 0.0));
    if (s.kind == ScenarioKind::pulse_shaping_sweep) {
        s.envelope.ramp_cycles = ini.number("envelope", "ramp_cycles", 30.0);
        s.envelope.plateau_cycles = ini.number("envelope", "plateau_cycles", 10.25);
        if (s.envelope.ramp_cycles <= 0.0 || s.envelope.plateau_cycles < 0.0)
            throw ConfigError("config: [envelope] ramp_cycles must be > 0");
    }
    if (s.envelope.shape == EnvelopeShape::sin2_ramp && s.envelope.ramp <= 0.0 &&
        s.kind != ScenarioKind::pulse_shaping_sweep)
        throw ConfigError("config: [envelope] sin2 shape requires ramp_us > 0");

    // [sim]
    s.sim.n_fock = ini.integer("sim", "n_fock", default_n_fock(s.kind));
    if (s.sim.n_fock < 2) throw ConfigError("config: [sim] n_fock must be >= 2");
    s.sim.dt = ini.number("sim", "dt_ns", 1.0) * 1e-9;
    if (s.sim.dt <= 0.0) throw ConfigError("config: [sim] dt_ns must be > 0");
    s.sim.nbar = ini.number("sim", "nbar", 0.0);
    if (s.sim.nbar < 0.0) throw ConfigError("config: [sim] nbar must be >= 0");
    s.sim.parallel = ini.boolean("sim", "parallel", false);
    const std::string method = ini.text("sim", "method", "cf4");
    if (method == "cf4") {
        s.sim.method = IntegratorMethod::cf4_exponential;
    } else if (method == "midpoint") {
        s.sim.method = IntegratorMethod::midpoint_exponential;
    } else if (method == "rk4") {
        s.sim.method = IntegratorMethod::rk4_fixed;
    } else {
        throw ConfigError("config: [sim] method must be cf4, midpoint or rk4");
    }
    const std::string frame = ini.text("sim", "frame", "");
    if (frame.empty()) {
        s.sim.frame = default_frame(s.kind);
    } else if (frame == "bare") {
        s.sim.frame = Frame::bare;
    } else if (frame == "displaced") {
        s.sim.frame = Frame::displaced;
    } else {
        throw ConfigError("config: [sim] frame must be 'bare' or 'displaced'");
    }
    // [trap]
    if (uses_trap_keys(s.kind)) {
        s.trap.ion_height = um(ini.number("trap", "ion_height_um", 80.0));
        int k = 1;
        while (ini.has("trap", "electrode" + std::to_string(k))) {
            const auto vals = ini.number_list("trap", "electrode" + std::to_string(k));
            if (vals.size() != 4)
                throw ConfigError("config: [trap] electrode" + std::to_string(k) +
                                  " needs x1_um, x2_um, y1_um, y2_um");
            ElectrodePatch p{um(vals[0]), um(vals[1]), um(vals[2]), um(vals[3]),
                             "electrode" + std::to_string(k)};
            s.trap.patches.push_back(p);
            ++k;
        }
        if (s.trap.patches.empty()) {
            // default linear section: 7 patches, 100 um pitch, 100 um wide
            for (int j = -3; j <= 3; ++j) {
                ElectrodePatch p{um(j * 100.0 - 50.0), um(j * 100.0 + 50.0), um(-50.0), um(50.0),
                                 "electrode" + std::to_string(j + 4)};
                s.trap.patches.push_back(p);
            }
        }
        if (ini.has("trap", "driven")) {
            for (double d : ini.number_list("trap", "driven")) {
                if (d != std::floor(d) || d < 1.0 || d > double(s.trap.patches.size()))
                    throw ConfigError("config: [trap] driven must list 1-based electrode indices");
                s.trap.driven.push_back(int(d));
            }
        } else {
            s.trap.driven.push_back(int(s.trap.patches.size() + 1) / 2);
        }
        if (ini.has("trap", "drive_voltages_v")) {
            s.trap.drive_voltages = ini.number_list("trap", "drive_voltages_v");
        } else {
            s.trap.drive_voltages.assign(s.trap.driven.size(), 1.0);
        }
        if (ini.has("trap", "drive_phases_deg")) {
            for (double p : ini.number_list("trap", "drive_phases_deg"))
                s.trap.drive_phases.push_back(deg(p));
        } else {
            s.trap.drive_phases.assign(s.trap.driven.size(), 0.0);
        }
        if (s.trap.drive_voltages.size() != s.trap.driven.size() ||
            s.trap.drive_phases.size() != s.trap.driven.size())
            throw ConfigError("config: [trap] driven, drive_voltages_v and drive_phases_deg "
                              "must have matching lengths");
        s.trap.pickup = ini.number("trap", "pickup", 0.0);
        if (s.trap.pickup < 0.0 || s.trap.pickup >= 1.0)
            throw ConfigError("config: [trap] pickup must be in [0, 1)");
    }

    // [scan]
    const ScanDefaults sd = scan_defaults(s.kind);
    s.scan.start = ini.number("scan", "start", sd.start);
    s.scan.stop = ini.number("scan", "stop", sd.stop);
    s.scan.points = ini.integer("scan", "points", sd.points);
    const std::string spacing = ini.text("scan", "spacing", sd.log_spacing ? "log" : "linear");
    if (spacing == "log") {
        s.scan.log_spacing = true;
        if (s.scan.start <= 0.0)
            throw ConfigError("config: [scan] log spacing requires start > 0");
    } else if (spacing != "linear") {
        throw ConfigError("config: [scan] spacing must be 'linear' or 'log'");
    }
    if (s.kind != ScenarioKind::frame_equivalence_check) {
        if (s.scan.points < 1) throw ConfigError("config: [scan] points must be >= 1");
        if (s.scan.points > 1 && !(s.scan.stop > s.scan.start))
            throw ConfigError("config: [scan] require stop > start");
    }

    // [bsb]
    if (s.kind == ScenarioKind::calibrate_efield) {
        s.bsb.omega0 = khz(ini.number("bsb", "omega0_khz", 20.0));
        if (s.bsb.omega0 <= 0.0) throw ConfigError("config: [bsb] omega0_khz must be > 0");
        s.bsb.flop_points = ini.integer("bsb", "flop_points", 128);
        if (s.bsb.flop_points < 16)
            throw ConfigError("config: [bsb] flop_points must be >= 16");
    }

    // [check]
    if (s.kind == ScenarioKind::frame_equivalence_check) {
        s.check.sets = ini.integer("check", "sets", 24);
        if (s.check.sets < 1) throw ConfigError("config: [check] sets must be >= 1");
        const double seed = ini.number("check", "seed", 20240901.0);
        if (seed < 0.0 || seed != std::floor(seed))
            throw ConfigError("config: [check] seed must be a non-negative integer");
        s.check.seed = (unsigned long long)(seed);
    }

    ini.reject_unconsumed();

    // resonance rejected at the parse boundary where the scan cannot move off it
    if (uses_efield_keys(s.kind) && s.kind != ScenarioKind::calibrate_efield &&
        s.kind != ScenarioKind::detuning_scan &&
        s.kind != ScenarioKind::freq_compensation_scan &&
        s.kind != ScenarioKind::pulse_shaping_sweep) {
        for (double wm : {s.modes.axial, s.modes.radial1, s.modes.radial2}) {
            if (s.efield.omega_e == wm)
                throw ResonanceError("config: omega_e_mhz coincides exactly with a motional "
                                     "mode; the dispersive interaction is singular there");
        }
    }
    if (s.kind == ScenarioKind::detuning_scan || s.kind == ScenarioKind::freq_compensation_scan) {
        for (double v : s.scan.grid()) {
            const double w = mhz(v);
            for (double wm : {s.modes.axial, s.modes.radial1, s.modes.radial2}) {
                if (w == wm)
                    throw ResonanceError("config: [scan] grid point " + std::to_string(v) +
                                         " MHz coincides exactly with a motional mode");
            }
        }
    }

    s.echo = ini.data;
    return s;
}

Scenario parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), path);
}

}  // namespace fms
