// Scenario runner CLI for the fms shared library. Uses only the public C API.
//
// Exit codes: 0 success, 2 config error, 3 numerical-validity failure,
// 4 singularity (resonance) error.

#include <cmath>
#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "fms/fms.h"

namespace {

int map_status(int status) {
    switch (status) {
        case FMS_OK:
        case FMS_ERR_CONFIG:
        case FMS_ERR_NUMERIC:
        case FMS_ERR_RESONANCE:
            return status;
        default:
            return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"forced-motion-sideband scenario runner"};
    app.set_version_flag("--version", std::string(fms_version()));

    std::string config_path;
    std::string output_dir;
    auto* run = app.add_subcommand("run", "run a scenario config and write CSV + manifest");
    run->add_option("config", config_path, "scenario configuration file")->required();
    run->add_option("-o,--output", output_dir, "override the output directory");

    double og = 0.0, oe = 0.0, wm = 0.0, we = 0.0;
    auto* eff = app.add_subcommand("omega-eff", "effective Rabi frequency, all inputs omega/2pi");
    eff->add_option("--omega-g-khz", og, "gradient Rabi frequency, kHz")->required();
    eff->add_option("--omega-e-mhz", oe, "electric Rabi frequency, MHz")->required();
    eff->add_option("--mode-mhz", wm, "motional mode frequency, MHz")->required();
    eff->add_option("--drive-mhz", we, "electric drive frequency, MHz")->required();

    app.require_subcommand(1);
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    if (run->parsed()) {
        fms_scenario* handle = nullptr;
        int status = fms_scenario_load(config_path.c_str(), &handle);
        if (status != FMS_OK) {
            std::fprintf(stderr, "error: %s\n", fms_last_error());
            return map_status(status);
        }
        std::printf("scenario: %s\n", fms_scenario_name(handle));
        status = fms_scenario_run(handle, output_dir.empty() ? nullptr : output_dir.c_str());
        if (status != FMS_OK) {
            std::fprintf(stderr, "error: %s\n", fms_last_error());
            fms_scenario_free(handle);
            return map_status(status);
        }
        fms_scenario_free(handle);
        std::printf("ok\n");
        return 0;
    }

    const double two_pi = 6.283185307179586;
    double out = 0.0;
    const int status = fms_omega_eff(two_pi * og * 1e3, two_pi * oe * 1e6, two_pi * wm * 1e6,
                                     two_pi * we * 1e6, &out);
    if (status != FMS_OK) {
        std::fprintf(stderr, "error: %s\n", fms_last_error());
        return map_status(status);
    }
    std::printf("omega_eff_hz %.9g\npi_time_us %.9g\n", out / two_pi,
                1e6 * 3.141592653589793 / std::abs(out));
    return 0;
}
