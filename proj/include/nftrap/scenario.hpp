#pragma once

// Scenario files: flat key = value pairs grouped in [section] headers,
// '#' comments. All physical parameters are validated on load; the builtin
// defaults encode the reference trap (500-nm silica fiber, 25 mW blue at
// 780 nm, 2 x 2.2 mW red standing wave at 1064 nm, crossed polarization).

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>

#include "nftrap/constants.hpp"
#include "nftrap/io.hpp"
#include "nftrap/loading.hpp"
#include "nftrap/trap_potential.hpp"

namespace nftrap {

struct Scenario {
    // [fiber]
    double fiber_radius_nm = 250.0;
    // [blue] / [red]
    double blue_wavelength_nm = 780.0;
    double blue_power_mw = 25.0;
    double blue_pol_angle_deg = 0.0;
    double red_wavelength_nm = 1064.0;
    double red_power_per_direction_mw = 2.2;
    double red_pol_angle_deg = 90.0;
    bool red_standing_wave = true;
    double c3_surface = 0.0;           // J m^3
    // [polarimetry]
    int n_scatterers = 10000;
    double scatter_z_span_mm = 1.0;
    double scatter_surface_fraction = 0.8;
    double background_fraction = 0.0;  // incoherent floor / coherent peak
    int scan_points = 37;
    // [mc]
    int n_trajectories = 10000;
    double adiabaticity = 0.1;
    double hold_periods = 10.0;
    int n_e0 = 6;
    double e0_min_frac = 0.10, e0_max_frac = 0.85;
    int n_u_low = 8;
    double u_low_min_frac = 0.02, u_low_max_frac = 0.90;
    // [thermometry]
    double synthetic_t_uk = 30.0;
    double synthetic_p_max = 0.92;
    double synthetic_noise = 0.02;
    int dos_points = 48;
    int dos_samples = 40000;
    // [loading]
    double r_max_per_s = 1000.0;
    double gamma_per_s = 1.0;
    double beta2_cm3_per_s = 1e-10;
    double volume_cm3 = 2.7e-16;
    double sigma_mot_mm = 0.21;
    double mot_center_mm = 0.0;
    double sites_per_um = 4.0;
    double load_duration_ms = 50.0;
    double optical_depth = 1.0;
    double clip_fraction = 0.23;
    long occupancy_sites = 10000;

    TrapConfiguration trap_configuration() const {
        TrapConfiguration cfg;
        cfg.fiber_radius = fiber_radius_nm * 1e-9;
        cfg.blue = {blue_wavelength_nm * 1e-9, blue_power_mw * 1e-3,
                    blue_pol_angle_deg * pi / 180.0};
        cfg.red = {red_wavelength_nm * 1e-9, red_power_per_direction_mw * 1e-3,
                   red_pol_angle_deg * pi / 180.0};
        cfg.red_standing_wave = red_standing_wave;
        cfg.c3_surface = c3_surface;
        cfg.validate();
        return cfg;
    }

    LoadingModel loading_model() const {
        LoadingModel m;
        m.r_max = r_max_per_s;
        m.z0 = mot_center_mm * 1e-3;
        m.sigma_mot = sigma_mot_mm * 1e-3;
        m.gamma = gamma_per_s;
        m.beta2 = beta2_cm3_per_s;
        m.volume = volume_cm3;
        m.site_density = sites_per_um * 1e6;
        m.duration = load_duration_ms * 1e-3;
        m.validate();
        return m;
    }

    void validate() const {
        trap_configuration();
        loading_model();
        if (n_scatterers < 4 || scan_points < 8)
            throw std::invalid_argument("scenario: polarimetry sampling too small");
        if (n_trajectories < 100 || n_e0 < 2 || n_u_low < 2)
            throw std::invalid_argument("scenario: Monte-Carlo grids too small");
        if (!(e0_min_frac > 0) || !(e0_max_frac < 1) || e0_min_frac >= e0_max_frac)
            throw std::invalid_argument("scenario: E0 grid must lie inside (0, 1)");
        if (!(u_low_min_frac >= 0) || !(u_low_max_frac <= 1) ||
            u_low_min_frac >= u_low_max_frac)
            throw std::invalid_argument("scenario: U_low grid must lie inside [0, 1]");
        if (!(synthetic_t_uk > 0) || !(synthetic_p_max > 0) || synthetic_p_max > 1)
            throw std::invalid_argument("scenario: bad synthetic survival parameters");
        if (!(clip_fraction > 0) || clip_fraction > 1)
            throw std::invalid_argument("scenario: clip fraction in (0, 1]");
        if (background_fraction < 0)
            throw std::invalid_argument("scenario: background fraction must be >= 0");
    }

    // Canonical serialization; also the hashing basis.
    std::string serialize() const;
    std::uint64_t hash(std::uint64_t seed) const {
        return fnv1a64(serialize()) ^ (0x9e3779b97f4a7c15ULL * (seed + 1));
    }

    static Scenario from_file(const std::string& path);
    static Scenario from_string(const std::string& text);
};

namespace detail {

inline std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    size_t b = s.find_last_not_of(" \t\r");
    if (a == std::string::npos) return "";
    return s.substr(a, b - a + 1);
}

} // namespace detail

inline std::string Scenario::serialize() const {
    std::ostringstream o;
    auto kv = [&](const char* k, double v) { o << k << " = " << format_double(v) << "\n"; };
    o << "[fiber]\n";
    kv("radius_nm", fiber_radius_nm);
    o << "[blue]\n";
    kv("wavelength_nm", blue_wavelength_nm);
    kv("power_mw", blue_power_mw);
    kv("pol_angle_deg", blue_pol_angle_deg);
    o << "[red]\n";
    kv("wavelength_nm", red_wavelength_nm);
    kv("power_per_direction_mw", red_power_per_direction_mw);
    kv("pol_angle_deg", red_pol_angle_deg);
    o << "standing_wave = " << (red_standing_wave ? 1 : 0) << "\n";
    kv("c3_surface", c3_surface);
    o << "[polarimetry]\n";
    kv("n_scatterers", n_scatterers);
    kv("z_span_mm", scatter_z_span_mm);
    kv("surface_fraction", scatter_surface_fraction);
    kv("background_fraction", background_fraction);
    kv("scan_points", scan_points);
    o << "[mc]\n";
    kv("n_trajectories", n_trajectories);
    kv("adiabaticity", adiabaticity);
    kv("hold_periods", hold_periods);
    kv("n_e0", n_e0);
    kv("e0_min_frac", e0_min_frac);
    kv("e0_max_frac", e0_max_frac);
    kv("n_u_low", n_u_low);
    kv("u_low_min_frac", u_low_min_frac);
    kv("u_low_max_frac", u_low_max_frac);
    o << "[thermometry]\n";
    kv("synthetic_t_uk", synthetic_t_uk);
    kv("synthetic_p_max", synthetic_p_max);
    kv("synthetic_noise", synthetic_noise);
    kv("dos_points", dos_points);
    kv("dos_samples", dos_samples);
    o << "[loading]\n";
    kv("r_max_per_s", r_max_per_s);
    kv("gamma_per_s", gamma_per_s);
    kv("beta2_cm3_per_s", beta2_cm3_per_s);
    kv("volume_cm3", volume_cm3);
    kv("sigma_mot_mm", sigma_mot_mm);
    kv("mot_center_mm", mot_center_mm);
    kv("sites_per_um", sites_per_um);
    kv("duration_ms", load_duration_ms);
    kv("optical_depth", optical_depth);
    kv("clip_fraction", clip_fraction);
    kv("occupancy_sites", double(occupancy_sites));
    return o.str();
}

inline Scenario Scenario::from_string(const std::string& text) {
    Scenario sc;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[' && line.back() == ']') {
            section = detail::trim(line.substr(1, line.size() - 2));
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("scenario line " + std::to_string(lineno) +
                                        ": expected key = value");
        const std::string key = section + "." + detail::trim(line.substr(0, eq));
        const std::string val = detail::trim(line.substr(eq + 1));
        const double x = std::stod(val);
        if (key == "fiber.radius_nm") sc.fiber_radius_nm = x;
        else if (key == "blue.wavelength_nm") sc.blue_wavelength_nm = x;
        else if (key == "blue.power_mw") sc.blue_power_mw = x;
        else if (key == "blue.pol_angle_deg") sc.blue_pol_angle_deg = x;
        else if (key == "red.wavelength_nm") sc.red_wavelength_nm = x;
        else if (key == "red.power_per_direction_mw") sc.red_power_per_direction_mw = x;
        else if (key == "red.pol_angle_deg") sc.red_pol_angle_deg = x;
        else if (key == "red.standing_wave") sc.red_standing_wave = x != 0.0;
        else if (key == "red.c3_surface") sc.c3_surface = x;
        else if (key == "polarimetry.n_scatterers") sc.n_scatterers = int(x);
        else if (key == "polarimetry.z_span_mm") sc.scatter_z_span_mm = x;
        else if (key == "polarimetry.surface_fraction") sc.scatter_surface_fraction = x;
        else if (key == "polarimetry.background_fraction") sc.background_fraction = x;
        else if (key == "polarimetry.scan_points") sc.scan_points = int(x);
        else if (key == "mc.n_trajectories") sc.n_trajectories = int(x);
        else if (key == "mc.adiabaticity") sc.adiabaticity = x;
        else if (key == "mc.hold_periods") sc.hold_periods = x;
        else if (key == "mc.n_e0") sc.n_e0 = int(x);
        else if (key == "mc.e0_min_frac") sc.e0_min_frac = x;
        else if (key == "mc.e0_max_frac") sc.e0_max_frac = x;
        else if (key == "mc.n_u_low") sc.n_u_low = int(x);
        else if (key == "mc.u_low_min_frac") sc.u_low_min_frac = x;
        else if (key == "mc.u_low_max_frac") sc.u_low_max_frac = x;
        else if (key == "thermometry.synthetic_t_uk") sc.synthetic_t_uk = x;
        else if (key == "thermometry.synthetic_p_max") sc.synthetic_p_max = x;
        else if (key == "thermometry.synthetic_noise") sc.synthetic_noise = x;
        else if (key == "thermometry.dos_points") sc.dos_points = int(x);
        else if (key == "thermometry.dos_samples") sc.dos_samples = int(x);
        else if (key == "loading.r_max_per_s") sc.r_max_per_s = x;
        else if (key == "loading.gamma_per_s") sc.gamma_per_s = x;
        else if (key == "loading.beta2_cm3_per_s") sc.beta2_cm3_per_s = x;
        else if (key == "loading.volume_cm3") sc.volume_cm3 = x;
        else if (key == "loading.sigma_mot_mm") sc.sigma_mot_mm = x;
        else if (key == "loading.mot_center_mm") sc.mot_center_mm = x;
        else if (key == "loading.sites_per_um") sc.sites_per_um = x;
        else if (key == "loading.duration_ms") sc.load_duration_ms = x;
        else if (key == "loading.optical_depth") sc.optical_depth = x;
        else if (key == "loading.clip_fraction") sc.clip_fraction = x;
        else if (key == "loading.occupancy_sites") sc.occupancy_sites = long(x);
        else
            throw std::invalid_argument("scenario line " + std::to_string(lineno) +
                                        ": unknown key '" + key + "'");
    }
    sc.validate();
    return sc;
}

inline Scenario Scenario::from_file(const std::string& path) {
    return from_string(read_file(path));
}

} // namespace nftrap
