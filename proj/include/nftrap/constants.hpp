#pragma once

// Physical constants, cesium atomic data and material dispersion used
// throughout the toolkit. SI units everywhere unless a name says otherwise.

#include <cmath>
#include <numbers>

namespace nftrap {

inline constexpr double pi = std::numbers::pi;

namespace constants {

// CODATA 2018 (exact SI values where applicable), 6+ significant figures.
inline constexpr double h_planck = 6.62607015e-34;    // J s
inline constexpr double hbar     = 1.054571817e-34;   // J s
inline constexpr double k_B      = 1.380649e-23;      // J/K
inline constexpr double c_light  = 2.99792458e8;      // m/s
inline constexpr double eps0     = 8.8541878128e-12;  // F/m

} // namespace constants

// Cesium-133 data (D-line values from the standard alkali data tables).
namespace cesium {

inline constexpr double mass = 2.20690e-25;           // kg

inline constexpr double lambda_d1 = 894.593e-9;       // m, 6S1/2 -> 6P1/2
inline constexpr double lambda_d2 = 852.347e-9;       // m, 6S1/2 -> 6P3/2
inline constexpr double gamma_d1  = 2.87430e7;        // 1/s, natural linewidth
inline constexpr double gamma_d2  = 3.28890e7;        // 1/s

inline double omega_d1() { return 2.0 * pi * constants::c_light / lambda_d1; }
inline double omega_d2() { return 2.0 * pi * constants::c_light / lambda_d2; }

// Ground-state scalar polarizability from the two dominant D lines,
// alpha(w) = 2 pi eps0 c^3 sum_k w_k Gamma_k / (w0k^2 (w0k^2 - w^2)),
// with line-strength weights 1 (D1) and 2 (D2) for a J=1/2 ground state.
// Both rotating and counter-rotating terms are kept. Positive below the
// D1 resonance (attractive light shift), negative above D2 (repulsive).
inline double scalar_polarizability(double omega) {
    using namespace constants;
    const double w1 = omega_d1();
    const double w2 = omega_d2();
    const double pref = 2.0 * pi * eps0 * c_light * c_light * c_light;
    return pref * (gamma_d1 / (w1 * w1 * (w1 * w1 - omega * omega)) +
                   2.0 * gamma_d2 / (w2 * w2 * (w2 * w2 - omega * omega)));
}

inline double scalar_polarizability_wavelength(double lambda_vac) {
    return scalar_polarizability(2.0 * pi * constants::c_light / lambda_vac);
}

} // namespace cesium

// Fused-silica refractive index, three-term Sellmeier form (Malitson).
// Valid 0.21-3.7 um; wavelength in meters.
inline double silica_index(double lambda_vac) {
    const double um = lambda_vac * 1e6;
    const double l2 = um * um;
    const double n2 = 1.0
        + 0.6961663 * l2 / (l2 - 0.0684043 * 0.0684043)
        + 0.4079426 * l2 / (l2 - 0.1162414 * 0.1162414)
        + 0.8974794 * l2 / (l2 - 9.896161 * 9.896161);
    return std::sqrt(n2);
}

} // namespace nftrap
