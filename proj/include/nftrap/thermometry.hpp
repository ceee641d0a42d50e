#pragma once

// Ensemble thermometry: density of states of a trapping site, the integrated
// three-dimensional Boltzmann distribution built on it, the two-parameter
// (T, p_max) survival fit, and harmonic-oscillator occupation/localization
// numbers at a given temperature.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "nftrap/constants.hpp"
#include "nftrap/dynamics.hpp"
#include "nftrap/errors.hpp"
#include "nftrap/levmar.hpp"
#include "nftrap/rng.hpp"

namespace nftrap {

struct DensityOfStates {
    std::vector<double> energy;   // J, ascending, within (0, U0]
    std::vector<double> g;        // 1/J
    double depth = 0.0;           // U0 (J)
    double mc_rel_error = 0.0;    // largest per-point MC error estimate

    double g_of(double e) const {
        if (e <= 0.0) return 0.0;
        if (e <= energy.front()) {
            // harmonic bottom: g ~ E^2
            const double t = e / energy.front();
            return g.front() * t * t;
        }
        if (e >= energy.back()) return g.back();
        const auto it = std::upper_bound(energy.begin(), energy.end(), e);
        const size_t i = size_t(it - energy.begin());
        const double t = (e - energy[i - 1]) / (energy[i] - energy[i - 1]);
        return g[i - 1] + t * (g[i] - g[i - 1]);
    }

    // integral of g(E) w(E) dE over (0, upper] by composite trapezoid. The
    // step grid is anchored to the full depth so partial integrals are exact
    // prefix sums: P(E0, T) is then monotone in E0 to machine precision.
    template <class W>
    double integrate(double upper, W w, int n = 2000) const {
        upper = std::min(upper, depth);
        if (upper <= 0.0) return 0.0;
        const double de = depth / n;
        double sum = 0.0;
        double prev = 0.0;  // g(0) w(0) -> g(0)=0
        double e_prev = 0.0;
        for (int i = 1; i <= n + 1; ++i) {
            const double e = std::min(de * i, upper);
            const double cur = g_of(e) * w(e);
            sum += 0.5 * (prev + cur) * (e - e_prev);
            prev = cur;
            e_prev = e;
            if (e >= upper) break;
        }
        return sum;
    }

    double partition(double temperature) const {
        const double kt = constants::k_B * temperature;
        return integrate(depth, [kt](double e) { return std::exp(-e / kt); });
    }

    // P(E0, T): fraction of the trapped Boltzmann ensemble with E < E0.
    double cumulative(double e0, double temperature) const {
        if (e0 <= 0.0) return 0.0;
        const double kt = constants::k_B * temperature;
        const double num = integrate(e0, [kt](double e) { return std::exp(-e / kt); });
        const double z = partition(temperature);
        return std::min(num / z, 1.0);
    }

    // dP/dT at fixed E0 (for the fit Jacobian).
    double cumulative_dT(double e0, double temperature) const {
        const double kt = constants::k_B * temperature;
        const double z = partition(temperature);
        const double num = integrate(e0, [kt](double e) { return std::exp(-e / kt); });
        const double dnum = integrate(e0, [kt](double e) { return e * std::exp(-e / kt); });
        const double dz = integrate(depth, [kt](double e) { return e * std::exp(-e / kt); });
        const double f = 1.0 / (constants::k_B * temperature * temperature);
        return f * (dnum / z - (num / z) * (dz / z));
    }
};

// g(E) = 2 pi (2M)^{3/2} / h^3  *  integral over {U < E} of sqrt(E - U) d^3r,
// evaluated by stratified Monte-Carlo (4x4x4 strata) over an energy-adapted
// box around the site, one box per grid energy so the acceptance fraction
// stays O(1) down to small E.
template <class Pot>
DensityOfStates compute_dos(const Pot& pot, const Vec3& site_pos,
                            const std::vector<double>& e_grid, double depth,
                            int n_per_energy = 40000, std::uint64_t seed = 7) {
    for (double e : e_grid)
        if (!(e > 0.0) || e >= depth)
            throw EnergyOutOfRange("compute_dos: E grid must lie in (0, U0)");
    DensityOfStates dos;
    dos.depth = depth;
    dos.energy = e_grid;
    std::sort(dos.energy.begin(), dos.energy.end());
    const double mass = pot.atom_mass();
    const double pref = 2.0 * pi * std::pow(2.0 * mass, 1.5) /
                        std::pow(constants::h_planck, 3);

    dos.g.resize(dos.energy.size());
    double worst = 0.0;
    const int ns = 4;
    const int per = std::max(n_per_energy / (ns * ns * ns), 8);
    for (size_t ie = 0; ie < dos.energy.size(); ++ie) {
        const double e = dos.energy[ie];
        const SamplingRegion cell = sampling_region(pot, site_pos, e, depth);
        const double vol = 8.0 * cell.half_width[0] * cell.half_width[1] * cell.half_width[2];
        Rng rng = Rng::substream(seed, ie);
        double mean = 0.0, var = 0.0;
        for (int sx = 0; sx < ns; ++sx)
            for (int sy = 0; sy < ns; ++sy)
                for (int sz = 0; sz < ns; ++sz) {
                    double acc = 0.0, acc2 = 0.0;
                    for (int k = 0; k < per; ++k) {
                        const double fx = (sx + rng.uniform()) / ns;
                        const double fy = (sy + rng.uniform()) / ns;
                        const double fz = (sz + rng.uniform()) / ns;
                        const Vec3 p = cell.center +
                                       cell.axis_r * ((2.0 * fx - 1.0) * cell.half_width[0]) +
                                       cell.axis_phi * ((2.0 * fy - 1.0) * cell.half_width[1]) +
                                       cell.axis_z * ((2.0 * fz - 1.0) * cell.half_width[2]);
                        const double du = pot.energy(p, 1.0) - cell.u_min;
                        const double d = e - du;
                        if (d > 0.0) {
                            acc += std::sqrt(d);
                            acc2 += d;
                        }
                    }
                    const double m1 = acc / per;
                    const double m2 = acc2 / per;
                    mean += m1 / (ns * ns * ns);
                    var += std::max(m2 - m1 * m1, 0.0) /
                           (double(per) * ns * ns * ns * double(ns) * ns * ns);
                }
        dos.g[ie] = pref * vol * mean;
        if (mean > 0.0) worst = std::max(worst, std::sqrt(var) / mean);
    }
    dos.mc_rel_error = worst;
    return dos;
}

// Analytic density of states of a 3D harmonic well (test oracle and the
// E << U0 closed form): g(E) = E^2 / (2 h^3 nu_r nu_z nu_phi).
inline double harmonic_dos(double e, double nu1, double nu2, double nu3) {
    return e * e / (2.0 * std::pow(constants::h_planck, 3) * nu1 * nu2 * nu3);
}

// Closed-form harmonic cumulative in the E0 << U0 limit:
// P = 1 - e^{-x}(1 + x + x^2/2), x = E0 / kT.
inline double harmonic_cumulative(double e0, double temperature) {
    const double x = e0 / (constants::k_B * temperature);
    return 1.0 - std::exp(-x) * (1.0 + x + 0.5 * x * x);
}

// ---------------------------------------------------------------------------
// Survival-curve temperature fit
// ---------------------------------------------------------------------------

struct SurvivalSample {
    double u_low_frac = 0.0;   // U_low / U0
    double fraction = 0.0;     // remaining-atom fraction
    double stderr_f = 0.01;
};

// Ingestion from the `U_low_over_U0,fraction,stderr` CSV layout (any table
// type with .column(name) and .rows works, e.g. CsvTable from io.hpp).
template <class Table>
std::vector<SurvivalSample> survival_from_table(const Table& t) {
    const int cu = t.column("U_low_over_U0");
    const int cf = t.column("fraction");
    const int cs = t.column("stderr");
    if (cu < 0 || cf < 0)
        throw DegenerateData("survival_from_table: missing required columns");
    std::vector<SurvivalSample> out;
    for (const auto& row : t.rows) {
        SurvivalSample s;
        s.u_low_frac = row[cu];
        s.fraction = row[cf];
        s.stderr_f = (cs >= 0 && size_t(cs) < row.size()) ? row[cs] : 0.01;
        out.push_back(s);
    }
    return out;
}

struct TemperatureFit {
    double temperature = 0.0;       // K
    double p_max = 0.0;
    double sigma_temperature = 0.0;
    double sigma_p_max = 0.0;
    double covariance[4] = {0, 0, 0, 0};  // row-major 2x2 (T, p_max)
    double chi2 = 0.0;
    double kT_over_u0 = 0.0;
};

// Model: fraction(U_low) = p_max * P(E0(U_esc), T) with U_esc = U_low (the
// minimum depth reached is the escape-threshold variable) and E0 from the
// fitted escape polynomial.
inline TemperatureFit fit_temperature(const std::vector<SurvivalSample>& data,
                                      const EscapePolynomial& poly,
                                      const DensityOfStates& dos) {
    if (data.size() < 5)
        throw DegenerateData("fit_temperature: need >= 5 survival points");
    double fmin = 1e300, fmax = -1e300;
    for (const auto& s : data) {
        fmin = std::min(fmin, s.fraction);
        fmax = std::max(fmax, s.fraction);
    }
    if (fmax - fmin < 1e-6)
        throw DegenerateData("fit_temperature: all fractions equal "
                             "(T -> 0 limit or saturated data)");

    const double u0 = dos.depth;
    const int m = int(data.size());
    std::vector<double> e0s(m);
    for (int i = 0; i < m; ++i)
        e0s[i] = u0 * poly.forward(data[i].u_low_frac);

    auto model = [&](const std::vector<double>& p, std::vector<double>& r,
                     std::vector<double>& jac) {
        const double t = std::abs(p[0]), pmax = p[1];
        for (int i = 0; i < m; ++i) {
            const double sg = std::max(data[i].stderr_f, 1e-4);
            const double cp = dos.cumulative(e0s[i], t);
            r[i] = (pmax * cp - data[i].fraction) / sg;
            jac[i * 2 + 0] = pmax * dos.cumulative_dT(e0s[i], t) / sg *
                             ((p[0] >= 0) ? 1.0 : -1.0);
            jac[i * 2 + 1] = cp / sg;
        }
    };
    const double t_init = 0.08 * u0 / constants::k_B;
    auto res = levmar_fit(model, {t_init, std::max(fmax, 0.1)}, m);
    if (!res.converged)
        throw FitNonconvergence("fit_temperature: no convergence");
    TemperatureFit out;
    out.temperature = std::abs(res.params[0]);
    out.p_max = res.params[1];
    out.sigma_temperature = res.sigma[0];
    out.sigma_p_max = res.sigma[1];
    if (res.covariance.size() == 4)
        for (int i = 0; i < 4; ++i) out.covariance[i] = res.covariance[i];
    out.chi2 = res.chi2;
    out.kT_over_u0 = constants::k_B * out.temperature / u0;
    return out;
}

// ---------------------------------------------------------------------------
// Occupation numbers, localization widths, Lamb-Dicke parameter
// ---------------------------------------------------------------------------

struct OccupationReport {
    double n_r = 0.0, n_z = 0.0, n_phi = 0.0;        // mean vibrational quanta
    double width_r = 0.0, width_z = 0.0, width_phi = 0.0;  // full 1/sqrt(e) widths 2*sigma (m)
    double sigma0_z = 0.0;                            // ground-state width (m)
    double volume = 0.0;                              // m^3
    double lamb_dicke = 0.0;                          // k_probe * sigma0_z
};

inline double mean_occupation(double nu, double temperature) {
    const double x = constants::h_planck * nu / (constants::k_B * temperature);
    return 1.0 / std::expm1(x);
}

inline OccupationReport occupation_report(double temperature, double nu_r, double nu_z,
                                          double nu_phi, double mass = cesium::mass,
                                          double probe_wavelength = cesium::lambda_d2) {
    if (!(temperature > 0.0) || !(nu_r > 0.0) || !(nu_z > 0.0) || !(nu_phi > 0.0))
        throw std::invalid_argument("occupation_report: T and frequencies must be > 0");
    OccupationReport rep;
    rep.n_r = mean_occupation(nu_r, temperature);
    rep.n_z = mean_occupation(nu_z, temperature);
    rep.n_phi = mean_occupation(nu_phi, temperature);
    auto width = [&](double nu, double n) {
        const double s0 = std::sqrt(constants::hbar / (2.0 * mass * 2.0 * pi * nu));
        return 2.0 * s0 * std::sqrt(2.0 * n + 1.0);
    };
    rep.width_r = width(nu_r, rep.n_r);
    rep.width_z = width(nu_z, rep.n_z);
    rep.width_phi = width(nu_phi, rep.n_phi);
    rep.sigma0_z = std::sqrt(constants::hbar / (2.0 * mass * 2.0 * pi * nu_z));
    rep.volume = rep.width_r * rep.width_z * rep.width_phi;
    rep.lamb_dicke = (2.0 * pi / probe_wavelength) * rep.sigma0_z;
    return rep;
}

} // namespace nftrap
