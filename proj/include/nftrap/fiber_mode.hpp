#pragma once

// Fundamental HE11 mode of a two-layer step-index cylinder (silica core,
// vacuum cladding) and its vector field.
//
// Field convention (used by every module): complex amplitudes with time
// dependence exp(i beta z - i omega t); the physical field is Re[E e^{-iwt}]
// and the intensity of a field in vacuum is I = eps0 c |E|^2 / 2. Cylindrical
// components are (E_r, E_phi, E_z).
//
// The quasi-linearly polarized mode is the equal superposition of the two
// counter-rotating HE11 solutions; its transverse polarization plane lies
// at the angle `pol_angle` measured from the x-axis.

#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "nftrap/constants.hpp"
#include "nftrap/errors.hpp"

namespace nftrap {

struct FiberSpec {
    double radius = 250e-9;     // core radius a (m)
    double n_core = 1.45;
    double n_clad = 1.0;
    double wavelength = 1064e-9; // vacuum wavelength (m)

    void validate() const {
        if (!(radius > 0.0)) throw std::invalid_argument("FiberSpec: radius must be > 0");
        if (!(wavelength > 0.0)) throw std::invalid_argument("FiberSpec: wavelength must be > 0");
        if (!(n_core > n_clad) || !(n_clad >= 1.0))
            throw std::invalid_argument("FiberSpec: need n_core > n_clad >= 1");
    }

    double k0() const { return 2.0 * pi / wavelength; }
    // Normalized frequency V = k0 a sqrt(n_core^2 - n_clad^2).
    double v_number() const {
        return k0() * radius * std::sqrt(n_core * n_core - n_clad * n_clad);
    }

    // Convenience: silica-core fiber in vacuum, index from the Sellmeier fit.
    static FiberSpec silica_in_vacuum(double radius, double wavelength) {
        FiberSpec s;
        s.radius = radius;
        s.wavelength = wavelength;
        s.n_core = silica_index(wavelength);
        s.n_clad = 1.0;
        return s;
    }
};

struct CylComplexField {
    std::complex<double> e_r{0.0, 0.0};
    std::complex<double> e_phi{0.0, 0.0};
    std::complex<double> e_z{0.0, 0.0};
};

// Signed real radial amplitudes of the quasi-circular HE11 mode and their
// radial derivatives. The complex components are assembled from these as
//   E = (i er, -ep, ez) e^{i phi + i beta z},  H = (-hr, -i hp, i hz) e^{...}.
struct RadialField {
    double er = 0.0, ep = 0.0, ez = 0.0;
    double der = 0.0, dep = 0.0, dez = 0.0;
};

namespace detail {

inline double j0(double x) { return std::cyl_bessel_j(0.0, x); }
inline double j1(double x) { return std::cyl_bessel_j(1.0, x); }
inline double j2(double x) { return std::cyl_bessel_j(2.0, x); }
inline double k0b(double x) { return std::cyl_bessel_k(0.0, x); }
inline double k1b(double x) { return std::cyl_bessel_k(1.0, x); }
inline double k2b(double x) { return std::cyl_bessel_k(2.0, x); }

// K1'(y) / (y K1(y)) without overflow/underflow for large argument.
inline double k_log_ratio(double y) {
    if (y > 500.0) {
        // K0/K1 ~ 1 - 1/(2y) + 3/(8y^2) from the large-argument expansions.
        const double r = 1.0 - 0.5 / y + 0.375 / (y * y);
        return (-r - 1.0 / y) / y;
    }
    const double k1v = k1b(y);
    return (-k0b(y) - k1v / y) / (y * k1v);
}

inline double j_log_ratio(double x) {
    const double j1v = j1(x);
    return (j0(x) - j1v / x) / (x * j1v);
}

// HE/EH eigenvalue function for azimuthal order 1: zero at guided modes.
// Parametrized by the in-core transverse parameter x in (0, V); the cladding
// parameter is y = sqrt(V^2 - x^2). Poles sit at the zeros of J1.
inline double he_eigenvalue_x(const FiberSpec& spec, double x) {
    const double v = spec.v_number();
    const double y = std::sqrt(std::max(v * v - x * x, 0.0));
    const double n1 = spec.n_core, n2 = spec.n_clad;
    const double ka = spec.k0() * spec.radius;
    const double neff2 = n1 * n1 - (x / ka) * (x / ka);
    const double jj = j_log_ratio(x);
    const double kk = k_log_ratio(y);
    const double inv = 1.0 / (x * x) + 1.0 / (y * y);
    return (jj + kk) * (n1 * n1 * jj + n2 * n2 * kk) - neff2 * inv * inv;
}

inline double he_eigenvalue_terms(const FiberSpec& spec, double x) {
    const double v = spec.v_number();
    const double y = std::sqrt(std::max(v * v - x * x, 0.0));
    const double n1 = spec.n_core, n2 = spec.n_clad;
    const double ka = spec.k0() * spec.radius;
    const double neff2 = n1 * n1 - (x / ka) * (x / ka);
    const double jj = j_log_ratio(x);
    const double kk = k_log_ratio(y);
    const double inv = 1.0 / (x * x) + 1.0 / (y * y);
    return std::abs((jj + kk) * (n1 * n1 * jj + n2 * n2 * kk)) + std::abs(neff2 * inv * inv);
}

} // namespace detail

class GuidedMode {
public:
    // Solves the exact HE11 eigenvalue problem. The root is bracketed by a
    // 2048-point scan of the eigenvalue function over the transverse
    // parameter (uniform in x = h a, which resolves the near-core-index
    // region that a uniform beta grid misses in the bulk limit) and refined
    // by bisection to 1e-13 relative in n_eff. Field amplitudes are scaled
    // so that the axial Poynting flux equals `power`.
    static GuidedMode solve_he11(const FiberSpec& spec, double power = 1.0,
                                 double pol_angle = 0.0) {
        spec.validate();
        const double v = spec.v_number();
        const int n_scan = 2048;
        const double x_lo = std::max(1e-3, v * 1e-6);
        const double x_hi = v * (1.0 - 1e-9);

        double root_x = -1.0;
        double f_prev = detail::he_eigenvalue_x(spec, x_lo);
        double x_prev = x_lo;
        for (int i = 1; i <= n_scan; ++i) {
            const double x = x_lo + (x_hi - x_lo) * double(i) / n_scan;
            const double f = detail::he_eigenvalue_x(spec, x);
            if (std::isfinite(f_prev) && std::isfinite(f) && f_prev * f < 0.0) {
                double lo = x_prev, hi = x, flo = f_prev;
                for (int it = 0; it < 200 && (hi - lo) > 1e-15 * v; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    const double fm = detail::he_eigenvalue_x(spec, mid);
                    if (flo * fm <= 0.0) hi = mid; else { lo = mid; flo = fm; }
                }
                const double cand = 0.5 * (lo + hi);
                const double resid = std::abs(detail::he_eigenvalue_x(spec, cand)) /
                                     detail::he_eigenvalue_terms(spec, cand);
                if (resid < 1e-8) { root_x = cand; break; }  // else: pole of J1, keep scanning
            }
            f_prev = f;
            x_prev = x;
        }
        if (root_x < 0.0)
            throw BracketingFailure("solve_he11: no root of the eigenvalue equation in ("
                                    + std::to_string(spec.n_clad) + ", "
                                    + std::to_string(spec.n_core) + ")");
        return GuidedMode(spec, root_x, power, pol_angle);
    }

    const FiberSpec& spec() const { return spec_; }
    double beta() const { return beta_; }
    double n_eff() const { return n_eff_; }
    double pol_angle() const { return pol_angle_; }
    double power() const { return power_; }
    double omega() const { return 2.0 * pi * constants::c_light / spec_.wavelength; }
    // Evanescent decay constant q outside the core (1/m).
    double decay_constant() const { return q_; }

    // Normalized residual of the eigenvalue equation at the returned root.
    double dispersion_residual() const {
        const double x = h_ * spec_.radius;
        return std::abs(detail::he_eigenvalue_x(spec_, x)) /
               detail::he_eigenvalue_terms(spec_, x);
    }

    // Signed radial amplitudes of the electric field (see RadialField).
    RadialField e_profile(double r) const {
        RadialField f;
        const double A = amp_;
        if (r < spec_.radius) {
            const double u = h_ * r;
            const double j0 = detail::j0(u), j1v = detail::j1(u), j2 = detail::j2(u);
            const double ce = A * beta_ / (2.0 * h_);
            f.er = ce * ((1.0 - s_par_) * j0 - (1.0 + s_par_) * j2);
            f.ep = ce * ((1.0 - s_par_) * j0 + (1.0 + s_par_) * j2);
            f.ez = A * j1v;
            const double dj0 = -j1v;
            const double dj2 = (u > 1e-30) ? (j1v - 2.0 * j2 / u) : 0.0;
            f.der = ce * h_ * ((1.0 - s_par_) * dj0 - (1.0 + s_par_) * dj2);
            f.dep = ce * h_ * ((1.0 - s_par_) * dj0 + (1.0 + s_par_) * dj2);
            f.dez = A * h_ * (j0 - ((u > 1e-30) ? j1v / u : 0.0));
        } else {
            const double w = q_ * r;
            if (w > 650.0) return f;  // field underflows double range
            const double K0 = detail::k0b(w), K1 = detail::k1b(w), K2 = detail::k2b(w);
            const double co = amp_ * rho_cl_ * beta_ / (2.0 * q_);
            f.er = co * ((1.0 - s_par_) * K0 + (1.0 + s_par_) * K2);
            f.ep = co * ((1.0 - s_par_) * K0 - (1.0 + s_par_) * K2);
            f.ez = A * rho_cl_ * K1;
            const double dK0 = -K1;
            const double dK2 = -K1 - 2.0 * K2 / w;
            f.der = co * q_ * ((1.0 - s_par_) * dK0 + (1.0 + s_par_) * dK2);
            f.dep = co * q_ * ((1.0 - s_par_) * dK0 - (1.0 + s_par_) * dK2);
            f.dez = A * rho_cl_ * q_ * (-K0 - K1 / w);
        }
        return f;
    }

    // Magnetic-field radial amplitudes (hr, hp, hz packed in er/ep/ez slots);
    // needed for Poynting-flux integrals.
    RadialField h_profile(double r) const {
        RadialField f;
        const double wmu0 = omega() / (constants::eps0 * constants::c_light * constants::c_light);
        const double A = amp_;
        if (r < spec_.radius) {
            const double u = h_ * r;
            const double j0 = detail::j0(u), j1v = detail::j1(u), j2 = detail::j2(u);
            const double ch = A * beta_ * beta_ * s_par_ / (2.0 * wmu0 * h_);
            f.er = ch * ((1.0 - sigma1_) * j0 - (1.0 + sigma1_) * j2);
            f.ep = ch * ((1.0 - sigma1_) * j0 + (1.0 + sigma1_) * j2);
            f.ez = A * (beta_ / wmu0) * s_par_ * j1v;
        } else {
            const double w = q_ * r;
            if (w > 650.0) return f;
            const double K0 = detail::k0b(w), K1 = detail::k1b(w), K2 = detail::k2b(w);
            const double ch = amp_ * rho_cl_ * beta_ * beta_ * s_par_ / (2.0 * wmu0 * q_);
            f.er = ch * ((1.0 - sigma2_) * K0 + (1.0 + sigma2_) * K2);
            f.ep = ch * ((1.0 - sigma2_) * K0 - (1.0 + sigma2_) * K2);
            f.ez = A * rho_cl_ * (beta_ / wmu0) * s_par_ * K1;
        }
        return f;
    }

    // Complex cylindrical E-field of the quasi-linear mode propagating in +z.
    CylComplexField field(double r, double phi, double z) const {
        return field_with_plane(r, phi, z, pol_angle_);
    }

    CylComplexField field_with_plane(double r, double phi, double z, double plane) const {
        const RadialField f = e_profile(r);
        const double c = std::cos(phi - plane), s = std::sin(phi - plane);
        const std::complex<double> ph = std::exp(std::complex<double>(0.0, beta_ * z));
        const double rt2 = std::sqrt(2.0);
        CylComplexField out;
        out.e_r   = std::complex<double>(0.0, rt2 * f.er * c) * ph;
        out.e_phi = std::complex<double>(0.0, -rt2 * f.ep * s) * ph;
        out.e_z   = std::complex<double>(rt2 * f.ez * c, 0.0) * ph;
        return out;
    }

    // |E|^2 of the quasi-linear mode (z-independent for a traveling wave).
    double intensity_e2(double r, double phi) const {
        const RadialField f = e_profile(r);
        const double c = std::cos(phi - pol_angle_), s = std::sin(phi - pol_angle_);
        return 2.0 * (f.er * f.er * c * c + f.ep * f.ep * s * s + f.ez * f.ez * c * c);
    }

    // Axial Poynting density S_z(r) of the quasi-circular constituent
    // (azimuthally uniform). Integrates to `power` over the cross section.
    double axial_poynting(double r) const {
        const RadialField e = e_profile(r);
        const RadialField h = h_profile(r);
        return -0.5 * (e.er * h.ep + e.ep * h.er);
    }

    // Numerically integrated axial Poynting flux (test oracle support).
    double poynting_power() const { return integrate_poynting(*this); }

    // Effective mode area P / I at (r, phi): the guided power divided by the
    // local intensity I = eps0 c |E|^2 / 2. Defaults to the polarization
    // plane azimuth, where the evanescent intensity peaks.
    double effective_area(double r) const { return effective_area(r, pol_angle_); }
    double effective_area(double r, double phi) const {
        const double e2 = [&] {
            const RadialField f = e_profile(r);
            const double c = std::cos(phi - pol_angle_), s = std::sin(phi - pol_angle_);
            return 2.0 * (f.er * f.er * c * c + f.ep * f.ep * s * s + f.ez * f.ez * c * c);
        }();
        const double inten = 0.5 * constants::eps0 * constants::c_light * e2;
        return power_ / inten;
    }

private:
    GuidedMode(const FiberSpec& spec, double root_x, double power, double pol_angle)
        : spec_(spec), power_(power), pol_angle_(pol_angle) {
        const double ka = spec.k0() * spec.radius;
        const double v = spec.v_number();
        const double x = root_x;
        const double y = std::sqrt(v * v - x * x);
        n_eff_ = std::sqrt(spec.n_core * spec.n_core - (x / ka) * (x / ka));
        beta_ = n_eff_ * spec.k0();
        h_ = x / spec.radius;
        q_ = y / spec.radius;
        const double jj = detail::j_log_ratio(x);
        const double kk = detail::k_log_ratio(y);
        s_par_ = (1.0 / (x * x) + 1.0 / (y * y)) / (jj + kk);
        sigma1_ = (spec.n_core / n_eff_) * (spec.n_core / n_eff_) / s_par_;
        sigma2_ = (spec.n_clad / n_eff_) * (spec.n_clad / n_eff_) / s_par_;
        rho_cl_ = detail::j1(x) / detail::k1b(y);
        amp_ = 1.0;
        const double p_unit = integrate_poynting(*this);
        amp_ = std::sqrt(power / p_unit);
    }

    static double integrate_poynting(const GuidedMode& m) {
        // Composite 16-point Gauss-Legendre, split at the core boundary.
        static const double gx[8] = {0.0950125098376374, 0.2816035507792589,
                                     0.4580167776572274, 0.6178762444026438,
                                     0.7554044083550030, 0.8656312023878318,
                                     0.9445750230732326, 0.9894009349916499};
        static const double gw[8] = {0.1894506104550685, 0.1826034150449236,
                                     0.1691565193950025, 0.1495959888165767,
                                     0.1246289712555339, 0.0951585116824928,
                                     0.0622535239386479, 0.0271524594117541};
        auto panel = [&](double lo, double hi) {
            const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
            double sum = 0.0;
            for (int i = 0; i < 8; ++i) {
                const double rp = mid + half * gx[i];
                const double rm = mid - half * gx[i];
                sum += gw[i] * (m.axial_poynting(rp) * rp + m.axial_poynting(rm) * rm);
            }
            return sum * half;
        };
        const double a = m.spec_.radius;
        double total = 0.0;
        const int n_in = 24;
        for (int i = 0; i < n_in; ++i)
            total += panel(a * i / n_in, a * (i + 1) / n_in);
        const double r_out = a + 30.0 / m.q_;
        const int n_out = 96;
        for (int i = 0; i < n_out; ++i)
            total += panel(a + (r_out - a) * i / n_out, a + (r_out - a) * (i + 1) / n_out);
        return 2.0 * pi * total;
    }

    FiberSpec spec_;
    double beta_ = 0.0, n_eff_ = 0.0, power_ = 1.0, pol_angle_ = 0.0;
    double h_ = 0.0, q_ = 0.0;            // transverse/evanescent wavenumbers
    double s_par_ = 0.0;                  // hybrid polarization parameter
    double sigma1_ = 0.0, sigma2_ = 0.0;
    double rho_cl_ = 0.0;                 // J1(ha)/K1(qa) continuity factor
    double amp_ = 1.0;
};

} // namespace nftrap
