#pragma once

// Two-color evanescent-field dipole potential around the nanofiber:
// a blue-detuned traveling wave (repulsive) plus a red-detuned standing
// wave (attractive, cos^2 lattice along z), both quasi-linearly polarized
// HE11 modes. Light shifts use the scalar polarizability model
// U = -Re(alpha) |E|^2 / 4. The standing-wave antinode sits at z = 0.

#include <array>
#include <cmath>
#include <optional>
#include <vector>

#include "nftrap/constants.hpp"
#include "nftrap/errors.hpp"
#include "nftrap/fiber_mode.hpp"
#include "nftrap/vec3.hpp"

namespace nftrap {

struct TrapBeam {
    double wavelength = 0.0;   // vacuum (m)
    double power = 0.0;        // guided power per propagation direction (W)
    double pol_angle = 0.0;    // orientation of the quasi-linear plane (rad)
};

struct TrapConfiguration {
    double fiber_radius = 250e-9;
    TrapBeam blue{780e-9, 25e-3, 0.0};
    TrapBeam red{1064e-9, 2.2e-3, pi / 2};   // standing wave, power per direction
    bool red_standing_wave = true;
    double atom_mass = cesium::mass;
    double c3_surface = 0.0;   // optional -C3/(r-a)^3 van der Waals term (J m^3)

    // Crossed polarization planes are the constructor default; the red
    // plane follows the blue one unless set explicitly.
    static TrapConfiguration reference() {
        TrapConfiguration c;
        c.red.pol_angle = c.blue.pol_angle + pi / 2;
        return c;
    }

    void validate() const {
        if (blue.power < 0.0 || red.power < 0.0)
            throw std::invalid_argument("TrapConfiguration: powers must be >= 0");
        if (!(fiber_radius > 0.0))
            throw std::invalid_argument("TrapConfiguration: fiber radius must be > 0");
    }
};

// Gradient in cylindrical components: (dU/dr, dU/dphi [J/rad], dU/dz).
struct CylGradient {
    double d_r = 0.0, d_phi = 0.0, d_z = 0.0;
};

class TwoColorPotential {
public:
    explicit TwoColorPotential(const TrapConfiguration& config)
        : config_(config),
          blue_mode_(GuidedMode::solve_he11(
              FiberSpec::silica_in_vacuum(config.fiber_radius, config.blue.wavelength),
              std::max(config.blue.power, kTinyPower), config.blue.pol_angle)),
          red_mode_(GuidedMode::solve_he11(
              FiberSpec::silica_in_vacuum(config.fiber_radius, config.red.wavelength),
              std::max(config.red.power, kTinyPower), config.red.pol_angle)) {
        config.validate();
        alpha_blue_ = cesium::scalar_polarizability_wavelength(config.blue.wavelength);
        alpha_red_ = cesium::scalar_polarizability_wavelength(config.red.wavelength);
        blue_on_ = config.blue.power > 0.0;
        red_on_ = config.red.power > 0.0;
    }

    const TrapConfiguration& config() const { return config_; }
    const GuidedMode& blue_mode() const { return blue_mode_; }
    const GuidedMode& red_mode() const { return red_mode_; }
    double radius() const { return config_.fiber_radius; }
    double atom_mass() const { return config_.atom_mass; }

    // Lattice period Lambda = lambda_red / (2 n_eff,red).
    double lattice_period() const { return pi / red_mode_.beta(); }

    // U(r, phi, z) in Joules; `red_scale` multiplies the red-field power
    // (the quantity an intensity ramp acts on).
    double energy_cyl(double r, double phi, double z, double red_scale = 1.0) const {
        double u = 0.0;
        if (blue_on_) {
            const RadialField b = blue_mode_.e_profile(r);
            const double cb = std::cos(phi - config_.blue.pol_angle);
            const double sb = std::sin(phi - config_.blue.pol_angle);
            const double e2 = 2.0 * (b.er * b.er * cb * cb + b.ep * b.ep * sb * sb +
                                     b.ez * b.ez * cb * cb);
            u += -0.25 * alpha_blue_ * e2;
        }
        if (red_on_ && red_scale != 0.0) {
            const RadialField f = red_mode_.e_profile(r);
            const double cr = std::cos(phi - config_.red.pol_angle);
            const double sr = std::sin(phi - config_.red.pol_angle);
            const double trans = f.er * f.er * cr * cr + f.ep * f.ep * sr * sr;
            const double longi = f.ez * f.ez * cr * cr;
            double e2;
            if (config_.red_standing_wave) {
                const double cz = std::cos(red_mode_.beta() * z);
                const double sz = std::sin(red_mode_.beta() * z);
                e2 = 8.0 * (cz * cz * trans + sz * sz * longi);
            } else {
                e2 = 2.0 * (trans + longi);
            }
            u += -0.25 * alpha_red_ * e2 * red_scale;
        }
        if (config_.c3_surface != 0.0 && r > config_.fiber_radius) {
            const double d = r - config_.fiber_radius;
            u += -config_.c3_surface / (d * d * d);
        }
        return u;
    }

    CylGradient gradient_cyl(double r, double phi, double z, double red_scale = 1.0) const {
        CylGradient g;
        if (blue_on_) {
            const RadialField b = blue_mode_.e_profile(r);
            const double dphi = phi - config_.blue.pol_angle;
            const double c2 = std::cos(dphi) * std::cos(dphi);
            const double s2 = 1.0 - c2;
            const double sin2 = std::sin(2.0 * dphi);
            const double ka = -0.5 * alpha_blue_;
            g.d_r += ka * (2.0 * (b.er * b.der + b.ez * b.dez) * c2 + 2.0 * b.ep * b.dep * s2);
            g.d_phi += ka * (b.ep * b.ep - b.er * b.er - b.ez * b.ez) * sin2;
        }
        if (red_on_ && red_scale != 0.0) {
            const RadialField f = red_mode_.e_profile(r);
            const double dphi = phi - config_.red.pol_angle;
            const double c2 = std::cos(dphi) * std::cos(dphi);
            const double s2 = 1.0 - c2;
            const double sin2 = std::sin(2.0 * dphi);
            const double kb = red_mode_.beta();
            double cz2 = 1.0, sz2 = 0.0, sin2z = 0.0, amp = 2.0;
            if (config_.red_standing_wave) {
                const double cz = std::cos(kb * z), sz = std::sin(kb * z);
                cz2 = cz * cz;
                sz2 = sz * sz;
                sin2z = std::sin(2.0 * kb * z);
                amp = 8.0;
            }
            const double ka = -0.25 * alpha_red_ * amp * red_scale;
            const double trans = f.er * f.er * c2 + f.ep * f.ep * s2;
            const double longi = f.ez * f.ez * c2;
            const double dtrans_dr = 2.0 * (f.er * f.der * c2 + f.ep * f.dep * s2);
            const double dlongi_dr = 2.0 * f.ez * f.dez * c2;
            const double dtrans_dphi = (f.ep * f.ep - f.er * f.er) * sin2;
            const double dlongi_dphi = -f.ez * f.ez * sin2;
            g.d_r += ka * (cz2 * dtrans_dr + sz2 * dlongi_dr);
            g.d_phi += ka * (cz2 * dtrans_dphi + sz2 * dlongi_dphi);
            if (config_.red_standing_wave)
                g.d_z += ka * kb * sin2z * (longi - trans);
        }
        if (config_.c3_surface != 0.0 && r > config_.fiber_radius) {
            const double d = r - config_.fiber_radius;
            g.d_r += 3.0 * config_.c3_surface / (d * d * d * d);
        }
        return g;
    }

    double energy(const Vec3& p, double red_scale = 1.0) const {
        const double r = std::max(std::hypot(p.x, p.y), 1e-15);
        return energy_cyl(r, std::atan2(p.y, p.x), p.z, red_scale);
    }

    Vec3 gradient(const Vec3& p, double red_scale = 1.0) const {
        const double r = std::max(std::hypot(p.x, p.y), 1e-15);
        const double phi = std::atan2(p.y, p.x);
        const CylGradient g = gradient_cyl(r, phi, p.z, red_scale);
        const double cx = p.x / r, sy = p.y / r;
        return {g.d_r * cx - g.d_phi * sy / r,
                g.d_r * sy + g.d_phi * cx / r,
                g.d_z};
    }

private:
    // Modes are solved at unit-scale power even when a beam is off, so the
    // geometry stays queryable; the *_on_ flags zero the contribution.
    static constexpr double kTinyPower = 1e-30;

    TrapConfiguration config_;
    GuidedMode blue_mode_, red_mode_;
    double alpha_blue_ = 0.0, alpha_red_ = 0.0;
    bool blue_on_ = true, red_on_ = true;
};

// ---------------------------------------------------------------------------
// Fast radial-profile tabulation (cubic Hermite on a uniform r-grid) of the
// same potential. Used by the trajectory Monte-Carlo where per-step Bessel
// evaluation would dominate. Matches the exact potential to ~1e-10 relative.
// ---------------------------------------------------------------------------

class TabulatedPotential {
public:
    TabulatedPotential(const TwoColorPotential& exact, double r_hi = 0.0, int n = 8192)
        : beta_red_(exact.red_mode().beta()),
          blue_angle_(exact.config().blue.pol_angle),
          red_angle_(exact.config().red.pol_angle),
          standing_(exact.config().red_standing_wave),
          mass_(exact.atom_mass()),
          radius_(exact.config().fiber_radius),
          c3_(exact.config().c3_surface) {
        r_lo_ = 0.25 * radius_;
        r_hi_ = (r_hi > 0.0) ? r_hi : radius_ + 4e-6;
        n_ = n;
        dr_ = (r_hi_ - r_lo_) / (n_ - 1);
        const double ab = -0.5 * cesium::scalar_polarizability_wavelength(
                              exact.config().blue.wavelength);
        const double amp_red = standing_ ? 8.0 : 2.0;
        const double ar = -0.25 * amp_red * cesium::scalar_polarizability_wavelength(
                              exact.config().red.wavelength);
        for (auto& t : tab_) t.resize(n_);
        for (int i = 0; i < n_; ++i) {
            const double r = r_lo_ + i * dr_;
            const RadialField b = exact.blue_mode().e_profile(r);
            const RadialField f = exact.red_mode().e_profile(r);
            const bool blue_live = exact.config().blue.power > 0.0;
            const bool red_live = exact.config().red.power > 0.0;
            // blue: coefficient of cos^2 / sin^2; red likewise, split into
            // transverse (cos^2(beta z) factor) and longitudinal (sin^2).
            tab_[0][i] = {blue_live ? ab * (b.er * b.er + b.ez * b.ez) : 0.0,
                          blue_live ? ab * 2.0 * (b.er * b.der + b.ez * b.dez) : 0.0};
            tab_[1][i] = {blue_live ? ab * b.ep * b.ep : 0.0,
                          blue_live ? ab * 2.0 * b.ep * b.dep : 0.0};
            tab_[2][i] = {red_live ? ar * f.er * f.er : 0.0,
                          red_live ? ar * 2.0 * f.er * f.der : 0.0};
            tab_[3][i] = {red_live ? ar * f.ep * f.ep : 0.0,
                          red_live ? ar * 2.0 * f.ep * f.dep : 0.0};
            tab_[4][i] = {red_live ? ar * f.ez * f.ez : 0.0,
                          red_live ? ar * 2.0 * f.ez * f.dez : 0.0};
        }
    }

    double lattice_period() const { return pi / beta_red_; }
    double atom_mass() const { return mass_; }
    double radius() const { return radius_; }

    double energy_cyl(double r, double phi, double z, double red_scale = 1.0) const {
        if (r >= r_hi_) return surface_term(r);
        double v[5], dv[5];
        lookup(r, v, dv);
        const double cb = std::cos(phi - blue_angle_);
        const double cr = std::cos(phi - red_angle_);
        const double cb2 = cb * cb, cr2 = cr * cr;
        double u = v[0] * cb2 + v[1] * (1.0 - cb2);
        double cz2 = 1.0, sz2 = 0.0;
        if (standing_) {
            const double cz = std::cos(beta_red_ * z);
            cz2 = cz * cz;
            sz2 = 1.0 - cz2;
        }
        u += red_scale * (cz2 * (v[2] * cr2 + v[3] * (1.0 - cr2)) + sz2 * v[4] * cr2);
        return u + surface_term(r);
    }

    double energy(const Vec3& p, double red_scale = 1.0) const {
        const double r = std::max(std::hypot(p.x, p.y), 1e-15);
        return energy_cyl(r, std::atan2(p.y, p.x), p.z, red_scale);
    }

    Vec3 gradient(const Vec3& p, double red_scale = 1.0) const {
        return gradient_scaled(p, red_scale);
    }

    // Scaled-red gradient used by the integrator hot loop.
    Vec3 gradient_scaled(const Vec3& p, double red_scale) const {
        const double r = std::max(std::hypot(p.x, p.y), 1e-15);
        if (r >= r_hi_) return surface_gradient(p, r);
        const double phi = std::atan2(p.y, p.x);
        double v[5], dv[5];
        lookup(r, v, dv);
        const double db = phi - blue_angle_;
        const double drd = phi - red_angle_;
        const double cb2 = std::cos(db) * std::cos(db);
        const double cr2 = std::cos(drd) * std::cos(drd);
        const double sin2b = std::sin(2.0 * db);
        const double sin2r = std::sin(2.0 * drd);
        double cz2 = 1.0, sz2 = 0.0, sin2z = 0.0;
        if (standing_) {
            const double cz = std::cos(beta_red_ * p.z), sz = std::sin(beta_red_ * p.z);
            cz2 = cz * cz;
            sz2 = sz * sz;
            sin2z = std::sin(2.0 * beta_red_ * p.z);
        }
        const double dur = dv[0] * cb2 + dv[1] * (1.0 - cb2) +
                           red_scale * (cz2 * (dv[2] * cr2 + dv[3] * (1.0 - cr2)) + sz2 * dv[4] * cr2);
        const double dup = (v[1] - v[0]) * sin2b +
                           red_scale * ((v[3] - v[2]) * cz2 * sin2r - sz2 * v[4] * sin2r);
        const double duz = standing_
            ? red_scale * beta_red_ * sin2z * (v[4] * cr2 - (v[2] * cr2 + v[3] * (1.0 - cr2)))
            : 0.0;
        Vec3 g = assemble_gradient(p, r, phi, dur, dup, duz);
        if (c3_ != 0.0 && r > radius_) {
            const double d = r - radius_;
            const double extra = 3.0 * c3_ / (d * d * d * d);
            g.x += extra * p.x / r;
            g.y += extra * p.y / r;
        }
        return g;
    }

private:
    double surface_term(double r) const {
        if (c3_ == 0.0 || r <= radius_) return 0.0;
        const double d = r - radius_;
        return -c3_ / (d * d * d);
    }

    Vec3 surface_gradient(const Vec3& p, double r) const {
        if (c3_ == 0.0 || r <= radius_) return {};
        const double d = r - radius_;
        const double extra = 3.0 * c3_ / (d * d * d * d);
        return {extra * p.x / r, extra * p.y / r, 0.0};
    }

    static Vec3 assemble_gradient(const Vec3& p, double r, double phi,
                                  double dur, double dup, double duz) {
        (void)phi;
        const double cx = p.x / r, sy = p.y / r;
        return {dur * cx - dup * sy / r, dur * sy + dup * cx / r, duz};
    }

    void lookup(double r, double v[5], double dv[5]) const {
        double t = (r - r_lo_) / dr_;
        if (t < 0.0) t = 0.0;
        int i = int(t);
        if (i > n_ - 2) i = n_ - 2;
        const double u = t - i;
        const double u2 = u * u, u3 = u2 * u;
        const double h00 = 2 * u3 - 3 * u2 + 1, h10 = u3 - 2 * u2 + u;
        const double h01 = -2 * u3 + 3 * u2, h11 = u3 - u2;
        const double g00 = 6 * u2 - 6 * u, g10 = 3 * u2 - 4 * u + 1;
        const double g01 = -6 * u2 + 6 * u, g11 = 3 * u2 - 2 * u;
        for (int k = 0; k < 5; ++k) {
            const auto& lo = tab_[k][i];
            const auto& hi = tab_[k][i + 1];
            v[k] = h00 * lo[0] + h10 * dr_ * lo[1] + h01 * hi[0] + h11 * dr_ * hi[1];
            dv[k] = (g00 * lo[0] + g10 * dr_ * lo[1] + g01 * hi[0] + g11 * dr_ * hi[1]) / dr_;
        }
    }

    double beta_red_, blue_angle_, red_angle_;
    bool standing_;
    double mass_, radius_, c3_;
    double r_lo_ = 0.0, r_hi_ = 0.0, dr_ = 0.0;
    int n_ = 0;
    std::array<std::vector<std::array<double, 2>>, 5> tab_;
};

} // namespace nftrap
