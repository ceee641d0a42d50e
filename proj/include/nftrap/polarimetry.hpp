#pragma once

// Scattered-light polarimetry: point scatterers on/in the nanofiber radiate
// as dipoles driven by the local guided field; cameras collect the coherent
// far-field sum through polarization filters. Because every scatterer
// responds linearly to the guided polarization state (cx, cy) in the basis
// of the two quasi-linear HE11 modes, each camera/filter channel reduces to
// a 2x2 Hermitian form P = c^+ Q c, precomputed once per ensemble.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

#include "nftrap/constants.hpp"
#include "nftrap/errors.hpp"
#include "nftrap/fiber_mode.hpp"
#include "nftrap/jones.hpp"
#include "nftrap/levmar.hpp"
#include "nftrap/rng.hpp"
#include "nftrap/vec3.hpp"

namespace nftrap {

struct Scatterer {
    double r = 0.0, phi = 0.0, z = 0.0;
    double weight = 1.0;
    int orbit = 0;   // scatterers in one orbit interfere coherently
};

// Scatterers sampled uniformly on the surface (fraction `surface_frac`) and
// in the bulk, spread over the imaged fiber segment. Each draw is stored
// together with its dihedral images (x/y mirrors and the 90-degree
// rotation), which represents the continuum limit of a uniform azimuthal
// distribution: the x/y mirrors keep the destructive interference of the
// antisymmetric E_z exact, the rotation makes the two cameras equivalent.
//
// One draw's images share an orbit id. A camera looking perpendicular to
// the fiber resolves the axial coordinate, so amplitudes are summed
// coherently only within an orbit (one z-resolution element) and powers
// across orbits.
inline std::vector<Scatterer> sample_ensemble(double fiber_radius, int n, double z_span,
                                              std::uint64_t seed,
                                              double surface_frac = 0.8,
                                              bool symmetrize = true) {
    std::vector<Scatterer> out;
    out.reserve(n);
    Rng rng(seed);
    const int per_draw = symmetrize ? 8 : 1;
    const int draws = std::max(n / per_draw, 1);
    for (int k = 0; k < draws; ++k) {
        Scatterer s;
        s.z = rng.uniform(-0.5 * z_span, 0.5 * z_span);
        s.phi = rng.uniform(0.0, 2.0 * pi);
        s.r = (rng.uniform() < surface_frac) ? fiber_radius
                                             : fiber_radius * std::sqrt(rng.uniform());
        s.orbit = k;
        if (!symmetrize) {
            out.push_back(s);
            continue;
        }
        const double base[4] = {s.phi, pi - s.phi, -s.phi, pi + s.phi};
        for (double a : base)
            for (double rot : {0.0, pi / 2}) {
                Scatterer img = s;
                img.phi = a + rot;
                out.push_back(img);
            }
    }
    return out;
}

enum class PolarizerSetting { PassTransverse, PassZ, Removed };

struct CameraModel {
    double azimuth = 0.0;          // observation axis in the x-y plane
    double aperture = 5.0 * pi / 180.0;  // full cone angle
    PolarizerSetting polarizer = PolarizerSetting::PassTransverse;
    int n_directions = 5;          // aperture-averaging stencil

    static CameraModel camera1(PolarizerSetting p = PolarizerSetting::PassTransverse) {
        CameraModel c; c.azimuth = 0.0; c.polarizer = p; return c;
    }
    static CameraModel camera2(PolarizerSetting p = PolarizerSetting::PassTransverse) {
        CameraModel c; c.azimuth = pi / 2; c.polarizer = p; return c;
    }
};

// Hermitian 2x2 accumulated per polarizer channel.
struct ChannelForm {
    double q00 = 0.0, q11 = 0.0;
    Complex q01{0.0, 0.0};

    double power(const std::array<Complex, 2>& c) const {
        return q00 * std::norm(c[0]) + q11 * std::norm(c[1]) +
               2.0 * std::real(std::conj(c[0]) * q01 * c[1]);
    }
};

// Per-scatterer dipole moments for the two quasi-linear basis modes,
// precomputed once (field evaluation dominates the ensemble build).
struct PreparedScatterers {
    struct Entry {
        Vec3 pos;
        Complex px[3], py[3];   // Cartesian dipole for basis planes 0, pi/2
        double weight = 1.0;
        int orbit = 0;
    };
    std::vector<Entry> entries;   // contiguous in orbit
    double k0 = 0.0;   // free-space wavenumber of the scattered light

    static PreparedScatterers build(const GuidedMode& mode,
                                    const std::vector<Scatterer>& ensemble) {
        PreparedScatterers out;
        out.k0 = 2.0 * pi / mode.spec().wavelength;
        out.entries.reserve(ensemble.size());
        for (const Scatterer& s : ensemble) {
            Entry e;
            const double cph = std::cos(s.phi), sph = std::sin(s.phi);
            e.pos = {s.r * cph, s.r * sph, s.z};
            e.weight = s.weight;
            e.orbit = s.orbit;
            for (int b = 0; b < 2; ++b) {
                const CylComplexField f =
                    mode.field_with_plane(s.r, s.phi, s.z, b == 0 ? 0.0 : pi / 2);
                Complex* p = (b == 0) ? e.px : e.py;
                p[0] = f.e_r * cph - f.e_phi * sph;
                p[1] = f.e_r * sph + f.e_phi * cph;
                p[2] = f.e_z;
            }
            out.entries.push_back(e);
        }
        return out;
    }
};

class ScatterOperator {
public:
    // `include_path_phases` switches the exp(-i k n.x_s) propagation factors
    // (the mechanism turning destructive into constructive interference).
    ScatterOperator(const PreparedScatterers& prepared, const CameraModel& camera,
                    bool include_path_phases = true) {
        const double k0 = prepared.k0;
        const Vec3 axis{std::cos(camera.azimuth), std::sin(camera.azimuth), 0.0};
        // aperture stencil: center + ring at half-angle
        std::vector<Vec3> dirs;
        dirs.push_back(axis);
        const double half = 0.5 * camera.aperture;
        const Vec3 t1{-std::sin(camera.azimuth), std::cos(camera.azimuth), 0.0};
        const Vec3 t2{0.0, 0.0, 1.0};
        for (int k = 0; k < camera.n_directions - 1; ++k) {
            const double ang = 2.0 * pi * k / (camera.n_directions - 1);
            Vec3 d = axis + t1 * (half * std::cos(ang)) + t2 * (half * std::sin(ang));
            const double nn = d.norm();
            dirs.push_back(d * (1.0 / nn));
        }

        for (const Vec3& n : dirs) {
            // polarizer axes orthogonal to the line of sight
            Vec3 tdir{-n.y, n.x, 0.0};   // transverse to the fiber axis
            tdir = tdir * (1.0 / tdir.norm());
            const Vec3 zdir{n.y * tdir.z - n.z * tdir.y,
                            n.z * tdir.x - n.x * tdir.z,
                            n.x * tdir.y - n.y * tdir.x};
            Complex at[2] = {0, 0}, az[2] = {0, 0};
            int cur_orbit = prepared.entries.empty() ? 0 : prepared.entries.front().orbit;
            auto flush = [&] {
                accumulate(trans_, at);
                accumulate(zchan_, az);
                at[0] = at[1] = az[0] = az[1] = Complex(0, 0);
            };
            for (const auto& e : prepared.entries) {
                if (e.orbit != cur_orbit) {
                    flush();
                    cur_orbit = e.orbit;
                }
                Complex phase(e.weight, 0.0);
                if (include_path_phases)
                    phase *= std::exp(
                        Complex(0.0, -k0 * (n.x * e.pos.x + n.y * e.pos.y + n.z * e.pos.z)));
                at[0] += phase * (e.px[0] * tdir.x + e.px[1] * tdir.y + e.px[2] * tdir.z);
                at[1] += phase * (e.py[0] * tdir.x + e.py[1] * tdir.y + e.py[2] * tdir.z);
                az[0] += phase * (e.px[0] * zdir.x + e.px[1] * zdir.y + e.px[2] * zdir.z);
                az[1] += phase * (e.py[0] * zdir.x + e.py[1] * zdir.y + e.py[2] * zdir.z);
            }
            if (!prepared.entries.empty()) flush();
        }
        const double inv = 1.0 / double(dirs.size());
        scale(trans_, inv);
        scale(zchan_, inv);
    }

    // Convenience constructor evaluating the mode fields directly.
    ScatterOperator(const GuidedMode& mode, const std::vector<Scatterer>& ensemble,
                    const CameraModel& camera, bool include_path_phases = true)
        : ScatterOperator(PreparedScatterers::build(mode, ensemble), camera,
                          include_path_phases) {}

    // Detected power for guided polarization state c (basis: quasi-linear
    // planes at 0 and pi/2), through the chosen filter.
    double power(const std::array<Complex, 2>& c, PolarizerSetting pol) const {
        switch (pol) {
            case PolarizerSetting::PassTransverse: return trans_.power(c);
            case PolarizerSetting::PassZ: return zchan_.power(c);
            default: return trans_.power(c) + zchan_.power(c);
        }
    }

    const ChannelForm& transverse_form() const { return trans_; }
    const ChannelForm& z_form() const { return zchan_; }

private:
    static void accumulate(ChannelForm& q, const Complex a[2]) {
        q.q00 += std::norm(a[0]);
        q.q11 += std::norm(a[1]);
        q.q01 += std::conj(a[0]) * a[1];
    }
    static void scale(ChannelForm& q, double s) {
        q.q00 *= s;
        q.q11 *= s;
        q.q01 *= s;
    }

    ChannelForm trans_, zchan_;
};

// Guided polarization state for an input linear polarization at angle `phi`
// behind optics `chain` (compensator, fiber birefringence, ...).
inline std::array<Complex, 2> guided_state(const Jones2& chain, double phi) {
    return chain.apply({Complex(std::cos(phi), 0.0), Complex(std::sin(phi), 0.0)});
}

// -------------------------------------------------------------------------
// Polarization scans and the sin^2 model fit
// -------------------------------------------------------------------------

struct ScanPoint {
    double phi = 0.0;        // input polarization-plane angle (rad)
    double p_cam1 = 0.0;
    double p_cam2 = 0.0;
};

struct PolarizationScan {
    std::vector<ScanPoint> points;
    double background_frac = 0.0;   // incoherent floor, fraction of coherent peak
};

// Ingestion from the `phi_deg,P_cam1,P_cam2` CSV layout.
template <class Table>
PolarizationScan scan_from_table(const Table& t) {
    const int cp = t.column("phi_deg");
    const int c1 = t.column("P_cam1");
    const int c2 = t.column("P_cam2");
    if (cp < 0 || c1 < 0 || c2 < 0)
        throw DegenerateData("scan_from_table: missing required columns");
    PolarizationScan scan;
    for (const auto& row : t.rows)
        scan.points.push_back({row[cp] * pi / 180.0, row[c1], row[c2]});
    return scan;
}

// Simulated scan: the half-wave-plate angle phi rotates the input linear
// polarization; `chain` maps it to the guided state. The unpolarized
// background adds an incoherent floor of background_frac x (coherent peak)
// behind each camera's filter: contrast C = 1 / (1 + 2 b).
inline PolarizationScan scan_polarization(const ScatterOperator& cam1,
                                          const ScatterOperator& cam2,
                                          PolarizerSetting pol, const Jones2& chain,
                                          int n_phi = 37, double phi_span = pi,
                                          double background_frac = 0.0) {
    if (phi_span < pi - 1e-12)
        throw InsufficientScanRange("scan_polarization: need >= 180 degrees of scan");
    PolarizationScan scan;
    scan.background_frac = background_frac;
    scan.points.resize(n_phi);
    double peak1 = 0.0, peak2 = 0.0;
    for (int i = 0; i < n_phi; ++i) {
        const double phi = phi_span * i / (n_phi - 1);
        const auto c = guided_state(chain, phi);
        scan.points[i] = {phi, cam1.power(c, pol), cam2.power(c, pol)};
        peak1 = std::max(peak1, scan.points[i].p_cam1);
        peak2 = std::max(peak2, scan.points[i].p_cam2);
    }
    if (background_frac > 0.0)
        for (auto& p : scan.points) {
            p.p_cam1 += background_frac * peak1;
            p.p_cam2 += background_frac * peak2;
        }
    return scan;
}

struct ScanFit {
    double amp_sin2 = 0.0;      // A  (sin^2(phi - phi0))
    double amp_sin2_2 = 0.0;    // B  (sin^2(2(phi - phi0)))
    double offset = 0.0;        // D
    double phi0 = 0.0;
    double sigma[4] = {0, 0, 0, 0};
    double contrast = 0.0;      // from the fitted model extrema
    double residual_norm = 0.0;
    bool phi0_defined = true;

    double eval(double phi) const {
        const double s1 = std::sin(phi - phi0);
        const double s2 = std::sin(2.0 * (phi - phi0));
        return amp_sin2 * s1 * s1 + amp_sin2_2 * s2 * s2 + offset;
    }
};

// Nonlinear least squares of I(phi) = A sin^2(phi-phi0) + B sin^2(2(phi-phi0)) + D
// with the analytic Jacobian.
inline ScanFit fit_scan(const std::vector<double>& phis, const std::vector<double>& power) {
    if (phis.size() != power.size() || phis.size() < 8)
        throw DegenerateData("fit_scan: need >= 8 scan points");
    const int m = int(phis.size());
    double pmin = 1e300, pmax = -1e300;
    for (double v : power) { pmin = std::min(pmin, v); pmax = std::max(pmax, v); }
    const double scale = std::max(pmax - pmin, 1e-30);

    // phase of the cos(2 phi) Fourier component seeds phi0
    double cs = 0.0, sn = 0.0;
    for (int i = 0; i < m; ++i) {
        cs += power[i] * std::cos(2.0 * phis[i]);
        sn += power[i] * std::sin(2.0 * phis[i]);
    }
    double phi0_init = 0.5 * std::atan2(-sn, -cs);  // sin^2 peaks where cos(2(phi-phi0)) = -1

    auto model = [&](const std::vector<double>& p, std::vector<double>& r,
                     std::vector<double>& jac) {
        for (int i = 0; i < m; ++i) {
            const double d1 = phis[i] - p[3];
            const double s1 = std::sin(d1), s2 = std::sin(2.0 * d1);
            r[i] = (p[0] * s1 * s1 + p[1] * s2 * s2 + p[2] - power[i]) / scale;
            jac[i * 4 + 0] = s1 * s1 / scale;
            jac[i * 4 + 1] = s2 * s2 / scale;
            jac[i * 4 + 2] = 1.0 / scale;
            jac[i * 4 + 3] = (-p[0] * std::sin(2.0 * d1) - 2.0 * p[1] * std::sin(4.0 * d1)) / scale;
        }
    };
    LevMarResult best;
    best.chi2 = 1e300;
    for (double dphi : {0.0, pi / 4, -pi / 4, pi / 2}) {
        try {
            auto res = levmar_fit(model, {pmax - pmin, 0.0, pmin, phi0_init + dphi}, m);
            if (res.chi2 < best.chi2) best = res;
        } catch (const FitNonconvergence&) {
        }
    }
    if (best.chi2 >= 1e300)
        throw FitNonconvergence("fit_scan: no start converged");

    ScanFit fit;
    fit.amp_sin2 = best.params[0];
    fit.amp_sin2_2 = best.params[1];
    fit.offset = best.params[2];
    fit.phi0 = std::remainder(best.params[3], pi);
    for (int i = 0; i < 4 && i < int(best.sigma.size()); ++i) fit.sigma[i] = best.sigma[i];
    fit.residual_norm = std::sqrt(best.chi2) * scale;
    fit.phi0_defined = (std::abs(fit.amp_sin2) + std::abs(fit.amp_sin2_2)) > 1e-9 * scale +
                       1e-300;
    double lo = 1e300, hi = -1e300;
    for (int i = 0; i < 720; ++i) {
        const double v = fit.eval(pi * i / 720.0);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    fit.contrast = (fit.phi0_defined && hi + lo > 0.0) ? (hi - lo) / (hi + lo) : 0.0;
    return fit;
}

// -------------------------------------------------------------------------
// Compensator optimization (derivative-free coordinate search + restarts)
// -------------------------------------------------------------------------

struct CompensatorResult {
    CompensatorSettings settings;
    double contrast = 0.0;         // min over the two cameras
    int restarts_used = 0;
    bool stagnated = false;        // below target after all restarts
};

// Contrast achieved with compensator C ahead of the (unknown) fiber unitary:
// guided state = U_fiber * C * R(phi) x.
inline double compensated_contrast(const ScatterOperator& cam1, const ScatterOperator& cam2,
                                   const Jones2& fiber, const CompensatorSettings& s,
                                   int n_phi = 24) {
    const Jones2 chain = fiber * s.jones();
    double lo1 = 1e300, hi1 = -1e300, lo2 = 1e300, hi2 = -1e300;
    for (int i = 0; i < n_phi; ++i) {
        const double phi = pi * i / n_phi;
        const auto c = guided_state(chain, phi);
        const double p1 = cam1.power(c, PolarizerSetting::PassTransverse);
        const double p2 = cam2.power(c, PolarizerSetting::PassTransverse);
        lo1 = std::min(lo1, p1); hi1 = std::max(hi1, p1);
        lo2 = std::min(lo2, p2); hi2 = std::max(hi2, p2);
    }
    const double c1 = (hi1 + lo1 > 0) ? (hi1 - lo1) / (hi1 + lo1) : 0.0;
    const double c2 = (hi2 + lo2 > 0) ? (hi2 - lo2) / (hi2 + lo2) : 0.0;
    return std::min(c1, c2);
}

inline CompensatorResult optimize_compensator(const ScatterOperator& cam1,
                                              const ScatterOperator& cam2,
                                              const Jones2& fiber,
                                              double target_contrast = 0.999,
                                              int n_restarts = 12,
                                              std::uint64_t seed = 11) {
    CompensatorResult best;
    best.contrast = -1.0;
    for (int restart = 0; restart < n_restarts; ++restart) {
        Rng rng = Rng::substream(seed, restart);
        double p[4];
        if (restart == 0) { p[0] = p[1] = p[2] = p[3] = 0.0; }
        else {
            p[0] = rng.uniform(0.0, 2.0 * pi);
            p[1] = rng.uniform(0.0, pi);
            p[2] = rng.uniform(0.0, 2.0 * pi);
            p[3] = rng.uniform(0.0, pi);
        }
        auto value = [&](const double q[4]) {
            return compensated_contrast(cam1, cam2, fiber,
                                        {q[0], q[1], q[2], q[3]});
        };
        double step = 0.5;
        double cur = value(p);
        while (step > 3e-5) {
            bool improved = false;
            for (int k = 0; k < 4; ++k) {
                for (double sgn : {+1.0, -1.0}) {
                    double q[4] = {p[0], p[1], p[2], p[3]};
                    q[k] += sgn * step;
                    const double v = value(q);
                    if (v > cur + 1e-15) {
                        cur = v;
                        p[k] = q[k];
                        improved = true;
                    }
                }
            }
            if (!improved) step *= 0.55;
        }
        if (cur > best.contrast) {
            best.contrast = cur;
            best.settings = {p[0], p[1], p[2], p[3]};
            best.restarts_used = restart + 1;
        }
        if (best.contrast >= target_contrast) break;
    }
    best.stagnated = best.contrast < target_contrast;
    return best;
}

// Fiber birefringence with a 1/lambda retardance dispersion (fixed path
// delay) plus a geometric rotation; used to quantify how a compensator set
// at one wavelength performs at the others.
struct DispersiveBirefringence {
    double delta0 = 0.0;       // retardance at lambda_ref
    double theta = 0.0;        // retarder orientation
    double rotation = 0.0;     // wavelength-independent
    double lambda_ref = 1064e-9;

    Jones2 jones(double lambda) const {
        return rotator(rotation) * retarder(delta0 * lambda_ref / lambda, theta);
    }
};

} // namespace nftrap
