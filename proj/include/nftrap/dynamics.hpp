#pragma once

// Classical atomic trajectories in the (optionally ramped) trap and the
// adiabatic-lowering Monte-Carlo: survival probabilities p(E0, U_low), the
// escape-depth map, and its power-law-sum fit.
//
// Potentials are taken by template; any type providing
//   double energy(const Vec3&, double red_scale) const
//   Vec3   gradient(const Vec3&, double red_scale) const
//   double atom_mass() const
// works (the tabulated nanofiber potential in production, analytic oracle
// wells in the tests). `red_scale` multiplies only the attractive lattice
// field, matching what the intensity ramp acts on.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "nftrap/constants.hpp"
#include "nftrap/errors.hpp"
#include "nftrap/levmar.hpp"
#include "nftrap/rng.hpp"
#include "nftrap/vec3.hpp"

namespace nftrap {

// Trap-depth scaling s(t): constant-adiabaticity down-ramp
// nu(t) = nu0 / (1 + eps nu0 t)  (so U ~ nu^2 falls as 1/(1+eps nu0 t)^2),
// a hold at the lowest depth, and the time-mirrored up-ramp.
struct RampSchedule {
    double u_low_frac = 1.0;   // min s = U_low / U0
    double epsilon = 0.1;      // adiabaticity parameter |dnu/dt| / nu^2
    double nu_ref = 1.0;       // reference trap frequency (Hz)
    double t_down = 0.0, t_hold = 0.0, t_up = 0.0;

    double duration() const { return t_down + t_hold + t_up; }

    double scale(double t) const {
        if (u_low_frac >= 1.0) return 1.0;
        if (t <= 0.0) return 1.0;
        if (t >= duration()) return 1.0;
        if (t < t_down) {
            const double d = 1.0 + epsilon * nu_ref * t;
            return 1.0 / (d * d);
        }
        if (t < t_down + t_hold) return u_low_frac;
        const double tb = duration() - t;  // mirrored
        const double d = 1.0 + epsilon * nu_ref * tb;
        return 1.0 / (d * d);
    }
};

inline RampSchedule build_ramp(double u_low_frac, double epsilon, double nu_ref,
                               double hold_periods = 10.0) {
    if (u_low_frac < 0.0 || u_low_frac > 1.0)
        throw std::invalid_argument("build_ramp: U_low/U0 must be in [0, 1]");
    if (!(epsilon > 0.0) || !(nu_ref > 0.0))
        throw std::invalid_argument("build_ramp: epsilon and nu_ref must be > 0");
    RampSchedule r;
    r.u_low_frac = u_low_frac;
    r.epsilon = epsilon;
    r.nu_ref = nu_ref;
    if (u_low_frac < 1.0) {
        r.t_down = (1.0 / std::sqrt(u_low_frac) - 1.0) / (epsilon * nu_ref);
        r.t_hold = hold_periods / (nu_ref * std::sqrt(u_low_frac));
        r.t_up = r.t_down;
    }
    return r;
}

struct TrajectoryState {
    Vec3 position;        // m, global Cartesian (fiber axis = z)
    Vec3 velocity;        // m/s
    double time = 0.0;    // s
    bool alive = true;    // sticky: once false, stays false
};

// Escape bookkeeping for the nanofiber trap geometry.
struct EscapeCriterion {
    double fiber_radius = 0.0;     // atoms reaching the surface are lost
    double escape_distance = 0.0;  // r - a beyond this -> lost (3x site-saddle)
    bool enabled = true;

    template <class Pot>
    bool lost(const Pot& pot, const Vec3& x, const Vec3& v, double s) const {
        if (!enabled) return false;
        const double r = std::hypot(x.x, x.y);
        if (r <= fiber_radius) return true;
        if (r - fiber_radius > escape_distance) return true;
        // positive total energy relative to the r -> infinity asymptote
        const double e = 0.5 * pot.atom_mass() * v.dot(v) + pot.energy(x, s);
        return e > 0.0;
    }
};

// Velocity-Verlet integration with the ramp applied to the red field.
// Fixed step; dt must satisfy dt <= 1/(50 nu_max) for the largest
// instantaneous trap frequency nu_max.
template <class Pot>
TrajectoryState integrate_trajectory(const Pot& pot, const RampSchedule& ramp,
                                     TrajectoryState state, double dt, double t_end,
                                     double nu_max, const EscapeCriterion& esc) {
    if (dt > 1.0 / (50.0 * nu_max))
        throw StepTooLarge("integrate_trajectory: dt exceeds 1/(50 nu_max)");
    const double inv_m = 1.0 / pot.atom_mass();
    double s = ramp.scale(state.time);
    Vec3 f = pot.gradient(state.position, s) * -1.0;
    while (state.time < t_end && state.alive) {
        state.velocity += f * (0.5 * dt * inv_m);
        state.position += state.velocity * dt;
        state.time += dt;
        s = ramp.scale(state.time);
        f = pot.gradient(state.position, s) * -1.0;
        state.velocity += f * (0.5 * dt * inv_m);
        if (!std::isfinite(state.position.x) || !std::isfinite(state.velocity.x))
            throw NonFiniteState("integrate_trajectory: state diverged");
        if (esc.lost(pot, state.position, state.velocity, s)) state.alive = false;
    }
    return state;
}

// Ramp-following variant used by the escape map: the step tracks the
// instantaneous trap frequency (dt ~ 1/(100 nu_max sqrt(s))), which keeps
// the per-period resolution constant while the trap weakens.
template <class Pot>
TrajectoryState integrate_through_ramp(const Pot& pot, const RampSchedule& ramp,
                                       TrajectoryState state, double dt0,
                                       const EscapeCriterion& esc) {
    const double inv_m = 1.0 / pot.atom_mass();
    const double t_end = ramp.duration();
    double s = ramp.scale(state.time);
    Vec3 f = pot.gradient(state.position, s) * -1.0;
    while (state.time < t_end && state.alive) {
        const double dt = dt0 / std::sqrt(std::max(s, 0.02));
        state.velocity += f * (0.5 * dt * inv_m);
        state.position += state.velocity * dt;
        state.time += dt;
        s = ramp.scale(state.time);
        f = pot.gradient(state.position, s) * -1.0;
        state.velocity += f * (0.5 * dt * inv_m);
        if (esc.lost(pot, state.position, state.velocity, s)) state.alive = false;
    }
    if (state.alive && (!std::isfinite(state.position.x) || !std::isfinite(state.velocity.x)))
        throw NonFiniteState("integrate_through_ramp: state diverged");
    return state;
}

// ---------------------------------------------------------------------------
// Microcanonical initial conditions: position density ~ sqrt(E0 - U) over the
// energy shell's accessible volume, isotropic velocity of the matching speed.
// ---------------------------------------------------------------------------

struct SamplingRegion {
    Vec3 center;                        // site minimum (Cartesian)
    Vec3 axis_r, axis_phi, axis_z;      // local orthonormal frame
    double half_width[3] = {0, 0, 0};   // box half-widths along the axes
    double u_min = 0.0;                 // potential at the minimum (J)
};

// Builds a sampling box around a site by scanning each local axis until the
// potential has climbed E0 above the minimum (1.15x margin).
template <class Pot>
SamplingRegion sampling_region(const Pot& pot, const Vec3& site_pos, double e0,
                               double depth) {
    if (!(e0 > 0.0) || e0 >= depth)
        throw EnergyOutOfRange("sampling_region: need 0 < E0 < trap depth");
    SamplingRegion reg;
    reg.center = site_pos;
    const double r = std::hypot(site_pos.x, site_pos.y);
    if (r > 1e-12) {
        reg.axis_r = {site_pos.x / r, site_pos.y / r, 0.0};
        reg.axis_phi = {-site_pos.y / r, site_pos.x / r, 0.0};
    } else {
        reg.axis_r = {1.0, 0.0, 0.0};   // origin-centered well: lab axes
        reg.axis_phi = {0.0, 1.0, 0.0};
    }
    reg.axis_z = {0.0, 0.0, 1.0};
    reg.u_min = pot.energy(site_pos, 1.0);
    const Vec3 axes[3] = {reg.axis_r, reg.axis_phi, reg.axis_z};
    for (int k = 0; k < 3; ++k) {
        double lim = 0.0;
        for (int sign = -1; sign <= 1; sign += 2) {
            double step = 1e-9;
            double dist = 0.0;
            for (int it = 0; it < 4000; ++it) {
                dist += step;
                const Vec3 p = reg.center + axes[k] * (sign * dist);
                if (pot.energy(p, 1.0) - reg.u_min >= e0) break;
            }
            lim = std::max(lim, dist);
        }
        reg.half_width[k] = 1.15 * lim;
    }
    return reg;
}

template <class Pot>
TrajectoryState sample_microcanonical(const Pot& pot, const SamplingRegion& reg,
                                      double e0, Rng& rng) {
    const double mass = pot.atom_mass();
    for (int attempt = 0; attempt < 100000; ++attempt) {
        const double ur = rng.uniform(-reg.half_width[0], reg.half_width[0]);
        const double up = rng.uniform(-reg.half_width[1], reg.half_width[1]);
        const double uz = rng.uniform(-reg.half_width[2], reg.half_width[2]);
        const Vec3 p = reg.center + reg.axis_r * ur + reg.axis_phi * up + reg.axis_z * uz;
        const double du = pot.energy(p, 1.0) - reg.u_min;
        if (du >= e0) continue;
        const double w = std::sqrt(1.0 - du / e0);  // sqrt(E0 - U)/sqrt(E0)
        if (rng.uniform() > w) continue;
        const double speed = std::sqrt(2.0 * (e0 - du) / mass);
        // isotropic direction
        const double cz = rng.uniform(-1.0, 1.0);
        const double sz = std::sqrt(std::max(1.0 - cz * cz, 0.0));
        const double ph = rng.uniform(0.0, 2.0 * pi);
        TrajectoryState st;
        st.position = p;
        st.velocity = Vec3{sz * std::cos(ph), sz * std::sin(ph), cz} * speed;
        st.time = 0.0;
        st.alive = true;
        return st;
    }
    throw EnergyOutOfRange("sample_microcanonical: acceptance failed (bad region?)");
}

// ---------------------------------------------------------------------------
// Escape map
// ---------------------------------------------------------------------------

struct SurvivalPoint {
    double u_low_frac = 0.0;
    double p = 0.0;
    double stderr_p = 0.0;
    int survived = 0, total = 0;
};

struct EscapeMapPoint {
    double e0_frac = 0.0;              // E0 / U0
    std::vector<SurvivalPoint> curve;  // p vs U_low/U0
    double u_esc_frac = 0.0;           // fitted 0.5-crossing, in U0 units
    double width_frac = 0.0;           // fitted error-function width
    double sigma_u_esc = 0.0;          // 1-sigma fit uncertainty of the crossing
    bool fit_ok = false;
};

// Error-function fit p(u) = 0.5 (1 + erf((u - u_esc)/(w sqrt(2)))).
inline bool fit_survival_erf(const std::vector<SurvivalPoint>& pts, double& u_esc,
                             double& width, double* sigma_u_esc = nullptr) {
    int n_lo = 0, n_hi = 0;
    for (const auto& q : pts) {
        if (q.p < 0.5) ++n_lo;
        if (q.p > 0.5) ++n_hi;
    }
    if (n_lo == 0 || n_hi == 0) return false;  // no crossing inside the grid
    double guess = pts.front().u_low_frac;
    for (size_t i = 0; i + 1 < pts.size(); ++i) {
        const auto &A = pts[i], &B = pts[i + 1];
        if ((A.p - 0.5) * (B.p - 0.5) <= 0.0 && A.p != B.p) {
            guess = A.u_low_frac +
                    (0.5 - A.p) * (B.u_low_frac - A.u_low_frac) / (B.p - A.p);
            break;
        }
    }
    const int m = int(pts.size());
    auto model = [&](const std::vector<double>& p, std::vector<double>& r,
                     std::vector<double>& jac) {
        const double ue = p[0], w = std::abs(p[1]) + 1e-9;
        for (int i = 0; i < m; ++i) {
            const double sg = std::max(pts[i].stderr_p, 5e-3);
            const double t = (pts[i].u_low_frac - ue) / (w * std::sqrt(2.0));
            const double f = 0.5 * (1.0 + std::erf(t));
            const double g = std::exp(-t * t) / std::sqrt(pi);
            r[i] = (f - pts[i].p) / sg;
            jac[i * 2 + 0] = -g / (w * std::sqrt(2.0)) / sg;
            jac[i * 2 + 1] = -g * (pts[i].u_low_frac - ue) / (w * w * std::sqrt(2.0)) / sg *
                             ((p[1] >= 0) ? 1.0 : -1.0);
        }
    };
    try {
        auto res = levmar_fit(model, {guess, 0.05}, m);
        u_esc = res.params[0];
        width = std::abs(res.params[1]);
        if (sigma_u_esc) *sigma_u_esc = res.sigma.empty() ? 0.0 : res.sigma[0];
        return res.converged && u_esc > -0.5 && u_esc < 1.5;
    } catch (const FitNonconvergence&) {
        return false;
    }
}

struct EscapeMapConfig {
    int n_traj = 1000;
    double epsilon = 0.1;
    double hold_periods = 10.0;
    std::uint64_t seed = 1;
    double dt0 = 0.0;          // 0: auto = 1/(100 nu_max)
};

// Runs the adiabatic-lowering Monte-Carlo over (E0, U_low) grids. Results are
// aggregated by trajectory index (per-index substreams), so any execution
// order gives identical counts.
template <class Pot>
std::vector<EscapeMapPoint> escape_map(const Pot& pot, const Vec3& site_pos,
                                       double depth, double nu_ref, double nu_max,
                                       const std::vector<double>& e0_fracs,
                                       const std::vector<double>& u_low_fracs,
                                       const EscapeCriterion& esc,
                                       const EscapeMapConfig& cfg) {
    if (e0_fracs.empty() || u_low_fracs.empty())
        throw std::invalid_argument("escape_map: empty grids");
    if (cfg.n_traj < 100)
        throw std::invalid_argument("escape_map: need n_traj >= 100");
    const double dt0 = (cfg.dt0 > 0.0) ? cfg.dt0 : 1.0 / (100.0 * nu_max);

    std::vector<EscapeMapPoint> map;
    map.reserve(e0_fracs.size());
    for (size_t ie = 0; ie < e0_fracs.size(); ++ie) {
        EscapeMapPoint mp;
        mp.e0_frac = e0_fracs[ie];
        const double e0 = mp.e0_frac * depth;
        const SamplingRegion reg = sampling_region(pot, site_pos, e0, depth);
        for (size_t iu = 0; iu < u_low_fracs.size(); ++iu) {
            const RampSchedule ramp =
                build_ramp(u_low_fracs[iu], cfg.epsilon, nu_ref, cfg.hold_periods);
            int survived = 0;
            for (int k = 0; k < cfg.n_traj; ++k) {
                const std::uint64_t sub =
                    (ie * u_low_fracs.size() + iu) * std::uint64_t(cfg.n_traj) + k;
                Rng rng = Rng::substream(cfg.seed, sub);
                TrajectoryState st = sample_microcanonical(pot, reg, e0, rng);
                st = integrate_through_ramp(pot, ramp, st, dt0, esc);
                if (st.alive) ++survived;
            }
            SurvivalPoint sp;
            sp.u_low_frac = u_low_fracs[iu];
            sp.survived = survived;
            sp.total = cfg.n_traj;
            sp.p = double(survived) / cfg.n_traj;
            sp.stderr_p = std::sqrt(std::max(sp.p * (1.0 - sp.p), 1e-9) / cfg.n_traj);
            mp.curve.push_back(sp);
        }
        mp.fit_ok = fit_survival_erf(mp.curve, mp.u_esc_frac, mp.width_frac,
                                     &mp.sigma_u_esc);
        map.push_back(std::move(mp));
    }
    return map;
}

// ---------------------------------------------------------------------------
// Escape polynomial  E0/U0 = a x^b + c x^d,  x = U_esc/U0, a,c >= 0, b,d > 0.
// ---------------------------------------------------------------------------

struct EscapePolynomial {
    double a = 0.0, b = 1.0, c = 0.0, d = 1.0;
    double rms_residual = 0.0;

    double forward(double x) const {
        if (x <= 0.0) return 0.0;
        return a * std::pow(x, b) + c * std::pow(x, d);
    }
    // Inverse by bisection; forward is strictly increasing on (0, xmax].
    double inverse(double y, double xmax = 4.0) const {
        if (y <= 0.0) return 0.0;
        double lo = 0.0, hi = xmax;
        for (int i = 0; i < 200; ++i) {
            const double mid = 0.5 * (lo + hi);
            if (forward(mid) < y) lo = mid; else hi = mid;
        }
        return 0.5 * (lo + hi);
    }
};

inline EscapePolynomial fit_escape_polynomial(const std::vector<EscapeMapPoint>& map) {
    std::vector<double> xs, ys;
    for (const auto& mp : map)
        if (mp.fit_ok && mp.u_esc_frac > 0.0) {
            xs.push_back(mp.u_esc_frac);
            ys.push_back(mp.e0_frac);
        }
    if (xs.size() < 6)
        throw FitNonconvergence("fit_escape_polynomial: need >= 6 usable map points");
    const int m = int(xs.size());
    // positivity via squared reparametrization
    auto model = [&](const std::vector<double>& p, std::vector<double>& r,
                     std::vector<double>& jac) {
        const double a = p[0] * p[0], b = p[1] * p[1];
        const double c = p[2] * p[2], d = p[3] * p[3];
        for (int i = 0; i < m; ++i) {
            const double lx = std::log(xs[i]);
            const double xb = std::pow(xs[i], b), xd = std::pow(xs[i], d);
            r[i] = a * xb + c * xd - ys[i];
            jac[i * 4 + 0] = 2.0 * p[0] * xb;
            jac[i * 4 + 1] = a * xb * lx * 2.0 * p[1];
            jac[i * 4 + 2] = 2.0 * p[2] * xd;
            jac[i * 4 + 3] = c * xd * lx * 2.0 * p[3];
        }
    };
    LevMarResult best;
    best.chi2 = 1e300;
    const double inits[3][4] = {{0.7, 0.8, 0.5, 1.3},
                                {0.9, 0.6, 0.3, 1.0},
                                {0.5, 1.0, 0.7, 0.9}};
    for (const auto& init : inits) {
        try {
            auto res = levmar_fit(model, {init[0], init[1], init[2], init[3]}, m);
            if (res.converged && res.chi2 < best.chi2) best = res;
        } catch (const FitNonconvergence&) {
        }
    }
    if (best.chi2 >= 1e300)
        throw FitNonconvergence("fit_escape_polynomial: all starts failed");
    EscapePolynomial poly;
    poly.a = best.params[0] * best.params[0];
    poly.b = best.params[1] * best.params[1];
    poly.c = best.params[2] * best.params[2];
    poly.d = best.params[3] * best.params[3];
    poly.rms_residual = std::sqrt(best.chi2 / m);
    return poly;
}

} // namespace nftrap
