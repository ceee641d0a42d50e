#pragma once

// Trap loading from a Gaussian MOT cloud: collisional-blockade regime
// bookkeeping, stochastic per-site occupancy, line densities with and
// without blockade clipping, and Lambert-Beer fluorescence profiles.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "nftrap/errors.hpp"
#include "nftrap/rng.hpp"

namespace nftrap {

struct LoadingModel {
    double r_max = 1e3;          // peak per-site loading rate (1/s)
    double z0 = 0.0;             // MOT center (m)
    double sigma_mot = 0.21e-3;  // Gaussian sigma of the MOT profile (m)
    double gamma = 1.0;          // one-body loss rate (1/s)
    double beta2 = 1e-10;        // two-body loss coefficient (cm^3/s)
    double volume = 2.7e-16;     // confinement volume (cm^3)
    double site_density = 4e6;   // trapping sites per meter
    double duration = 50e-3;     // loading time (s)

    void validate() const {
        if (!(r_max >= 0) || !(sigma_mot > 0) || !(gamma >= 0) || !(beta2 >= 0) ||
            !(volume > 0) || !(site_density > 0) || !(duration > 0))
            throw std::invalid_argument("LoadingModel: nonpositive parameter");
    }

    double beta2_over_v() const { return beta2 / volume; }          // 1/s
    double pair_loss_bound() const { return beta2 / (4.0 * volume); }
    double rate_at(double z) const {
        const double d = (z - z0) / sigma_mot;
        return r_max * std::exp(-0.5 * d * d);
    }
};

// -------------------------------------------------------------------------
// Blockade condition gamma/2 < R < beta2/(4V)  (per-site loading rate)
// -------------------------------------------------------------------------

struct BlockadeReport {
    double lower_bound = 0.0;        // gamma/2
    double upper_bound = 0.0;        // beta2/(4V)
    double beta2_over_v = 0.0;
    bool in_blockade_at_peak = false;
    // z-intervals (relative to z0) where the condition holds for R(z)
    std::vector<std::pair<double, double>> z_ranges;
};

inline BlockadeReport blockade_regime_check(const LoadingModel& model) {
    model.validate();
    BlockadeReport rep;
    rep.lower_bound = 0.5 * model.gamma;
    rep.upper_bound = model.pair_loss_bound();
    rep.beta2_over_v = model.beta2_over_v();
    rep.in_blockade_at_peak =
        model.r_max > rep.lower_bound && model.r_max < rep.upper_bound;
    // R(z) = r_max exp(-z'^2 / 2 sigma^2): solve for the band boundaries.
    auto half_width_at = [&](double level) -> double {
        if (level >= model.r_max) return -1.0;  // never reached
        if (level <= 0.0) return 1e300;
        return model.sigma_mot * std::sqrt(2.0 * std::log(model.r_max / level));
    };
    const double w_lo = half_width_at(rep.lower_bound);   // outside this R < gamma/2
    const double w_hi = half_width_at(rep.upper_bound);   // inside this R > beta/4V
    if (w_lo < 0.0) return rep;   // R below gamma/2 everywhere
    if (w_hi < 0.0) {
        rep.z_ranges.push_back({-w_lo, w_lo});             // upper bound never violated
    } else if (w_hi < w_lo) {
        rep.z_ranges.push_back({-w_lo, -w_hi});            // two side bands
        rep.z_ranges.push_back({w_hi, w_lo});
    }
    return rep;
}

// -------------------------------------------------------------------------
// Stochastic site occupancy: birth-death with pair loss (exact SSA)
//   load:      n -> n+1   rate R
//   one-body:  n -> n-1   rate n gamma
//   pair:      n -> n-2   rate (beta2/V) n(n-1)/2
// -------------------------------------------------------------------------

struct OccupancyStats {
    std::vector<double> histogram;   // P(n) over final states
    std::vector<long> counts;
    double mean = 0.0;
    double p_multi = 0.0;            // P(n >= 2)
    long n_sites = 0;
};

inline int simulate_one_site(double rate, double gamma, double beta2_over_v,
                             double duration, Rng& rng, int n0 = 0) {
    int n = n0;
    double t = 0.0;
    while (true) {
        const double a_load = rate;
        const double a_one = n * gamma;
        const double a_pair = 0.5 * beta2_over_v * n * (n - 1);
        const double a_tot = a_load + a_one + a_pair;
        if (a_tot <= 0.0) break;
        t += rng.exponential(a_tot);
        if (t > duration) break;
        const double u = rng.uniform() * a_tot;
        if (u < a_load) ++n;
        else if (u < a_load + a_one) --n;
        else n -= 2;
    }
    return n;
}

inline OccupancyStats simulate_site_occupancy(double rate, double gamma,
                                              double beta2_over_v, double duration,
                                              long n_sites, std::uint64_t seed,
                                              int n0 = 0) {
    if (rate < 0 || gamma < 0 || beta2_over_v < 0)
        throw std::invalid_argument("simulate_site_occupancy: negative rate");
    if (!(duration > 0))
        throw std::invalid_argument("simulate_site_occupancy: duration must be > 0");
    OccupancyStats stats;
    stats.n_sites = n_sites;
    for (long s = 0; s < n_sites; ++s) {
        Rng rng = Rng::substream(seed, std::uint64_t(s));
        const int n = simulate_one_site(rate, gamma, beta2_over_v, duration, rng, n0);
        if (n >= int(stats.counts.size())) stats.counts.resize(n + 1, 0);
        ++stats.counts[n];
    }
    stats.histogram.resize(stats.counts.size());
    double mean = 0.0, multi = 0.0;
    for (size_t n = 0; n < stats.counts.size(); ++n) {
        stats.histogram[n] = double(stats.counts[n]) / n_sites;
        mean += double(n) * stats.histogram[n];
        if (n >= 2) multi += stats.histogram[n];
    }
    stats.mean = mean;
    stats.p_multi = multi;
    return stats;
}

// -------------------------------------------------------------------------
// Line density and fluorescence
// -------------------------------------------------------------------------

struct LineDensity {
    std::vector<double> z;      // m
    std::vector<double> rho;    // atoms / m
    double integral = 0.0;      // total atom number on the grid
    double clip_fraction = 1.0; // 1 = no clipping

    double max_rho() const {
        double m = 0.0;
        for (double v : rho) m = std::max(m, v);
        return m;
    }
};

struct ProbeParameters {
    double cross_section = 0.0;   // sigma (m^2)
    double a_eff = 1.0;           // effective mode area (m^2)
    double i0 = 1.0;              // input intensity scale (arb.)
    double offset = 0.0;          // constant background added to I_F
};

// rho(z) proportional to R(z), optionally hard-clipped at
// clip_fraction * R_max, rescaled so that (sigma/A_eff) * integral = OD.
inline LineDensity line_density(const LoadingModel& model, bool blockade,
                                double od_target, const ProbeParameters& probe,
                                double clip_fraction = 0.23, int n_grid = 2048,
                                double half_span_sigmas = 3.0) {
    if (!(od_target > 0.0))
        throw std::invalid_argument("line_density: OD target must be > 0");
    if (blockade && !(clip_fraction > 0.0 && clip_fraction <= 1.0))
        throw std::invalid_argument("line_density: clip fraction in (0, 1]");
    LineDensity ld;
    ld.clip_fraction = blockade ? clip_fraction : 1.0;
    ld.z.resize(n_grid);
    ld.rho.resize(n_grid);
    const double lo = model.z0 - half_span_sigmas * model.sigma_mot;
    const double hi = model.z0 + half_span_sigmas * model.sigma_mot;
    const double clip_level = clip_fraction * model.r_max;
    for (int i = 0; i < n_grid; ++i) {
        const double z = lo + (hi - lo) * i / (n_grid - 1);
        double shape = model.rate_at(z);
        if (blockade) shape = std::min(shape, clip_level);
        ld.z[i] = z;
        ld.rho[i] = shape;
    }
    // trapezoid normalization to the OD target
    double integral = 0.0;
    for (int i = 1; i < n_grid; ++i)
        integral += 0.5 * (ld.rho[i] + ld.rho[i - 1]) * (ld.z[i] - ld.z[i - 1]);
    const double want = od_target * probe.a_eff / probe.cross_section;
    const double scale = want / integral;
    for (double& v : ld.rho) v *= scale;
    ld.integral = want;
    return ld;
}

struct FluorescenceProfile {
    std::vector<double> z;
    std::vector<double> i_f;          // fluorescence intensity (arb.)
    double optical_depth = 0.0;       // (sigma/A_eff) * integral rho
    double transmission = 0.0;        // exp(-OD)
};

// Ingestion from the `z_mm,I_F` CSV layout (observed profiles).
template <class Table>
FluorescenceProfile profile_from_table(const Table& t) {
    const int cz = t.column("z_mm");
    const int ci = t.column("I_F");
    if (cz < 0 || ci < 0)
        throw DegenerateObservation("profile_from_table: missing required columns");
    FluorescenceProfile out;
    for (const auto& row : t.rows) {
        out.z.push_back(row[cz] * 1e-3);
        out.i_f.push_back(row[ci]);
    }
    return out;
}

// I_F(z) = rho(z) I0 exp(-(sigma/A_eff) * cumulative integral of rho),
// cumulative by trapezoid on the density grid; probe enters from low z.
inline FluorescenceProfile fluorescence_profile(const LineDensity& rho,
                                                const ProbeParameters& probe) {
    FluorescenceProfile out;
    out.z = rho.z;
    out.i_f.resize(rho.z.size());
    const double k = probe.cross_section / probe.a_eff;
    double cum = 0.0;
    for (size_t i = 0; i < rho.z.size(); ++i) {
        if (i > 0) cum += 0.5 * (rho.rho[i] + rho.rho[i - 1]) * (rho.z[i] - rho.z[i - 1]);
        out.i_f[i] = rho.rho[i] * probe.i0 * std::exp(-k * cum) + probe.offset;
    }
    out.optical_depth = k * cum;
    out.transmission = std::exp(-out.optical_depth);
    return out;
}

// Occupied length of a (clipped) profile: extent where rho exceeds
// `threshold_frac` of its maximum. Atom number = filling x site density x
// that length.
inline double occupied_length(const LineDensity& ld, double threshold_frac) {
    const double level = threshold_frac * ld.max_rho();
    double len = 0.0;
    for (size_t i = 1; i < ld.z.size(); ++i) {
        const bool a = ld.rho[i - 1] >= level, b = ld.rho[i] >= level;
        const double dz = ld.z[i] - ld.z[i - 1];
        if (a && b) len += dz;
        else if (a != b) len += 0.5 * dz;
    }
    return len;
}

inline double atom_number_estimate(const LoadingModel& model, const LineDensity& ld,
                                   double filling = 0.5, double threshold_frac = -1.0) {
    if (threshold_frac <= 0.0) threshold_frac = ld.clip_fraction;
    return filling * model.site_density * occupied_length(ld, threshold_frac);
}

// -------------------------------------------------------------------------
// Model comparison against an observed profile
// -------------------------------------------------------------------------

struct ProfileFit {
    double scale = 1.0, offset = 0.0;
    double clip_fraction = 1.0;   // refit for the blockade candidate
    double chi2 = 0.0;
};

struct ModelComparison {
    ProfileFit blockade;
    ProfileFit gaussian;
    bool blockade_preferred = false;
    double chi2_ratio = 0.0;      // gaussian / blockade
};

namespace detail {

// least squares over scale+offset of model m(z) against observation y(z)
inline double fit_scale_offset(const std::vector<double>& model,
                               const std::vector<double>& obs, double& scale,
                               double& offset) {
    const size_t n = model.size();
    double sm = 0, so = 0, smm = 0, smo = 0;
    for (size_t i = 0; i < n; ++i) {
        sm += model[i];
        so += obs[i];
        smm += model[i] * model[i];
        smo += model[i] * obs[i];
    }
    const double det = smm * n - sm * sm;
    if (std::abs(det) < 1e-300) { scale = 0; offset = so / n; }
    else {
        scale = (smo * n - sm * so) / det;
        offset = (smm * so - sm * smo) / det;
    }
    double chi2 = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double r = scale * model[i] + offset - obs[i];
        chi2 += r * r;
    }
    return chi2;
}

} // namespace detail

// Observed profile must be sampled on the grid of `line_density` outputs
// (same model/grid parameters). The blockade candidate refits its clip
// fraction by golden-section search.
inline ModelComparison compare_models(const std::vector<double>& observed,
                                      const LoadingModel& model, double od_target,
                                      const ProbeParameters& probe, int n_grid = 2048,
                                      double half_span_sigmas = 3.0) {
    double omin = 1e300, omax = -1e300;
    for (double v : observed) { omin = std::min(omin, v); omax = std::max(omax, v); }
    if (!(omax - omin > 1e-12 * std::max(std::abs(omax), 1.0)))
        throw DegenerateObservation("compare_models: observed profile is flat");

    ModelComparison cmp;
    {
        const LineDensity ld = line_density(model, false, od_target, probe, 1.0,
                                            n_grid, half_span_sigmas);
        const FluorescenceProfile f = fluorescence_profile(ld, probe);
        cmp.gaussian.chi2 = detail::fit_scale_offset(f.i_f, observed,
                                                     cmp.gaussian.scale,
                                                     cmp.gaussian.offset);
    }
    {
        auto chi2_of = [&](double clip) {
            const LineDensity ld = line_density(model, true, od_target, probe, clip,
                                                n_grid, half_span_sigmas);
            const FluorescenceProfile f = fluorescence_profile(ld, probe);
            double s, o;
            return detail::fit_scale_offset(f.i_f, observed, s, o);
        };
        double lo = 0.02, hi = 0.999;
        const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
        double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
        double f1 = chi2_of(x1), f2 = chi2_of(x2);
        for (int it = 0; it < 60; ++it) {
            if (f1 < f2) { hi = x2; x2 = x1; f2 = f1; x1 = hi - gr * (hi - lo); f1 = chi2_of(x1); }
            else { lo = x1; x1 = x2; f1 = f2; x2 = lo + gr * (hi - lo); f2 = chi2_of(x2); }
        }
        const double clip = 0.5 * (lo + hi);
        const LineDensity ld = line_density(model, true, od_target, probe, clip,
                                            n_grid, half_span_sigmas);
        const FluorescenceProfile f = fluorescence_profile(ld, probe);
        cmp.blockade.clip_fraction = clip;
        cmp.blockade.chi2 = detail::fit_scale_offset(f.i_f, observed,
                                                     cmp.blockade.scale,
                                                     cmp.blockade.offset);
    }
    cmp.chi2_ratio = cmp.gaussian.chi2 / std::max(cmp.blockade.chi2, 1e-300);
    // the clipped model nests the Gaussian (clip -> 1), so demand a real
    // improvement before charging the extra parameter
    cmp.blockade_preferred = cmp.blockade.chi2 < 0.99 * cmp.gaussian.chi2;
    return cmp;
}

} // namespace nftrap
