// Acceptance suite: one test case per criterion, each printing a PASS/FAIL
// line with the measured numbers. Run via ctest or directly.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "nftrap/dynamics.hpp"
#include "nftrap/io.hpp"
#include "nftrap/loading.hpp"
#include "nftrap/polarimetry.hpp"
#include "nftrap/thermometry.hpp"
#include "nftrap/trap_potential.hpp"
#include "nftrap/trap_sites.hpp"

using namespace nftrap;
namespace fs = std::filesystem;

namespace {

struct Fixture {
    TwoColorPotential pot{TrapConfiguration::reference()};
    std::vector<TrapSite> sites{find_trap_sites(pot)};
    TabulatedPotential tab{pot};
    Vec3 site_pos;
    EscapeCriterion esc;

    Fixture() {
        const auto& s = sites[0];
        site_pos = {s.r * std::cos(s.phi), s.r * std::sin(s.phi), s.z};
        esc = {pot.radius(), 3.0 * s.saddle_distance, true};
    }
};

const Fixture& fx() {
    static Fixture f;
    return f;
}

struct Criterion {
    int id;
    std::string name;
    bool ok = true;
    std::string detail;

    void check(bool cond, const std::string& what) {
        if (!cond) {
            ok = false;
            if (!detail.empty()) detail += "; ";
            detail += what;
        }
    }
    ~Criterion() {
        std::printf("[criterion %2d] %s: %s%s%s\n", id, ok ? "PASS" : "FAIL",
                    name.c_str(), detail.empty() ? "" : " -- ", detail.c_str());
        std::fflush(stdout);
    }
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

} // namespace

TEST_CASE("criterion 1: lattice spacing") {
    Criterion cr{1, "lattice spacing 480-520 nm"};
    const auto spec = FiberSpec::silica_in_vacuum(250e-9, 1064e-9);
    const auto m = GuidedMode::solve_he11(spec);
    const double spacing = spec.wavelength / (2.0 * m.n_eff()) * 1e9;
    cr.detail = fmt("spacing = %.2f nm", spacing);
    cr.check(spacing >= 480.0 && spacing <= 520.0, "outside [480, 520] nm");
    CHECK(cr.ok);
}

TEST_CASE("criterion 2: trapping-site characterization") {
    Criterion cr{2, "site distance/depth/frequencies vs reference"};
    const auto& sites = fx().sites;
    REQUIRE(sites.size() == 2);
    const auto& s = sites[0];
    const double d_nm = s.surface_distance * 1e9;
    const double u0_uk = s.depth / constants::k_B * 1e6;
    cr.detail = fmt("d = %.1f nm, U0 = %.1f uK", d_nm, u0_uk) +
                fmt(", nu = (%.0f, %.0f, %.0f) kHz", s.freq_r / 1e3, s.freq_z / 1e3,
                    s.freq_phi / 1e3);
    cr.check(std::abs(d_nm / 230.0 - 1.0) <= 0.30, "distance out of 230 nm +-30%");
    cr.check(std::abs(u0_uk / 400.0 - 1.0) <= 0.30, "depth out of 400 uK +-30%");
    cr.check(s.freq_z > s.freq_r && s.freq_r > s.freq_phi, "ordering violated");
    cr.check(std::abs(s.freq_r / 200e3 - 1.0) <= 0.30, "nu_r out of +-30%");
    cr.check(std::abs(s.freq_z / 315e3 - 1.0) <= 0.30, "nu_z out of +-30%");
    cr.check(std::abs(s.freq_phi / 140e3 - 1.0) <= 0.30, "nu_phi out of +-30%");
    CHECK(cr.ok);
}

TEST_CASE("criterion 3: exact power-scaling law") {
    Criterion cr{3, "U x2 pointwise (1e-9), frequencies x sqrt(2) (1e-6)"};
    TrapConfiguration cfg = TrapConfiguration::reference();
    TrapConfiguration cfg2 = cfg;
    cfg2.blue.power *= 2.0;
    cfg2.red.power *= 2.0;
    const TwoColorPotential a(cfg), b(cfg2);
    Rng rng(10);
    double worst_u = 0.0;
    for (int k = 0; k < 200; ++k) {
        const double r = a.radius() + rng.uniform(20e-9, 1.2e-6);
        const double phi = rng.uniform(0.0, 2.0 * pi);
        const double z = rng.uniform(-250e-9, 250e-9);
        const double u1 = a.energy_cyl(r, phi, z);
        const double u2 = b.energy_cyl(r, phi, z);
        worst_u = std::max(worst_u, std::abs(u2 - 2.0 * u1) /
                                        std::max(std::abs(u2), 1e-30));
    }
    const auto s1 = find_trap_sites(a);
    const auto s2 = find_trap_sites(b);
    const double rt2 = std::sqrt(2.0);
    double worst_f = 0.0;
    worst_f = std::max(worst_f, std::abs(s2[0].freq_r / s1[0].freq_r / rt2 - 1.0));
    worst_f = std::max(worst_f, std::abs(s2[0].freq_z / s1[0].freq_z / rt2 - 1.0));
    worst_f = std::max(worst_f, std::abs(s2[0].freq_phi / s1[0].freq_phi / rt2 - 1.0));
    cr.detail = fmt("max |dU| rel = %.2e, max freq-ratio err = %.2e", worst_u, worst_f);
    cr.check(worst_u < 1e-9, "U scaling above 1e-9");
    cr.check(worst_f < 1e-6, "frequency scaling above 1e-6");
    CHECK(cr.ok);
}

TEST_CASE("criterion 4: thermometry round trip over 5 seeds") {
    Criterion cr{4, "T recovery within 5%, p_max within 0.02 (3 temps x 5 seeds)"};
    const auto& f = fx();
    const auto& site = f.sites[0];

    std::vector<double> e0s, ulows;
    for (int i = 0; i < 6; ++i) e0s.push_back(0.10 + (0.85 - 0.10) * i / 5.0);
    for (int i = 0; i < 8; ++i) ulows.push_back(0.02 + (0.90 - 0.02) * i / 7.0);

    std::vector<double> egrid;
    for (int i = 1; i <= 48; ++i) {
        const double t = double(i) / 48;
        egrid.push_back(0.97 * site.depth * t * t);
    }
    const auto dos = compute_dos(f.tab, f.site_pos, egrid, site.depth, 40000, 99);

    double worst_t = 0.0, worst_p = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        EscapeMapConfig mc;
        mc.n_traj = 1000;
        mc.seed = seed;
        const auto map = escape_map(f.tab, f.site_pos, site.depth, site.min_frequency(),
                                    site.max_frequency(), e0s, ulows, f.esc, mc);
        const auto poly = fit_escape_polynomial(map);
        // synthetic survival curve sampled like the measured one (~20 points
        // across the full lowering range), read through the fitted polynomial
        std::vector<double> u_data;
        for (int i = 0; i < 20; ++i) u_data.push_back(0.02 + (0.95 - 0.02) * i / 19.0);
        for (double t_uk : {20.0, 30.0, 45.0}) {
            const double t_true = t_uk * 1e-6;
            Rng noise = Rng::substream(seed, std::uint64_t(t_uk));
            std::vector<SurvivalSample> data;
            for (double u : u_data) {
                const double e0 = site.depth * poly.forward(u);
                const double frac = 0.92 * dos.cumulative(e0, t_true) +
                                    0.02 * noise.normal();
                data.push_back({u, std::clamp(frac, 0.0, 1.0), 0.02});
            }
            const auto fit = fit_temperature(data, poly, dos);
            worst_t = std::max(worst_t, std::abs(fit.temperature / t_true - 1.0));
            worst_p = std::max(worst_p, std::abs(fit.p_max - 0.92));
        }
    }
    cr.detail = fmt("worst |dT|/T = %.3f, worst |dp_max| = %.3f", worst_t, worst_p);
    cr.check(worst_t <= 0.05, "temperature recovery above 5%");
    cr.check(worst_p <= 0.02, "p_max recovery above 0.02");
    CHECK(cr.ok);
}

TEST_CASE("criterion 5: occupation/localization identities") {
    Criterion cr{5, "occupations, widths, volume, Lamb-Dicke at T = 29.8 uK"};
    const auto rep = occupation_report(29.8e-6, 200e3, 315e3, 140e3);
    cr.detail = fmt("n = (%.3f, %.3f, %.3f)", rep.n_r, rep.n_z, rep.n_phi) +
                fmt(", widths = (%.1f, %.1f, %.1f) nm", rep.width_z * 1e9,
                    rep.width_r * 1e9, rep.width_phi * 1e9) +
                fmt(", V = %.3e cm^3, eta = %.3f", rep.volume * 1e6, rep.lamb_dicke);
    cr.check(std::abs(rep.n_z / 1.4 - 1.0) <= 0.10, "n_z out of 10%");
    cr.check(std::abs(rep.n_r / 2.5 - 1.0) <= 0.10, "n_r out of 10%");
    cr.check(std::abs(rep.n_phi / 3.7 - 1.0) <= 0.10, "n_phi out of 10%");
    cr.check(std::abs(rep.width_z / 42e-9 - 1.0) <= 0.05, "width_z out of 5%");
    cr.check(std::abs(rep.width_r / 67e-9 - 1.0) <= 0.05, "width_r out of 5%");
    cr.check(std::abs(rep.width_phi / 95e-9 - 1.0) <= 0.05, "width_phi out of 5%");
    // The three widths each sit within 5% of their reference values, but the
    // compounded product lands ~10.9% above the 2.7e-16 cm^3 reference (whose
    // own occupation inputs sit ~8% below the closed formula at exactly
    // 29.8 uK and 315 kHz). The volume bound is asserted as stated.
    cr.check(std::abs(rep.volume * 1e6 / 2.7e-16 - 1.0) <= 0.10, "volume out of 10%");
    cr.check(std::abs(rep.lamb_dicke - 0.08) <= 0.01, "eta out of 0.08 +- 0.01");
    const double t_ratio = 0.075 * 400e-6;   // kT = 0.075 U0 at U0 = kB 400 uK
    cr.check(std::abs(t_ratio / 30e-6 - 1.0) < 1e-12, "0.075 * 400 uK != 30 uK");
    CHECK(cr.ok);
}

TEST_CASE("criterion 6: blockade numbers and occupancy") {
    Criterion cr{6, "beta2/V arithmetic, half filling, atom number"};
    LoadingModel model;
    model.r_max = 1e3;
    model.gamma = 1.0;
    model.beta2 = 1e-10;
    model.volume = 2.7e-16;
    model.sigma_mot = 0.21e-3;
    model.site_density = 4e6;
    model.duration = 50e-3;

    const double b2v = model.beta2_over_v();
    cr.check(b2v == 1e-10 / 2.7e-16, "beta2/V not the exact quotient");
    cr.check(std::abs(b2v / 3.7e5 - 1.0) < 0.01, "beta2/V not 3.7e5 within 1%");

    const auto occ = simulate_site_occupancy(model.r_max, model.gamma, b2v,
                                             model.duration, 10000, 2026);
    cr.detail = fmt("beta2/V = %.4e 1/s, mean = %.3f, P(n>=2) = %.4f", b2v, occ.mean,
                    occ.p_multi);
    cr.check(std::abs(occ.mean - 0.50) <= 0.05, "mean occupancy out of 0.50 +- 0.05");
    cr.check(occ.p_multi < 0.02, "P(n >= 2) above 0.02");

    ProbeParameters probe;
    probe.cross_section = 1.413e-13;
    probe.a_eff = 3.5645e-12;
    const auto ld = line_density(model, true, 1.0, probe, 0.23);
    const double atoms = atom_number_estimate(model, ld, 0.5);
    cr.detail += fmt(", atoms = %.0f", atoms);
    cr.check(std::abs(atoms / 2000.0 - 1.0) <= 0.15, "atom number out of 2000 +- 15%");
    CHECK(cr.ok);
}

TEST_CASE("criterion 7: fluorescence model") {
    Criterion cr{7, "Beer-Lambert transmission and model selection"};
    LoadingModel model;
    model.sigma_mot = 0.21e-3;
    model.site_density = 4e6;
    ProbeParameters probe;
    probe.cross_section = 1.413e-13;
    probe.a_eff = 3.5645e-12;

    const auto ld = line_density(model, true, 1.0, probe, 0.23);
    const auto fl = fluorescence_profile(ld, probe);
    cr.detail = fmt("T(OD=1) = %.8f", fl.transmission);
    cr.check(std::abs(fl.transmission - std::exp(-1.0)) < 1e-6,
             "transmission not exp(-1) within 1e-6");

    std::vector<double> obs = fl.i_f;
    double peak = 0.0;
    for (double v : obs) peak = std::max(peak, v);
    Rng rng(31337);
    for (double& v : obs) v += 0.05 * peak + 0.01 * peak * rng.normal();
    const auto cmp = compare_models(obs, model, 1.0, probe);
    cr.detail += fmt(", chi2 ratio = %.1f, clip = %.3f", cmp.chi2_ratio,
                     cmp.blockade.clip_fraction);
    cr.check(cmp.blockade_preferred, "blockade model not preferred");
    cr.check(cmp.chi2_ratio > 2.0, "chi2 factor below 2");
    CHECK(cr.ok);
}

TEST_CASE("criterion 8: polarimetry") {
    Criterion cr{8, "contrasts, camera offset, interference mechanism"};
    const auto spec = FiberSpec::silica_in_vacuum(250e-9, 1064e-9);
    const auto mode = GuidedMode::solve_he11(spec, 1.0, 0.0);
    const auto ens = sample_ensemble(spec.radius, 10000, 1e-3, 777);
    const auto prep = PreparedScatterers::build(mode, ens);
    const ScatterOperator cam1(prep, CameraModel::camera1());
    const ScatterOperator cam2(prep, CameraModel::camera2());
    const Jones2 id;

    const auto scan = scan_polarization(cam1, cam2, PolarizerSetting::PassTransverse,
                                        id, 37, pi, 0.0);
    std::vector<double> phis, p1, p2;
    for (const auto& q : scan.points) {
        phis.push_back(q.phi);
        p1.push_back(q.p_cam1);
        p2.push_back(q.p_cam2);
    }
    const auto f1 = fit_scan(phis, p1);
    const auto f2 = fit_scan(phis, p2);
    cr.detail = fmt("ideal C = %.4f", std::min(f1.contrast, f2.contrast));
    cr.check(f1.contrast > 0.99 && f2.contrast > 0.99, "ideal contrast below 0.99");

    const double offset = std::abs(std::remainder(f1.phi0 - f2.phi0, pi)) * 180.0 / pi;
    cr.detail += fmt(", offset = %.2f deg", offset);
    cr.check(std::abs(offset - 90.0) <= 3.0, "camera offset out of 90 +- 3 deg");

    // 12% unpolarized background; the filter transmits half of it
    const auto scan_b = scan_polarization(cam1, cam2, PolarizerSetting::PassTransverse,
                                          id, 37, pi, 0.06);
    std::vector<double> pb;
    for (const auto& q : scan_b.points) pb.push_back(q.p_cam1);
    const auto fb = fit_scan(phis, pb);
    cr.detail += fmt(", C(12%% bg) = %.4f", fb.contrast);
    cr.check(std::abs(fb.contrast - 0.88) <= 0.02, "background contrast out of 0.88 +- 0.02");

    CameraModel pencil = CameraModel::camera1(PolarizerSetting::PassZ);
    pencil.n_directions = 1;
    const ScatterOperator ablated(prep, pencil, false);
    const std::array<Complex, 2> cx = {Complex(1, 0), Complex(0, 0)};
    const double peak = cam2.power(cx, PolarizerSetting::PassTransverse);
    const double resid = ablated.power(cx, PolarizerSetting::PassZ);
    cr.detail += fmt(", ablated/peak = %.1e", resid / peak);
    cr.check(resid < 1e-6 * peak, "phase-ablated pass-z signal above 1e-6 of peak");
    CHECK(cr.ok);
}

TEST_CASE("criterion 9: numerical hygiene") {
    Criterion cr{9, "symplectic drift, gradients, adiabatic invariant, DOS"};
    const auto& f = fx();
    const auto& site = f.sites[0];

    // symplectic energy drift over 1e3 periods, dt = 1/(100 nu_z)
    {
        Rng rng(5);
        const double e0 = 0.5 * site.depth;
        const auto reg = sampling_region(f.tab, f.site_pos, e0, site.depth);
        auto st = sample_microcanonical(f.tab, reg, e0, rng);
        const double ei = 0.5 * cesium::mass * st.velocity.dot(st.velocity) +
                          f.tab.energy(st.position, 1.0);
        RampSchedule none;
        const auto fin = integrate_trajectory(f.tab, none, st, 1.0 / (100.0 * site.freq_z),
                                              1000.0 / site.freq_z, site.max_frequency(),
                                              f.esc);
        const double ef = 0.5 * cesium::mass * fin.velocity.dot(fin.velocity) +
                          f.tab.energy(fin.position, 1.0);
        const double drift = std::abs(ef - ei) / e0;
        cr.detail = fmt("drift = %.2e", drift);
        cr.check(fin.alive, "test particle escaped");
        cr.check(drift < 1e-4, "energy drift above 1e-4");
    }

    // analytic vs finite-difference gradient
    {
        Rng rng(6);
        double worst = 0.0;
        for (int k = 0; k < 100; ++k) {
            const double r = f.pot.radius() + rng.uniform(30e-9, 900e-9);
            const double phi = rng.uniform(0.0, 2.0 * pi);
            const double z = rng.uniform(-250e-9, 250e-9);
            const Vec3 p{r * std::cos(phi), r * std::sin(phi), z};
            const Vec3 g = f.pot.gradient(p);
            const double h = std::cbrt(2.2e-16) * 1e-6;
            const Vec3 axes[3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
            const double gc[3] = {g.x, g.y, g.z};
            for (int ax = 0; ax < 3; ++ax) {
                const double fd = (f.pot.energy(p + axes[ax] * h) -
                                   f.pot.energy(p + axes[ax] * -h)) / (2.0 * h);
                const double scale = std::max(std::abs(fd),
                                              std::abs(f.pot.energy(p)) * 1e7);
                worst = std::max(worst, std::abs(gc[ax] - fd) / scale);
            }
        }
        cr.detail += fmt(", grad err = %.2e", worst);
        cr.check(worst < 1e-6, "gradient mismatch above 1e-6");
    }

    // adiabatic invariant at eps = 0.01 (1D harmonic)
    {
        const double nu0 = 200e3, mass = cesium::mass;
        const double w0 = 2.0 * pi * nu0;
        const auto ramp = build_ramp(0.25, 0.01, nu0, 0.0);
        double x = 25e-9, v = 0.0, t = 0.0;
        const double dt = 1.0 / (300.0 * nu0);
        double force = -mass * w0 * w0 * ramp.scale(0.0) * x;
        while (t < ramp.t_down) {
            v += 0.5 * dt * force / mass;
            x += dt * v;
            t += dt;
            force = -mass * w0 * w0 * ramp.scale(t) * x;
            v += 0.5 * dt * force / mass;
        }
        const double s = ramp.scale(ramp.t_down);
        const double e_i = 0.5 * mass * w0 * w0 * (25e-9) * (25e-9);
        const double e_f = 0.5 * mass * v * v + 0.5 * mass * w0 * w0 * s * x * x;
        const double ratio = (e_f / (nu0 * std::sqrt(s))) / (e_i / nu0);
        cr.detail += fmt(", action ratio = %.4f", ratio);
        cr.check(std::abs(ratio - 1.0) < 0.01, "action not conserved within 1%");
    }

    // DOS vs the analytic harmonic oracle
    {
        struct Well {
            double mass = cesium::mass;
            double wx = 2.0 * pi * 200e3, wy = 2.0 * pi * 140e3, wz = 2.0 * pi * 315e3;
            double atom_mass() const { return mass; }
            double energy(const Vec3& p, double) const {
                return 0.5 * mass * (wx * wx * p.x * p.x + wy * wy * p.y * p.y +
                                     wz * wz * p.z * p.z);
            }
            Vec3 gradient(const Vec3& p, double) const {
                return {mass * wx * wx * p.x, mass * wy * wy * p.y,
                        mass * wz * wz * p.z};
            }
        } well;
        const double u0 = constants::k_B * 400e-6;
        std::vector<double> grid;
        for (int i = 1; i <= 24; ++i) {
            const double q = double(i) / 24;
            grid.push_back(0.9 * u0 * q * q);
        }
        const auto dos = compute_dos(well, Vec3{0, 0, 0}, grid, u0, 40000, 12);
        double worst = 0.0;
        for (size_t i = 0; i < dos.energy.size(); ++i) {
            const double ana = harmonic_dos(dos.energy[i], 200e3, 140e3, 315e3);
            worst = std::max(worst, std::abs(dos.g[i] / ana - 1.0));
        }
        cr.detail += fmt(", DOS err = %.3f", worst);
        cr.check(worst < 0.02, "DOS off the harmonic oracle by more than 2%");
    }
    CHECK(cr.ok);
}

TEST_CASE("criterion 10: byte-identical CLI reruns") {
    Criterion cr{10, "identical scenario + seed reproduce identical outputs"};
    const char* bin = std::getenv("NFTRAP_BIN");
    if (!bin) {
        cr.ok = false;
        cr.detail = "NFTRAP_BIN not set";
        CHECK(cr.ok);
        return;
    }
    const fs::path base = fs::temp_directory_path() / "nftrap_acceptance_det";
    fs::remove_all(base);
    auto checksums = [](const std::string& manifest) {
        std::istringstream in(manifest);
        std::string line, out;
        while (std::getline(in, line))
            if (line.rfind("output ", 0) == 0) out += line + "\n";
        return out;
    };
    const std::vector<std::string> verbs = {"modes", "trap", "polarization",
                                            "thermometry", "fluorescence", "occupancy"};
    for (const auto& verb : verbs) {
        const std::string d1 = (base / (verb + "_1")).string();
        const std::string d2 = (base / (verb + "_2")).string();
        const std::string args = verb + " --seed 11 --samples 150 ";
        const int rc1 = std::system((std::string(bin) + " " + args + "--out " + d1 +
                                     " > /dev/null 2>&1").c_str());
        const int rc2 = std::system((std::string(bin) + " " + args + "--out " + d2 +
                                     " > /dev/null 2>&1").c_str());
        cr.check(rc1 == 0 && rc2 == 0, verb + " run failed");
        if (rc1 == 0 && rc2 == 0) {
            const std::string c1 = checksums(read_file(d1 + "/manifest.txt"));
            const std::string c2 = checksums(read_file(d2 + "/manifest.txt"));
            cr.check(!c1.empty() && c1 == c2, verb + " outputs differ between runs");
        }
    }
    if (cr.ok) cr.detail = "6 verbs x 2 runs, all checksums equal";
    CHECK(cr.ok);
}
