#pragma once

// Location and characterization of the potential minima: converged site
// positions, depth to the radial escape saddle, and trap frequencies from
// the eigenvalues of a finite-difference Hessian.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "nftrap/errors.hpp"
#include "nftrap/trap_potential.hpp"

namespace nftrap {

struct TrapSite {
    double r = 0.0, phi = 0.0, z = 0.0;    // position of the minimum
    double u_min = 0.0;                    // potential at the minimum (J)
    double depth = 0.0;                    // to the radial escape saddle (J)
    double freq_r = 0.0, freq_phi = 0.0, freq_z = 0.0;  // Hz
    double surface_distance = 0.0;         // r - a (m)
    double saddle_distance = 0.0;          // site-to-saddle distance along r (m)

    double max_frequency() const { return std::max({freq_r, freq_phi, freq_z}); }
    double min_frequency() const { return std::min({freq_r, freq_phi, freq_z}); }
};

namespace detail {

// Symmetric 3x3 eigenvalues by cyclic Jacobi sweeps; vectors in columns.
inline void jacobi_eigen3(std::array<std::array<double, 3>, 3> m,
                          std::array<double, 3>& eval,
                          std::array<std::array<double, 3>, 3>& evec) {
    evec = {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
    for (int sweep = 0; sweep < 50; ++sweep) {
        double off = std::abs(m[0][1]) + std::abs(m[0][2]) + std::abs(m[1][2]);
        double scale = std::abs(m[0][0]) + std::abs(m[1][1]) + std::abs(m[2][2]);
        if (off <= 1e-15 * std::max(scale, 1e-300)) break;
        for (int p = 0; p < 2; ++p) {
            for (int q = p + 1; q < 3; ++q) {
                if (m[p][q] == 0.0) continue;
                const double theta = 0.5 * (m[q][q] - m[p][p]) / m[p][q];
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                std::array<std::array<double, 3>, 3> r = {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
                r[p][p] = c; r[q][q] = c; r[p][q] = s; r[q][p] = -s;
                // m = r^T m r
                std::array<std::array<double, 3>, 3> tmp{};
                for (int i = 0; i < 3; ++i)
                    for (int j = 0; j < 3; ++j) {
                        double acc = 0.0;
                        for (int k = 0; k < 3; ++k)
                            for (int l = 0; l < 3; ++l)
                                acc += r[k][i] * m[k][l] * r[l][j];
                        tmp[i][j] = acc;
                    }
                m = tmp;
                std::array<std::array<double, 3>, 3> ev{};
                for (int i = 0; i < 3; ++i)
                    for (int j = 0; j < 3; ++j) {
                        double acc = 0.0;
                        for (int k = 0; k < 3; ++k) acc += evec[i][k] * r[k][j];
                        ev[i][j] = acc;
                    }
                evec = ev;
            }
        }
    }
    for (int i = 0; i < 3; ++i) eval[i] = m[i][i];
}

} // namespace detail

// Finite-difference Hessian at (r, phi, z) in local orthonormal coordinates
// (dr, r dphi, dz); steps 1 nm radially/axially and 1 mrad azimuthally.
inline std::array<std::array<double, 3>, 3>
site_hessian(const TwoColorPotential& pot, double r, double phi, double z) {
    const double hr = 1e-9, hz = 1e-9, hp = 1e-3;   // rad
    auto u = [&](double dr, double dphi, double dz) {
        return pot.energy_cyl(r + dr, phi + dphi, z + dz);
    };
    const double u0 = u(0, 0, 0);
    std::array<std::array<double, 3>, 3> h{};
    h[0][0] = (u(hr, 0, 0) - 2 * u0 + u(-hr, 0, 0)) / (hr * hr);
    h[1][1] = (u(0, hp, 0) - 2 * u0 + u(0, -hp, 0)) / (hp * hp * r * r);
    h[2][2] = (u(0, 0, hz) - 2 * u0 + u(0, 0, -hz)) / (hz * hz);
    h[0][1] = h[1][0] = (u(hr, hp, 0) - u(hr, -hp, 0) - u(-hr, hp, 0) + u(-hr, -hp, 0)) /
                        (4 * hr * hp * r);
    h[0][2] = h[2][0] = (u(hr, 0, hz) - u(hr, 0, -hz) - u(-hr, 0, hz) + u(-hr, 0, -hz)) /
                        (4 * hr * hz);
    h[1][2] = h[2][1] = (u(0, hp, hz) - u(0, hp, -hz) - u(0, -hp, hz) + u(0, -hp, -hz)) /
                        (4 * hp * r * hz);
    return h;
}

// Locates the trapping sites within one lattice period. For the default
// crossed-polarization configuration this yields exactly two minima, one
// per linear array, at the standing-wave antinode.
inline std::vector<TrapSite> find_trap_sites(const TwoColorPotential& pot) {
    const double a = pot.radius();
    const double period = pot.lattice_period();
    const int nr = 60, np = 72, nz = 17;
    const double r_lo = a + 20e-9, r_hi = a + 1.4e-6;

    auto idx_u = [&](int ir, int ip, int iz) {
        const double r = r_lo + (r_hi - r_lo) * ir / (nr - 1);
        const double phi = 2.0 * pi * ip / np;
        const double z = period * iz / nz - 0.5 * period;
        return pot.energy_cyl(r, phi, z);
    };

    std::vector<double> grid(nr * np * nz);
    for (int ir = 0; ir < nr; ++ir)
        for (int ip = 0; ip < np; ++ip)
            for (int iz = 0; iz < nz; ++iz)
                grid[(ir * np + ip) * nz + iz] = idx_u(ir, ip, iz);

    auto at = [&](int ir, int ip, int iz) {
        ip = (ip % np + np) % np;
        iz = (iz % nz + nz) % nz;
        return grid[(ir * np + ip) * nz + iz];
    };

    std::vector<std::array<double, 3>> seeds;
    for (int ir = 1; ir < nr - 1; ++ir)
        for (int ip = 0; ip < np; ++ip)
            for (int iz = 0; iz < nz; ++iz) {
                const double u0 = at(ir, ip, iz);
                bool is_min = true;
                for (int dr = -1; dr <= 1 && is_min; ++dr)
                    for (int dp = -1; dp <= 1 && is_min; ++dp)
                        for (int dz = -1; dz <= 1 && is_min; ++dz) {
                            if (!dr && !dp && !dz) continue;
                            if (at(ir + dr, ip + dp, iz + dz) < u0) is_min = false;
                        }
                if (is_min)
                    seeds.push_back({r_lo + (r_hi - r_lo) * ir / (nr - 1),
                                     2.0 * pi * ip / np,
                                     period * iz / nz - 0.5 * period});
            }
    if (seeds.empty())
        throw NoMinimumFound("find_trap_sites: no interior minimum on the probe grid "
                             "(repulsive-dominated configuration?)");

    std::vector<TrapSite> sites;
    for (const auto& seed : seeds) {
        double r = seed[0], phi = seed[1], z = seed[2];
        // Damped Newton on the analytic gradient, FD Hessian.
        bool converged = false;
        for (int it = 0; it < 80; ++it) {
            const CylGradient g = pot.gradient_cyl(r, phi, z);
            const std::array<double, 3> gl = {g.d_r, g.d_phi / r, g.d_z};
            auto h = site_hessian(pot, r, phi, z);
            // Solve h * d = -gl (Cramer; matrix is tiny and well-scaled).
            const double det =
                h[0][0] * (h[1][1] * h[2][2] - h[1][2] * h[2][1]) -
                h[0][1] * (h[1][0] * h[2][2] - h[1][2] * h[2][0]) +
                h[0][2] * (h[1][0] * h[2][1] - h[1][1] * h[2][0]);
            if (det == 0.0) break;
            auto solve = [&](int col) {
                auto hc = h;
                for (int i = 0; i < 3; ++i) hc[i][col] = -gl[i];
                return (hc[0][0] * (hc[1][1] * hc[2][2] - hc[1][2] * hc[2][1]) -
                        hc[0][1] * (hc[1][0] * hc[2][2] - hc[1][2] * hc[2][0]) +
                        hc[0][2] * (hc[1][0] * hc[2][1] - hc[1][1] * hc[2][0])) / det;
            };
            double dr = solve(0), dl = solve(1), dz = solve(2);
            const double max_step = 20e-9;
            const double norm = std::sqrt(dr * dr + dl * dl + dz * dz);
            if (norm > max_step) {
                dr *= max_step / norm;
                dl *= max_step / norm;
                dz *= max_step / norm;
            }
            r += dr;
            phi += dl / r;
            z += dz;
            const CylGradient g2 = pot.gradient_cyl(r, phi, z);
            const double gn = std::sqrt(g2.d_r * g2.d_r + (g2.d_phi / r) * (g2.d_phi / r) +
                                        g2.d_z * g2.d_z);
            const double u_here = std::abs(pot.energy_cyl(r, phi, z));
            if (gn * 1e-9 < 1e-12 * std::max(u_here, 1e-32)) { converged = true; break; }
        }
        if (!converged) continue;

        phi = std::fmod(std::fmod(phi, 2.0 * pi) + 2.0 * pi, 2.0 * pi);
        z = std::remainder(z, period);
        bool dup = false;
        for (const auto& s : sites) {
            const double dphi = std::remainder(phi - s.phi, 2.0 * pi);
            const double dz = std::remainder(z - s.z, period);
            if (std::abs(r - s.r) < 2e-9 && std::abs(dphi) * r < 2e-9 && std::abs(dz) < 2e-9)
                dup = true;
        }
        if (dup) continue;

        TrapSite site;
        site.r = r;
        site.phi = phi;
        site.z = z;
        site.u_min = pot.energy_cyl(r, phi, z);
        site.surface_distance = r - a;

        // Depth: lowest escape barrier along the radial line through the
        // site's (phi, z). Outward the asymptote U -> 0 acts as the saddle
        // when no interior barrier exists; inward the barrier between site
        // and surface competes once a surface term is enabled.
        double u_saddle_out = 0.0;
        double r_saddle = r + 4e-6;
        for (int i = 1; i <= 4000; ++i) {
            const double rr = r + (4e-6) * i / 4000.0;
            const double uu = pot.energy_cyl(rr, phi, z);
            if (uu > u_saddle_out) { u_saddle_out = uu; r_saddle = rr; }
        }
        double u_barrier_in = 1e300;
        {
            double peak = -1e300;
            const int n_in = 512;
            for (int i = 1; i < n_in; ++i) {
                const double rr = a + (r - a) * i / n_in;
                peak = std::max(peak, pot.energy_cyl(rr, phi, z));
            }
            u_barrier_in = peak;
        }
        site.depth = std::min(u_saddle_out, u_barrier_in) - site.u_min;
        if (u_saddle_out == 0.0) {
            // no outward barrier: reference radius where 99% of the outward
            // climb is done
            for (int i = 1; i <= 4000; ++i) {
                const double rr = r + (4e-6) * i / 4000.0;
                if (pot.energy_cyl(rr, phi, z) > site.u_min +
                                                     0.99 * (u_saddle_out - site.u_min)) {
                    r_saddle = rr;
                    break;
                }
            }
        }
        site.saddle_distance = r_saddle - r;

        auto h = site_hessian(pot, r, phi, z);
        std::array<double, 3> eval;
        std::array<std::array<double, 3>, 3> evec;
        detail::jacobi_eigen3(h, eval, evec);
        if (!(eval[0] > 0 && eval[1] > 0 && eval[2] > 0)) continue;  // saddle, not a trap
        // Label each eigenvalue by the dominant component of its eigenvector
        // in the (r, phi, z) local frame.
        for (int k = 0; k < 3; ++k) {
            const double nu = std::sqrt(eval[k] / pot.atom_mass()) / (2.0 * pi);
            const double ar = std::abs(evec[0][k]);
            const double ap = std::abs(evec[1][k]);
            const double az = std::abs(evec[2][k]);
            if (ar >= ap && ar >= az) site.freq_r = nu;
            else if (ap >= ar && ap >= az) site.freq_phi = nu;
            else site.freq_z = nu;
        }
        sites.push_back(site);
    }

    if (sites.empty())
        throw NoMinimumFound("find_trap_sites: refinement found no positive-definite minimum");
    std::sort(sites.begin(), sites.end(),
              [](const TrapSite& a, const TrapSite& b) { return a.phi < b.phi; });
    return sites;
}

// ---------------------------------------------------------------------------
// Equipotential contours (marching squares) in a plane through a site.
// ---------------------------------------------------------------------------

struct ContourSet {
    // Each loop is an ordered (u, v) polyline in the plane's coordinates;
    // closed loops have identical first/last vertex.
    std::vector<std::vector<std::array<double, 2>>> loops;
    std::vector<bool> closed;
};

enum class SlicePlane { XY, ZR };

// Contour of U = u_min + level in the chosen plane through `site`.
// XY: (u, v) = (x, y) at z = site.z. ZR: (u, v) = (z, r) at phi = site.phi.
inline ContourSet equipotential_slice(const TwoColorPotential& pot, const TrapSite& site,
                                      double level, SlicePlane plane = SlicePlane::XY,
                                      int n_grid = 320) {
    if (level < 0.0)
        throw std::invalid_argument("equipotential_slice: level must be >= 0");
    ContourSet out;
    if (level == 0.0) {
        if (plane == SlicePlane::XY)
            out.loops.push_back({{site.r * std::cos(site.phi), site.r * std::sin(site.phi)}});
        else
            out.loops.push_back({{site.z, site.r}});
        out.closed.push_back(true);
        return out;
    }
    if (level >= site.depth)
        throw LevelAboveDepth("equipotential_slice: level exceeds the trap depth; "
                              "contour is open");

    const double target = site.u_min + level;
    double u_lo, u_hi, v_lo, v_hi;
    if (plane == SlicePlane::XY) {
        const double half = 2.2 * site.r;
        u_lo = -half; u_hi = half; v_lo = -half; v_hi = half;
    } else {
        const double period = pot.lattice_period();
        u_lo = site.z - period; u_hi = site.z + period;
        v_lo = pot.radius() + 1e-9; v_hi = site.r + 6.0 * site.saddle_distance;
    }

    const int n = n_grid;
    std::vector<double> vals((n + 1) * (n + 1));
    auto sample = [&](int i, int j) -> double& { return vals[i * (n + 1) + j]; };
    for (int i = 0; i <= n; ++i)
        for (int j = 0; j <= n; ++j) {
            const double u = u_lo + (u_hi - u_lo) * i / n;
            const double v = v_lo + (v_hi - v_lo) * j / n;
            double val;
            if (plane == SlicePlane::XY) {
                const double r = std::hypot(u, v);
                val = (r < 1e-12) ? 1e30 : pot.energy_cyl(r, std::atan2(v, u), site.z);
                if (r < pot.radius()) val = 1e30;   // inside the fiber
            } else {
                val = pot.energy_cyl(v, site.phi, u);
            }
            sample(i, j) = val - target;
        }

    // Marching squares; segments keyed by grid-edge ids so loops chain exactly.
    struct Seg { long long e0, e1; std::array<double, 2> p0, p1; };
    auto edge_id = [&](int i, int j, bool horizontal) {
        return (long long)(i * (n + 1) + j) * 2 + (horizontal ? 1 : 0);
    };
    auto interp = [&](int i0, int j0, int i1, int j1) -> std::array<double, 2> {
        const double f0 = sample(i0, j0), f1 = sample(i1, j1);
        const double t = f0 / (f0 - f1);
        const double ua = u_lo + (u_hi - u_lo) * i0 / n, ub = u_lo + (u_hi - u_lo) * i1 / n;
        const double va = v_lo + (v_hi - v_lo) * j0 / n, vb = v_lo + (v_hi - v_lo) * j1 / n;
        return {ua + t * (ub - ua), va + t * (vb - va)};
    };

    std::vector<Seg> segs;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double f00 = sample(i, j), f10 = sample(i + 1, j);
            const double f01 = sample(i, j + 1), f11 = sample(i + 1, j + 1);
            int code = (f00 < 0 ? 1 : 0) | (f10 < 0 ? 2 : 0) |
                       (f11 < 0 ? 4 : 0) | (f01 < 0 ? 8 : 0);
            if (code == 0 || code == 15) continue;
            // Cell edges: bottom (i,j)-(i+1,j), right (i+1,j)-(i+1,j+1),
            // top (i,j+1)-(i+1,j+1), left (i,j)-(i,j+1).
            const long long eb = edge_id(i, j, true), er = edge_id(i + 1, j, false);
            const long long et = edge_id(i, j + 1, true), el = edge_id(i, j, false);
            auto pb = [&] { return interp(i, j, i + 1, j); };
            auto pr = [&] { return interp(i + 1, j, i + 1, j + 1); };
            auto pt = [&] { return interp(i, j + 1, i + 1, j + 1); };
            auto pl = [&] { return interp(i, j, i, j + 1); };
            auto add = [&](long long a, std::array<double, 2> pa,
                           long long b, std::array<double, 2> pb2) {
                segs.push_back({a, b, pa, pb2});
            };
            switch (code) {
                case 1: case 14: add(eb, pb(), el, pl()); break;
                case 2: case 13: add(eb, pb(), er, pr()); break;
                case 3: case 12: add(el, pl(), er, pr()); break;
                case 4: case 11: add(er, pr(), et, pt()); break;
                case 6: case 9:  add(eb, pb(), et, pt()); break;
                case 7: case 8:  add(el, pl(), et, pt()); break;
                case 5: add(eb, pb(), el, pl()); add(er, pr(), et, pt()); break;
                case 10: add(eb, pb(), er, pr()); add(el, pl(), et, pt()); break;
            }
        }

    // Chain segments into polylines.
    std::vector<bool> used(segs.size(), false);
    std::multimap<long long, size_t> by_edge;
    for (size_t k = 0; k < segs.size(); ++k) {
        by_edge.insert({segs[k].e0, k});
        by_edge.insert({segs[k].e1, k});
    }
    auto take = [&](long long edge, size_t skip) -> long long {
        auto range = by_edge.equal_range(edge);
        for (auto it = range.first; it != range.second; ++it)
            if (!used[it->second] && it->second != skip) return (long long)it->second;
        return -1;
    };
    for (size_t k = 0; k < segs.size(); ++k) {
        if (used[k]) continue;
        used[k] = true;
        std::vector<std::array<double, 2>> pts = {segs[k].p0, segs[k].p1};
        long long head = segs[k].e1;
        const long long start = segs[k].e0;
        bool is_closed = false;
        while (true) {
            const long long nk = take(head, SIZE_MAX);
            if (nk < 0) break;
            used[nk] = true;
            const Seg& s = segs[nk];
            if (s.e0 == head) { pts.push_back(s.p1); head = s.e1; }
            else { pts.push_back(s.p0); head = s.e0; }
            if (head == start) { pts.push_back(pts.front()); is_closed = true; break; }
        }
        out.loops.push_back(std::move(pts));
        out.closed.push_back(is_closed);
    }
    return out;
}

// Even-odd point-in-polygon test for contour containment checks.
inline bool point_in_loop(const std::vector<std::array<double, 2>>& loop,
                          double u, double v) {
    bool inside = false;
    for (size_t i = 0, j = loop.size() - 1; i < loop.size(); j = i++) {
        const auto& pi = loop[i];
        const auto& pj = loop[j];
        if (((pi[1] > v) != (pj[1] > v)) &&
            (u < (pj[0] - pi[0]) * (v - pi[1]) / (pj[1] - pi[1]) + pi[0]))
            inside = !inside;
    }
    return inside;
}

} // namespace nftrap
