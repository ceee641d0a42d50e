#pragma once

// Dense Levenberg-Marquardt for the handful of small nonlinear fits in this
// toolkit (<= 6 parameters). The model callback fills residuals and the
// analytic Jacobian; the normal equations are solved by Cholesky with the
// usual multiplicative damping schedule.

#include <cmath>
#include <functional>
#include <vector>

#include "nftrap/errors.hpp"

namespace nftrap {

struct LevMarResult {
    std::vector<double> params;
    std::vector<double> sigma;        // 1-sigma parameter errors
    std::vector<double> covariance;   // row-major n x n
    double chi2 = 0.0;
    int iterations = 0;
    bool converged = false;
};

namespace detail {

// Cholesky solve of (A + lambda diag(A)) x = b; returns false if not SPD.
inline bool solve_damped(std::vector<double> a, std::vector<double> b,
                         double lambda, int n, std::vector<double>& x) {
    for (int i = 0; i < n; ++i) a[i * n + i] *= (1.0 + lambda);
    // in-place Cholesky
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            double s = a[i * n + j];
            for (int k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
            if (i == j) {
                if (s <= 0.0) return false;
                a[i * n + i] = std::sqrt(s);
            } else {
                a[i * n + j] = s / a[j * n + j];
            }
        }
    }
    for (int i = 0; i < n; ++i) {
        double s = b[i];
        for (int k = 0; k < i; ++k) s -= a[i * n + k] * b[k];
        b[i] = s / a[i * n + i];
    }
    for (int i = n - 1; i >= 0; --i) {
        double s = b[i];
        for (int k = i + 1; k < n; ++k) s -= a[k * n + i] * b[k];
        b[i] = s / a[i * n + i];
    }
    x = b;
    return true;
}

inline bool invert_spd(std::vector<double> a, int n, std::vector<double>& inv) {
    inv.assign(n * n, 0.0);
    for (int c = 0; c < n; ++c) {
        std::vector<double> e(n, 0.0), x;
        e[c] = 1.0;
        if (!solve_damped(a, e, 0.0, n, x)) return false;
        for (int r = 0; r < n; ++r) inv[r * n + c] = x[r];
    }
    return true;
}

} // namespace detail

// model(params, residuals, jacobian): residuals has m entries, jacobian is
// row-major m x n with d r_i / d p_j. Residuals are (model - data) / sigma.
inline LevMarResult levmar_fit(
    std::function<void(const std::vector<double>&, std::vector<double>&,
                       std::vector<double>&)> model,
    std::vector<double> p0, int m, int max_iter = 200, double ftol = 1e-12) {
    const int n = int(p0.size());
    std::vector<double> r(m), jac(m * n);
    auto chi2_of = [&](const std::vector<double>& p) {
        std::vector<double> rr(m), jj(m * n);
        model(p, rr, jj);
        double c = 0.0;
        for (double v : rr) c += v * v;
        return c;
    };

    LevMarResult out;
    out.params = p0;
    model(out.params, r, jac);
    double chi2 = 0.0;
    for (double v : r) chi2 += v * v;
    double lambda = 1e-3;

    bool converged = false;
    int it = 0;
    for (; it < max_iter && !converged; ++it) {
        // normal equations
        std::vector<double> jtj(n * n, 0.0), jtr(n, 0.0);
        for (int i = 0; i < m; ++i)
            for (int a = 0; a < n; ++a) {
                jtr[a] += jac[i * n + a] * r[i];
                for (int b = 0; b <= a; ++b)
                    jtj[a * n + b] += jac[i * n + a] * jac[i * n + b];
            }
        for (int a = 0; a < n; ++a)
            for (int b = a + 1; b < n; ++b) jtj[a * n + b] = jtj[b * n + a];
        for (double& v : jtr) v = -v;

        bool improved = false;
        for (int tries = 0; tries < 30; ++tries) {
            std::vector<double> step;
            if (detail::solve_damped(jtj, jtr, lambda, n, step)) {
                std::vector<double> trial = out.params;
                for (int a = 0; a < n; ++a) trial[a] += step[a];
                const double c_new = chi2_of(trial);
                if (std::isfinite(c_new) && c_new <= chi2) {
                    const double drop = chi2 - c_new;
                    out.params = trial;
                    chi2 = c_new;
                    lambda = std::max(lambda * 0.3, 1e-12);
                    model(out.params, r, jac);
                    improved = true;
                    if (drop < ftol * (1.0 + chi2)) converged = true;
                    break;
                }
            }
            lambda *= 10.0;
            if (lambda > 1e12) break;
        }
        // No acceptable step at any damping: stationary point (or stuck).
        if (!improved) { converged = true; break; }
    }

    out.chi2 = chi2;
    out.iterations = it;
    out.converged = converged;
    if (!converged)
        throw FitNonconvergence("levmar_fit: no convergence within iteration budget");

    // covariance = chi2/dof * (J^T J)^{-1}
    std::vector<double> jtj(n * n, 0.0);
    for (int i = 0; i < m; ++i)
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b)
                jtj[a * n + b] += jac[i * n + a] * jac[i * n + b];
    std::vector<double> inv;
    out.sigma.assign(n, 0.0);
    if (detail::invert_spd(jtj, n, inv)) {
        const double s2 = (m > n) ? chi2 / (m - n) : 1.0;
        out.covariance.resize(n * n);
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) out.covariance[a * n + b] = inv[a * n + b] * s2;
        for (int a = 0; a < n; ++a)
            out.sigma[a] = std::sqrt(std::max(out.covariance[a * n + a], 0.0));
    }
    return out;
}

} // namespace nftrap
