#pragma once

// Minimal Jones calculus: 2x2 complex matrices acting on transverse
// polarization states, linear retarders at arbitrary orientation, rotators,
// and Haar-random SU(2) elements for birefringence models.

#include <array>
#include <cmath>
#include <complex>

#include "nftrap/constants.hpp"
#include "nftrap/rng.hpp"

namespace nftrap {

using Complex = std::complex<double>;

struct Jones2 {
    // row-major: [a b; c d]
    Complex a{1, 0}, b{0, 0}, c{0, 0}, d{1, 0};

    Jones2 operator*(const Jones2& o) const {
        return {a * o.a + b * o.c, a * o.b + b * o.d,
                c * o.a + d * o.c, c * o.b + d * o.d};
    }
    std::array<Complex, 2> apply(const std::array<Complex, 2>& v) const {
        return {a * v[0] + b * v[1], c * v[0] + d * v[1]};
    }
    Jones2 adjoint() const {
        return {std::conj(a), std::conj(c), std::conj(b), std::conj(d)};
    }
    // max |(U U^+ - I)_{ij}|, unitarity defect
    double unitarity_defect() const {
        const Jones2 p = *this * adjoint();
        return std::max({std::abs(p.a - Complex(1, 0)), std::abs(p.b),
                         std::abs(p.c), std::abs(p.d - Complex(1, 0))});
    }
};

inline Jones2 rotator(double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    return {Complex(c, 0), Complex(-s, 0), Complex(s, 0), Complex(c, 0)};
}

// Linear retarder: fast axis at `orientation`, phase retardance `delta`.
inline Jones2 retarder(double delta, double orientation) {
    const Complex em = std::exp(Complex(0, -0.5 * delta));
    const Complex ep = std::exp(Complex(0, +0.5 * delta));
    const Jones2 diag{em, Complex(0, 0), Complex(0, 0), ep};
    return rotator(orientation) * diag * rotator(-orientation);
}

// Haar-uniform SU(2) via a uniform point on S^3.
inline Jones2 random_unitary(Rng& rng) {
    double q[4];
    double norm = 0.0;
    do {
        norm = 0.0;
        for (double& v : q) { v = rng.normal(); norm += v * v; }
    } while (norm < 1e-12);
    norm = std::sqrt(norm);
    for (double& v : q) v /= norm;
    // q = (w, x, y, z) -> U = w I + i(x sx + y sy + z sz)
    return {Complex(q[0], q[3]), Complex(q[2], q[1]),
            Complex(-q[2], q[1]), Complex(q[0], -q[3])};
}

// Two adjustable retarders in series; spans SU(2) up to a global phase.
struct CompensatorSettings {
    double delta1 = 0.0, theta1 = 0.0;
    double delta2 = 0.0, theta2 = 0.0;

    Jones2 jones() const { return retarder(delta1, theta1) * retarder(delta2, theta2); }

    // Fixed-path-delay dispersion: retardances scale by lambda_set/lambda,
    // orientations are geometric and stay put.
    CompensatorSettings at_wavelength(double lambda, double lambda_set) const {
        const double f = lambda_set / lambda;
        return {delta1 * f, theta1, delta2 * f, theta2};
    }
};

} // namespace nftrap
