#pragma once

// Shared fixtures and independent oracles for the test binaries.

#include <cmath>
#include <random>

#include "etobs/battery.hpp"
#include "etobs/design.hpp"
#include "etobs/hybrid.hpp"
#include "etobs/matrix.hpp"

namespace etobs::testing {

// Published values, rounded to three significant digits.
inline const Matrix kPublishedP{{1.57e4, -3.39e3}, {-3.39e3, 1.29e3}};
inline constexpr double kPublishedAlpha = 0.003;
inline constexpr double kPublishedGamma = 1.104e5;

inline Matrix random_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    Matrix m(r, c);
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) m(i, j) = n(rng);
    }
    return m;
}

inline Vector random_vector(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
    std::normal_distribution<double> d(0.0, scale);
    Vector v(n);
    for (double& x : v) x = d(rng);
    return v;
}

inline Vector random_unit(std::mt19937_64& rng, std::size_t n) {
    Vector v = random_vector(rng, n);
    const double len = norm(v);
    for (double& x : v) x /= len;
    return v;
}

// Every eigenvalue of M - (|M|_F + margin) I has real part <= -margin, since
// the spectral radius never exceeds the Frobenius norm.
inline Matrix random_stable(std::mt19937_64& rng, std::size_t n, double margin = 0.1) {
    Matrix m = random_matrix(rng, n, n);
    const double shift = m.frobenius() + margin;
    for (std::size_t i = 0; i < n; ++i) m(i, i) -= shift;
    return m;
}

inline SymMatrix random_spd(std::mt19937_64& rng, std::size_t n) {
    const Matrix g = random_matrix(rng, n, n);
    Matrix s = g.transpose() * g;
    for (std::size_t i = 0; i < n; ++i) s(i, i) += 0.5;
    return SymMatrix::from_matrix(s);
}

// Closed-form eigenvalues of a symmetric 2x2 from trace and determinant.
inline std::pair<double, double> sym2_eigs(double a, double b, double d) {
    const double tr = a + d;
    const double det = a * d - b * b;
    const double disc = std::sqrt(tr * tr / 4.0 - det);
    return {tr / 2.0 - disc, tr / 2.0 + disc};
}

// Characteristic polynomial s^3 + a1 s^2 + a2 s + a3 of a 3x3 matrix and the
// Routh-Hurwitz stability test a1 > 0, a3 > 0, a1 a2 > a3.
inline bool routh_hurwitz3(const Matrix& m) {
    const double a1 = -(m(0, 0) + m(1, 1) + m(2, 2));
    const double a2 = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0) + m(0, 0) * m(2, 2) - m(0, 2) * m(2, 0) +
                      m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1);
    const double det = m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) -
                       m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0)) +
                       m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
    const double a3 = -det;
    return a1 > 0.0 && a3 > 0.0 && a1 * a2 > a3;
}

inline LtiPlant battery_plant() { return battery::build_battery_plant({}); }

inline IssCertificate battery_cert() {
    return iss_constants(battery_plant(), battery::reference_gain(), battery::reference_q(), 0.5);
}

// sigma = 500, c1 = 1, c2 = 50, c3 = 1, epsilon = 1 with nu sized to admit it.
inline TriggerParams battery_params(const IssCertificate& cert, double epsilon = 1.0, double sigma = 500.0) {
    battery::SweepRow row;
    row.sigma = sigma;
    row.epsilon = epsilon;
    return battery::row_parameters(cert, row, std::nullopt);
}

// Scalar integrator x' = u, y = x with an observer gain of one.
inline LtiPlant ramp_plant() { return LtiPlant::make(Matrix{{0.0}}, Matrix{{1.0}}, Matrix{{1.0}}); }

inline IssCertificate ramp_cert() {
    return iss_constants(ramp_plant(), Matrix{{1.0}}, SymMatrix::identity(1), 0.5);
}

// sigma = 0 so that the threshold is the absolute rule gamma |e|^2 >= epsilon.
inline TriggerParams ramp_params(const IssCertificate& cert, double epsilon) {
    TriggerRequest req;
    req.alpha_bar = cert.alpha / 2.0;
    req.nu = 1.0;
    req.c1 = 1.0;
    req.c2 = 0.0;
    req.c3 = 1.0;
    req.sigma = 0.0;
    req.epsilon = epsilon;
    return select_parameters(cert, req);
}

struct BatteryRun {
    LtiPlant plant;
    IssCertificate cert;
    TriggerParams params;
    InputSignal input;
    SimConfig cfg;
    HybridArc arc;
};

// Reference scenario: x(0,0) = (1 V, 100 %), xi(0,0) = (0 V, 75 %),
// eta(0,0) = 1e6, synthetic profile seed 1, 1500 s. Built once per binary.
inline const BatteryRun& battery_reference_run() {
    static const BatteryRun run = [] {
        BatteryRun r;
        r.plant = battery_plant();
        r.cert = battery_cert();
        r.params = battery_params(r.cert);
        r.input = battery::phev_profile(1, 1500.0);
        r.cfg.t_end = 1500.0;
        r.cfg.eta0 = 1e6;
        r.arc = simulate(r.plant, r.cert, r.params, r.input, Vector{1.0, 1.0}, Vector{1.0, 0.25}, r.cfg);
        return r;
    }();
    return run;
}

}  // namespace etobs::testing
