#pragma once

#include <optional>
#include <span>

#include "etobs/matrix.hpp"

namespace etobs {

/// x' = A x + B u,  y = C x + D u + offset.
///
/// D and offset cover the feedthrough case; the estimation loop itself only
/// ever sees the normalized output z = C x (see normalize_feedthrough).
struct LtiPlant {
    Matrix A;
    Matrix B;
    Matrix C;
    Matrix D;       // p x m, zero by default
    Vector offset;  // length p, zero by default

    /// Checks dimensions and fills in the defaults for D and offset.
    [[nodiscard]] static LtiPlant make(Matrix a, Matrix b, Matrix c, std::optional<Matrix> d = std::nullopt,
                                       std::optional<Vector> offset = std::nullopt);

    [[nodiscard]] std::size_t states() const noexcept { return A.rows(); }
    [[nodiscard]] std::size_t inputs() const noexcept { return B.cols(); }
    [[nodiscard]] std::size_t outputs() const noexcept { return C.rows(); }
};

/// Observer gain L together with the quadratic ISS certificate of the
/// estimation error dynamics xi' = (A - LC) xi - L e:
///   <grad V(xi), (A-LC)xi - Le> <= -alpha V(xi) + gamma |e|^2,  V = xi^T P xi.
struct IssCertificate {
    Matrix L;
    SymMatrix P;
    SymMatrix Q;
    double c = 0.5;
    double alpha = 0.0;  // 1/s
    double gamma = 0.0;
};

/// Solves (A-LC)^T P + P(A-LC) = -Q and evaluates
///   alpha = lambda_min(Q) / lambda_max(P) * (1 - c),
///   gamma = ||P L||^2 / (c * lambda_min(Q)).
[[nodiscard]] IssCertificate iss_constants(const LtiPlant& plant, const Matrix& gain, const SymMatrix& q,
                                           double c = 0.5);

/// Inputs to the triggering-parameter selector. The starred bounds default to
/// the corresponding actual parameter (c1_star -> c1, c2_star -> c2,
/// sigma_star -> sigma, or kSigmaStarFloor when sigma is zero).
struct TriggerRequest {
    double alpha_bar = 0.0;  // guaranteed decay rate, in (0, alpha]
    double nu = 0.0;         // ultimate bound on V + d*eta
    double c1 = 1.0;
    double c2 = 0.0;
    double c3 = 1.0;
    double sigma = 0.0;
    std::optional<double> epsilon;
    std::optional<double> sigma_star;
    std::optional<double> c2_star;
    std::optional<double> c1_star;
};

/// sigma_star used when sigma == 0 and no explicit bound was supplied.
inline constexpr double kSigmaStarFloor = 1e-6;

/// Parameters of the dynamic triggering rule
///   eta' = -c1 eta + c2 |e|^2,   eta+ = c3 eta,
///   transmit when gamma |e|^2 >= sigma c1 eta + epsilon,
/// plus the constants that certify it.
struct TriggerParams {
    double c1 = 1.0;
    double c2 = 0.0;
    double c3 = 1.0;
    double sigma = 0.0;
    double epsilon = 1.0;
    double d = 0.0;
    double alpha_bar = 0.0;
    double nu = 0.0;
    double epsilon_star = 0.0;
    double sigma_star = 0.0;
    double c2_star = 0.0;
    double c1_star = 0.0;
    bool epsilon_clamped = false;  // requested epsilon exceeded epsilon_star
};

/// Validates the request against the certificate and derives
///   d    = sigma* (1 - sigma* c2*/gamma - alpha_bar/c1*)^-1,
///   eps* = nu alpha_bar gamma (gamma + c2* d)^-1.
/// Epsilon is min(requested, eps*), or eps* when none was requested.
/// Throws Item1Violated..Item4Violated naming the failed inequality.
[[nodiscard]] TriggerParams select_parameters(const IssCertificate& cert, const TriggerRequest& req);

/// Smallest nu for which `epsilon` is admissible (eps* == epsilon) under the
/// same starred bounds select_parameters would use for `req`.
[[nodiscard]] double minimal_nu(const IssCertificate& cert, const TriggerRequest& req, double epsilon);

/// Guaranteed minimum inter-event time (1/(2M)) sqrt(epsilon/gamma).
[[nodiscard]] double dwell_time_bound(double m_bound, double epsilon, double gamma);

/// z = y - D u - offset.
[[nodiscard]] Vector normalize_feedthrough(const LtiPlant& plant, std::span<const double> y, std::span<const double> u);

/// The raw output y = C x + D u + offset.
[[nodiscard]] Vector plant_output(const LtiPlant& plant, std::span<const double> x, std::span<const double> u);

}  // namespace etobs
