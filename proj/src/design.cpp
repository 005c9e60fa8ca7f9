#include "etobs/design.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "etobs/error.hpp"

namespace etobs {

namespace {

struct StarredBounds {
    double sigma_star;
    double c2_star;
    double c1_star;
};

StarredBounds starred_bounds(const TriggerRequest& req) {
    StarredBounds b{};
    b.sigma_star = req.sigma_star.value_or(req.sigma > 0.0 ? req.sigma : kSigmaStarFloor);
    b.c2_star = req.c2_star.value_or(req.c2);
    b.c1_star = req.c1_star.value_or(req.c1);
    return b;
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

}  // namespace

LtiPlant LtiPlant::make(Matrix a, Matrix b, Matrix c, std::optional<Matrix> d, std::optional<Vector> offset) {
    LtiPlant p;
    if (!a.square() || a.rows() == 0) throw Error(ErrorCode::DimensionMismatch, "A must be square and non-empty");
    const std::size_t n = a.rows();
    if (b.rows() != n || b.cols() == 0) throw Error(ErrorCode::DimensionMismatch, "B must have as many rows as A");
    if (c.cols() != n || c.rows() == 0) throw Error(ErrorCode::DimensionMismatch, "C must have as many columns as A");
    const std::size_t m = b.cols();
    const std::size_t out = c.rows();
    p.D = d ? std::move(*d) : Matrix(out, m);
    if (p.D.rows() != out || p.D.cols() != m) throw Error(ErrorCode::DimensionMismatch, "D must be p x m");
    p.offset = offset ? std::move(*offset) : Vector(out, 0.0);
    if (p.offset.size() != out) throw Error(ErrorCode::DimensionMismatch, "offset must have length p");
    if (!std::all_of(p.offset.begin(), p.offset.end(), [](double v) { return std::isfinite(v); })) {
        throw Error(ErrorCode::InvalidArgument, "offset must be finite");
    }
    p.A = std::move(a);
    p.B = std::move(b);
    p.C = std::move(c);
    return p;
}

IssCertificate iss_constants(const LtiPlant& plant, const Matrix& gain, const SymMatrix& q, double c) {
    if (!(c > 0.0 && c < 1.0)) throw Error(ErrorCode::InvalidArgument, "split parameter c must lie in (0, 1)");
    if (gain.rows() != plant.states() || gain.cols() != plant.outputs()) {
        throw Error(ErrorCode::DimensionMismatch, "observer gain L must be n x p");
    }
    if (q.dim() != plant.states()) throw Error(ErrorCode::DimensionMismatch, "Q must be n x n");
    const EigenExtremes q_ext = eig_sym_extremes(q);
    if (!(q_ext.min > 0.0)) throw Error(ErrorCode::InvalidArgument, "Q must be positive definite");

    const Matrix acl = plant.A - gain * plant.C;
    IssCertificate cert;
    cert.L = gain;
    cert.Q = q;
    cert.c = c;
    cert.P = solve_lyapunov(acl, q);
    const EigenExtremes p_ext = eig_sym_extremes(cert.P);
    const double pl = norm2(cert.P.to_matrix() * gain);
    cert.alpha = q_ext.min / p_ext.max * (1.0 - c);
    cert.gamma = pl * pl / (c * q_ext.min);
    if (!(cert.gamma > 0.0)) throw Error(ErrorCode::InvalidArgument, "gamma vanished: P L is zero");
    return cert;
}

TriggerParams select_parameters(const IssCertificate& cert, const TriggerRequest& req) {
    const double gamma = cert.gamma;
    if (!(req.alpha_bar > 0.0 && req.alpha_bar <= cert.alpha)) {
        throw Error(ErrorCode::InvalidArgument,
                    "alpha_bar must lie in (0, alpha] = (0, " + fmt(cert.alpha) + "], got " + fmt(req.alpha_bar));
    }
    if (!(req.nu > 0.0)) throw Error(ErrorCode::InvalidArgument, "nu must be strictly positive");

    const StarredBounds b = starred_bounds(req);

    // item (i)
    if (!(b.sigma_star > 0.0)) throw Error(ErrorCode::Item1Violated, "item (i): sigma* > 0 required");
    if (!(b.c2_star >= 0.0)) throw Error(ErrorCode::Item1Violated, "item (i): c2* >= 0 required");
    if (!(req.sigma >= 0.0 && req.sigma <= b.sigma_star)) {
        throw Error(ErrorCode::Item1Violated, "item (i): sigma in [0, sigma*] required, got sigma = " + fmt(req.sigma));
    }
    if (!(req.c2 >= 0.0 && req.c2 <= b.c2_star)) {
        throw Error(ErrorCode::Item1Violated, "item (i): c2 in [0, c2*] required, got c2 = " + fmt(req.c2));
    }
    const double coupling = b.sigma_star * b.c2_star / gamma;
    if (!(coupling < 1.0)) {
        throw Error(ErrorCode::Item1Violated, "item (i): sigma* c2* < gamma violated: " + fmt(b.sigma_star * b.c2_star) +
                                                  " >= " + fmt(gamma));
    }

    // item (ii)
    const double c1_min = req.alpha_bar / (1.0 - coupling);
    if (!(b.c1_star > c1_min)) {
        throw Error(ErrorCode::Item2Violated,
                    "item (ii): c1* > alpha_bar (1 - sigma* c2*/gamma)^-1 violated: " + fmt(b.c1_star) + " <= " + fmt(c1_min));
    }
    if (!(req.c1 >= b.c1_star)) {
        throw Error(ErrorCode::Item2Violated, "item (ii): c1 >= c1* violated: " + fmt(req.c1) + " < " + fmt(b.c1_star));
    }

    // item (iii)
    if (!(req.c3 >= 0.0 && req.c3 <= 1.0)) {
        throw Error(ErrorCode::Item3Violated, "item (iii): c3 in [0, 1] required, got " + fmt(req.c3));
    }

    // item (iv)
    const double denom = 1.0 - coupling - req.alpha_bar / b.c1_star;
    if (!(denom > 0.0)) throw Error(ErrorCode::Item4Violated, "item (iv): d = sigma* (1 - sigma* c2*/gamma - alpha_bar/c1*)^-1 is not positive");
    TriggerParams out;
    out.c1 = req.c1;
    out.c2 = req.c2;
    out.c3 = req.c3;
    out.sigma = req.sigma;
    out.alpha_bar = req.alpha_bar;
    out.nu = req.nu;
    out.sigma_star = b.sigma_star;
    out.c2_star = b.c2_star;
    out.c1_star = b.c1_star;
    out.d = b.sigma_star / denom;
    out.epsilon_star = req.nu * req.alpha_bar * gamma / (gamma + b.c2_star * out.d);
    if (req.epsilon) {
        if (!(*req.epsilon > 0.0)) throw Error(ErrorCode::Item4Violated, "item (iv): epsilon must be strictly positive");
        out.epsilon_clamped = *req.epsilon > out.epsilon_star;
        out.epsilon = std::min(*req.epsilon, out.epsilon_star);
    } else {
        out.epsilon = out.epsilon_star;
    }
    return out;
}

double minimal_nu(const IssCertificate& cert, const TriggerRequest& req, double epsilon) {
    if (!(epsilon > 0.0)) throw Error(ErrorCode::NonPositiveArgument, "epsilon must be strictly positive");
    // d does not depend on nu; any positive nu runs the item checks.
    TriggerRequest probe = req;
    probe.nu = 1.0;
    probe.epsilon.reset();
    const TriggerParams p = select_parameters(cert, probe);
    return epsilon * (cert.gamma + p.c2_star * p.d) / (req.alpha_bar * cert.gamma);
}

double dwell_time_bound(double m_bound, double epsilon, double gamma) {
    if (!(m_bound > 0.0) || !(epsilon > 0.0) || !(gamma > 0.0)) {
        throw Error(ErrorCode::NonPositiveArgument, "dwell time needs M, epsilon, gamma > 0");
    }
    return std::sqrt(epsilon / gamma) / (2.0 * m_bound);
}

Vector normalize_feedthrough(const LtiPlant& plant, std::span<const double> y, std::span<const double> u) {
    if (y.size() != plant.outputs() || u.size() != plant.inputs()) {
        throw Error(ErrorCode::DimensionMismatch, "normalize_feedthrough: y must have length p and u length m");
    }
    const Vector du = plant.D * u;
    Vector z(y.begin(), y.end());
    for (std::size_t i = 0; i < z.size(); ++i) z[i] -= du[i] + plant.offset[i];
    return z;
}

Vector plant_output(const LtiPlant& plant, std::span<const double> x, std::span<const double> u) {
    if (x.size() != plant.states() || u.size() != plant.inputs()) {
        throw Error(ErrorCode::DimensionMismatch, "plant_output: x must have length n and u length m");
    }
    Vector y = plant.C * x;
    const Vector du = plant.D * u;
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += du[i] + plant.offset[i];
    return y;
}

}  // namespace etobs
