#include <doctest.h>

#include <chrono>
#include <cmath>
#include <limits>

#include "etobs/error.hpp"
#include "etobs/matrix.hpp"
#include "support.hpp"

using namespace etobs;
using namespace etobs::testing;

TEST_CASE("matrix construction rejects bad shapes and non-finite entries") {
    CHECK_THROWS_AS(Matrix(2, 2, std::vector<double>{1.0, 2.0, 3.0}), Error);
    CHECK_THROWS_AS(Matrix(1, 1, std::vector<double>{std::numeric_limits<double>::quiet_NaN()}), Error);
    CHECK_THROWS_AS(Matrix(1, 1, std::numeric_limits<double>::infinity()), Error);
    CHECK_THROWS_AS((Matrix{{1.0, 2.0}, {3.0}}), Error);

    const Matrix a{{1.0, 2.0}, {3.0, 4.0}};
    CHECK_THROWS_AS(a * Matrix(3, 1), Error);
    CHECK_THROWS_AS(a + Matrix(2, 3), Error);
    CHECK(a.transpose()(0, 1) == 3.0);
    CHECK((a * Matrix::identity(2)).entries()[3] == 4.0);
}

TEST_CASE("symmetric storage is symmetric by construction") {
    const SymMatrix s = SymMatrix::from_matrix(Matrix{{1.0, 2.0}, {4.0, 5.0}});
    CHECK(s(0, 1) == s(1, 0));
    CHECK(s(0, 1) == doctest::Approx(3.0));
    CHECK(s.quadratic_form(Vector{1.0, 1.0}) == doctest::Approx(1.0 + 5.0 + 6.0));
}

TEST_CASE("solve_lyapunov examples") {
    SUBCASE("negative identity") {
        const SymMatrix p = solve_lyapunov(Matrix{{-1.0, 0.0}, {0.0, -1.0}}, SymMatrix::identity(2));
        CHECK(p(0, 0) == doctest::Approx(0.5));
        CHECK(p(1, 1) == doctest::Approx(0.5));
        CHECK(std::abs(p(0, 1)) < 1e-15);
    }
    SUBCASE("scalar") {
        const SymMatrix p = solve_lyapunov(Matrix{{-1.0}}, SymMatrix::diagonal(Vector{2.0}));
        CHECK(p(0, 0) == doctest::Approx(1.0));
    }
    SUBCASE("battery closed loop matches the published P within 5%") {
        const LtiPlant plant = battery_plant();
        const Matrix acl = plant.A - battery::reference_gain() * plant.C;
        const SymMatrix p = solve_lyapunov(acl, battery::reference_q());
        for (std::size_t i = 0; i < 2; ++i) {
            for (std::size_t j = 0; j < 2; ++j) {
                CHECK(p(i, j) == doctest::Approx(kPublishedP(i, j)).epsilon(0.05));
            }
        }
        CHECK(lyapunov_residual(acl, p, battery::reference_q()) <= 1e-9 * battery::reference_q().to_matrix().frobenius());
    }
}

TEST_CASE("solve_lyapunov errors") {
    CHECK_THROWS_AS(solve_lyapunov(Matrix{{0.0, 1.0}, {0.0, 0.0}}, SymMatrix::identity(2)), Error);
    try {
        (void)solve_lyapunov(Matrix{{1.0}}, SymMatrix::identity(1));
        FAIL("expected NotHurwitz");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NotHurwitz);
    }
    // eigenvalues +1 and -1 pair to zero in the unfolded operator
    try {
        (void)solve_lyapunov_unfolded(Matrix{{1.0, 0.0}, {0.0, -1.0}}, SymMatrix::identity(2));
        FAIL("expected Singular");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Singular);
    }
    CHECK_THROWS_AS(solve_lyapunov(Matrix{{-1.0, 0.0}}, SymMatrix::identity(1)), Error);
}

TEST_CASE("is_hurwitz examples") {
    CHECK(is_hurwitz(-1.0 * Matrix::identity(3)));
    CHECK_FALSE(is_hurwitz(Matrix{{0.0, 1.0}, {0.0, 0.0}}));
    CHECK_FALSE(is_hurwitz(Matrix{{-1e-13}}));
    CHECK(is_hurwitz(Matrix{{-1e-13}}, 1e-14));

    const LtiPlant plant = battery_plant();
    const Matrix acl = plant.A - battery::reference_gain() * plant.C;
    CHECK(acl(0, 0) == doctest::Approx(0.497).epsilon(1e-2));
    CHECK(acl(0, 1) == doctest::Approx(-0.384));
    CHECK(acl(1, 0) == doctest::Approx(2.33));
    CHECK(acl(1, 1) == doctest::Approx(-1.398));
    // 2x2 oracle: stable iff trace < 0 and det > 0
    const double tr = acl(0, 0) + acl(1, 1);
    const double det = acl(0, 0) * acl(1, 1) - acl(0, 1) * acl(1, 0);
    CHECK(tr == doctest::Approx(-0.901).epsilon(1e-2));
    CHECK(det == doctest::Approx(0.200).epsilon(1e-2));
    CHECK(is_hurwitz(acl) == (tr < 0.0 && det > 0.0));
}

TEST_CASE("eig_sym_extremes examples") {
    const EigenExtremes q = eig_sym_extremes(SymMatrix::diagonal(Vector{100.0, 1000.0}));
    CHECK(q.min == doctest::Approx(100.0));
    CHECK(q.max == doctest::Approx(1000.0));

    const EigenExtremes id = eig_sym_extremes(SymMatrix::identity(4));
    CHECK(id.min == doctest::Approx(1.0));
    CHECK(id.max == doctest::Approx(1.0));

    const auto [lo, hi] = sym2_eigs(kPublishedP(0, 0), kPublishedP(0, 1), kPublishedP(1, 1));
    const EigenExtremes p = eig_sym_extremes(SymMatrix::from_matrix(kPublishedP));
    CHECK(p.min == doctest::Approx(lo).epsilon(1e-10));
    CHECK(p.max == doctest::Approx(hi).epsilon(1e-10));
    CHECK(p.min == doctest::Approx(532.0).epsilon(0.01));
    CHECK(p.max == doctest::Approx(16458.0).epsilon(0.01));
}

TEST_CASE("norm2 examples") {
    CHECK(norm2(Matrix::identity(2)) == doctest::Approx(1.0));
    CHECK(norm2(Matrix{{3.0, 0.0}, {0.0, 4.0}}) == doctest::Approx(4.0));

    const Vector pl = kPublishedP * Vector{0.64, 2.33};
    CHECK(pl[0] == doctest::Approx(2149.3).epsilon(1e-4));
    CHECK(pl[1] == doctest::Approx(836.1).epsilon(1e-3));
    const double direct = std::hypot(pl[0], pl[1]);
    CHECK(norm2(kPublishedP * battery::reference_gain()) == doctest::Approx(direct).epsilon(1e-12));
    CHECK(direct == doctest::Approx(2306.0).epsilon(0.01));
    CHECK(norm2(Matrix{{1.0, 2.0, 2.0}}) == doctest::Approx(3.0));
}

TEST_CASE("nonsymmetric eigenvalues agree with trace, determinant and Routh-Hurwitz") {
    std::mt19937_64 rng(7);
    for (int k = 0; k < 100; ++k) {
        const Matrix m = random_matrix(rng, 3, 3);
        const auto ev = eigenvalues(m);
        REQUIRE(ev.size() == 3);
        std::complex<double> sum = 0.0;
        std::complex<double> prod = 1.0;
        for (const auto& l : ev) {
            sum += l;
            prod *= l;
        }
        const double det = m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) -
                           m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0)) +
                           m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
        CHECK(sum.real() == doctest::Approx(m(0, 0) + m(1, 1) + m(2, 2)).epsilon(1e-9).scale(1.0));
        CHECK(std::abs(sum.imag()) < 1e-9);
        CHECK(prod.real() == doctest::Approx(det).epsilon(1e-9).scale(1.0));
        CHECK(is_hurwitz(m) == routh_hurwitz3(m));
    }
    // complex pair
    const auto rot = eigenvalues(Matrix{{0.0, -2.0}, {2.0, 0.0}});
    CHECK(std::abs(std::abs(rot[0].imag()) - 2.0) < 1e-12);
    CHECK(std::abs(rot[0].real()) < 1e-12);
}

TEST_CASE("property: Lyapunov solves on random stable systems") {
    std::mt19937_64 rng(20240611);
    const auto start = std::chrono::steady_clock::now();
    int spd = 0;
    for (int k = 0; k < 100; ++k) {
        const std::size_t n = 1 + static_cast<std::size_t>(k % 6);
        const Matrix acl = random_stable(rng, n);
        const SymMatrix q = random_spd(rng, n);
        const SymMatrix p = solve_lyapunov(acl, q);
        CHECK(lyapunov_residual(acl, p, q) <= 1e-9 * q.to_matrix().frobenius());
        if (eig_sym_extremes(p).min > 0.0) ++spd;
    }
    CHECK(spd == 100);
    CHECK(std::chrono::steady_clock::now() - start < std::chrono::seconds(5));
}

TEST_CASE("property: Hurwitz iff the Lyapunov solution is positive definite") {
    std::mt19937_64 rng(99);
    int stable = 0;
    for (int k = 0; k < 100; ++k) {
        const std::size_t n = 2 + static_cast<std::size_t>(k % 3);
        Matrix a = random_matrix(rng, n, n);
        // shift to mix stable and unstable draws
        const double shift = (static_cast<double>(k % 5) - 1.0) * 0.6;
        for (std::size_t i = 0; i < n; ++i) a(i, i) -= shift;
        const bool hurwitz = is_hurwitz(a);
        bool lyap_spd = false;
        try {
            lyap_spd = eig_sym_extremes(solve_lyapunov_unfolded(a, SymMatrix::identity(n))).min > 0.0;
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::Singular);
        }
        CHECK(hurwitz == lyap_spd);
        stable += hurwitz ? 1 : 0;
    }
    CHECK(stable > 10);
    CHECK(stable < 90);
}

TEST_CASE("property: extremes bound the Rayleigh quotient") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t n = 2 + static_cast<std::size_t>(trial % 5);
        const SymMatrix s = SymMatrix::from_matrix(random_matrix(rng, n, n));
        const EigenExtremes ex = eig_sym_extremes(s);
        for (int k = 0; k < 100; ++k) {
            const double r = s.quadratic_form(random_unit(rng, n));
            CHECK(r >= ex.min - 1e-12 * std::abs(ex.min) - 1e-14);
            CHECK(r <= ex.max + 1e-12 * std::abs(ex.max) + 1e-14);
        }
    }
}

TEST_CASE("property: norm2 matches the maximal stretch of a power-iteration probe") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t r = 1 + static_cast<std::size_t>(trial % 4);
        const std::size_t c = 1 + static_cast<std::size_t>((trial / 4) % 4);
        const Matrix m = random_matrix(rng, r, c);
        const double n2 = norm2(m);
        double best = 0.0;
        for (int k = 0; k < 100; ++k) best = std::max(best, norm(m * random_unit(rng, c)));
        CHECK(best <= n2 * (1.0 + 1e-12));
        // refine the best random direction by power iteration on M^T M
        Vector v = random_unit(rng, c);
        const Matrix mtm = m.transpose() * m;
        for (int it = 0; it < 2000; ++it) {
            v = mtm * v;
            const double len = norm(v);
            if (len == 0.0) break;
            for (double& x : v) x /= len;
        }
        CHECK(norm(m * v) == doctest::Approx(n2).epsilon(1e-6));
    }
}
