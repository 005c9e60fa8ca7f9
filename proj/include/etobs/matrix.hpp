#pragma once

// Small dense linear algebra for the observer design: a row-major Matrix, a
// triangular-storage SymMatrix, and the handful of kernels the design and
// analysis code needs (symmetric eigen extremes, 2-norm, Hurwitz test,
// continuous Lyapunov solve). Sizes are tiny (n <= 10), so everything is
// dense and dependency free.

#include <complex>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <utility>
#include <vector>

namespace etobs {

using Vector = std::vector<double>;

class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    /// Takes ownership of row-major `entries`; throws on size mismatch or
    /// non-finite values.
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries);
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    [[nodiscard]] static Matrix identity(std::size_t n);
    [[nodiscard]] static Matrix diagonal(std::span<const double> d);
    [[nodiscard]] static Matrix column(std::span<const double> v);
    [[nodiscard]] static Matrix row(std::span<const double> v);

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
    [[nodiscard]] bool square() const noexcept { return rows_ == cols_; }
    [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

    [[nodiscard]] std::span<const double> entries() const noexcept { return data_; }
    [[nodiscard]] Matrix transpose() const;
    [[nodiscard]] bool all_finite() const noexcept;
    /// Largest absolute entry.
    [[nodiscard]] double max_abs() const noexcept;
    /// Frobenius norm.
    [[nodiscard]] double frobenius() const noexcept;

    Matrix& operator+=(const Matrix& rhs);
    Matrix& operator-=(const Matrix& rhs);
    Matrix& operator*=(double s) noexcept;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

[[nodiscard]] Matrix operator+(Matrix lhs, const Matrix& rhs);
[[nodiscard]] Matrix operator-(Matrix lhs, const Matrix& rhs);
[[nodiscard]] Matrix operator*(const Matrix& lhs, const Matrix& rhs);
[[nodiscard]] Matrix operator*(double s, Matrix m);
[[nodiscard]] Vector operator*(const Matrix& m, std::span<const double> v);

/// Symmetric matrix stored as its packed upper triangle, so symmetry holds
/// exactly by construction.
class SymMatrix {
public:
    SymMatrix() = default;
    explicit SymMatrix(std::size_t dim, double fill = 0.0);
    /// Symmetrizes `m` as (m + m^T) / 2. Throws if `m` is not square.
    [[nodiscard]] static SymMatrix from_matrix(const Matrix& m);
    [[nodiscard]] static SymMatrix identity(std::size_t n);
    [[nodiscard]] static SymMatrix diagonal(std::span<const double> d);

    [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return packed_[index(i, j)]; }
    void set(std::size_t i, std::size_t j, double value) noexcept { packed_[index(i, j)] = value; }

    [[nodiscard]] Matrix to_matrix() const;
    /// v^T S v
    [[nodiscard]] double quadratic_form(std::span<const double> v) const noexcept;

    friend bool operator==(const SymMatrix&, const SymMatrix&) = default;

private:
    [[nodiscard]] std::size_t index(std::size_t i, std::size_t j) const noexcept {
        if (i > j) std::swap(i, j);
        return i * dim_ - i * (i + 1) / 2 + j;
    }

    std::size_t dim_ = 0;
    std::vector<double> packed_;
};

[[nodiscard]] SymMatrix operator*(double s, const SymMatrix& m);

struct EigenExtremes {
    double min = 0.0;
    double max = 0.0;
};

/// Real-part tolerance of the Hurwitz test.
inline constexpr double kHurwitzTol = 1e-12;

/// All eigenvalues of a real square matrix (Hessenberg reduction followed by
/// Francis double-shift QR). Order is unspecified.
[[nodiscard]] std::vector<std::complex<double>> eigenvalues(const Matrix& a);

/// All eigenvalues of a symmetric matrix via cyclic Jacobi rotations, ascending.
[[nodiscard]] Vector eigenvalues_sym(const SymMatrix& s);

[[nodiscard]] EigenExtremes eig_sym_extremes(const SymMatrix& s);

/// Largest singular value, sqrt(lambda_max(M^T M)).
[[nodiscard]] double norm2(const Matrix& m);

/// True iff every eigenvalue has real part < -tol.
[[nodiscard]] bool is_hurwitz(const Matrix& a, double tol = kHurwitzTol);

/// Solves Acl^T P + P Acl = -Q. Checks Acl is Hurwitz first (NotHurwitz),
/// then calls solve_lyapunov_unfolded.
[[nodiscard]] SymMatrix solve_lyapunov(const Matrix& acl, const SymMatrix& q);

/// The raw unfolded solve without the Hurwitz precheck: builds the
/// n^2 x n^2 system (I kron Acl^T + Acl^T kron I) vec(P) = -vec(Q), solves it
/// by LU with partial pivoting plus one refinement step. Throws Singular.
[[nodiscard]] SymMatrix solve_lyapunov_unfolded(const Matrix& acl, const SymMatrix& q);

/// Frobenius norm of Acl^T P + P Acl + Q.
[[nodiscard]] double lyapunov_residual(const Matrix& acl, const SymMatrix& p, const SymMatrix& q);

/// Dense solve of a x = b by LU with partial pivoting. Throws Singular.
[[nodiscard]] Vector lu_solve(Matrix a, Vector b);

[[nodiscard]] double dot(std::span<const double> a, std::span<const double> b) noexcept;
[[nodiscard]] double norm(std::span<const double> v) noexcept;
[[nodiscard]] double squared_norm(std::span<const double> v) noexcept;

}  // namespace etobs
