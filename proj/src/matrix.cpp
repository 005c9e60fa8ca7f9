#include "etobs/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "etobs/error.hpp"

namespace etobs {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        std::ostringstream msg;
        msg << op << ": " << a.rows() << "x" << a.cols() << " vs " << b.rows() << "x" << b.cols();
        throw Error(ErrorCode::DimensionMismatch, msg.str());
    }
}

void require_square(const Matrix& a, const char* who) {
    if (!a.square() || a.rows() == 0) {
        throw Error(ErrorCode::DimensionMismatch, std::string(who) + " needs a non-empty square matrix");
    }
}

double sign_of(double magnitude, double s) { return s >= 0.0 ? std::abs(magnitude) : -std::abs(magnitude); }

// In-place LU with partial pivoting. `perm[k]` is the row swapped into k.
struct LuFactor {
    Matrix lu;
    std::vector<std::size_t> perm;

    explicit LuFactor(Matrix a) : lu(std::move(a)), perm(lu.rows()) {
        const std::size_t n = lu.rows();
        const double scale = std::max(lu.max_abs(), std::numeric_limits<double>::min());
        for (std::size_t k = 0; k < n; ++k) {
            std::size_t piv = k;
            for (std::size_t i = k + 1; i < n; ++i) {
                if (std::abs(lu(i, k)) > std::abs(lu(piv, k))) piv = i;
            }
            perm[k] = piv;
            if (std::abs(lu(piv, k)) <= static_cast<double>(n) * kEps * scale) {
                throw Error(ErrorCode::Singular, "pivot " + std::to_string(k) + " vanished in LU factorization");
            }
            if (piv != k) {
                for (std::size_t j = 0; j < n; ++j) std::swap(lu(k, j), lu(piv, j));
            }
            const double inv = 1.0 / lu(k, k);
            for (std::size_t i = k + 1; i < n; ++i) {
                const double f = lu(i, k) * inv;
                lu(i, k) = f;
                if (f == 0.0) continue;
                for (std::size_t j = k + 1; j < n; ++j) lu(i, j) -= f * lu(k, j);
            }
        }
    }

    [[nodiscard]] Vector solve(Vector b) const {
        const std::size_t n = lu.rows();
        for (std::size_t k = 0; k < n; ++k) std::swap(b[k], b[perm[k]]);
        for (std::size_t i = 0; i < n; ++i) {
            double s = b[i];
            for (std::size_t j = 0; j < i; ++j) s -= lu(i, j) * b[j];
            b[i] = s;
        }
        for (std::size_t i = n; i-- > 0;) {
            double s = b[i];
            for (std::size_t j = i + 1; j < n; ++j) s -= lu(i, j) * b[j];
            b[i] = s / lu(i, i);
        }
        return b;
    }
};

// Reduction to upper Hessenberg form by stabilized elementary similarity
// transformations.
void to_hessenberg(Matrix& a) {
    const std::size_t n = a.rows();
    for (std::size_t m = 1; m + 1 < n; ++m) {
        double x = 0.0;
        std::size_t piv = m;
        for (std::size_t j = m; j < n; ++j) {
            if (std::abs(a(j, m - 1)) > std::abs(x)) {
                x = a(j, m - 1);
                piv = j;
            }
        }
        if (piv != m) {
            for (std::size_t j = m - 1; j < n; ++j) std::swap(a(piv, j), a(m, j));
            for (std::size_t j = 0; j < n; ++j) std::swap(a(j, piv), a(j, m));
        }
        if (x == 0.0) continue;
        for (std::size_t i = m + 1; i < n; ++i) {
            double y = a(i, m - 1);
            if (y == 0.0) continue;
            y /= x;
            a(i, m - 1) = y;
            for (std::size_t j = m; j < n; ++j) a(i, j) -= y * a(m, j);
            for (std::size_t j = 0; j < n; ++j) a(j, m) += y * a(j, i);
        }
    }
    for (std::size_t i = 2; i < n; ++i) {
        for (std::size_t j = 0; j + 1 < i; ++j) a(i, j) = 0.0;
    }
}

// Francis double-shift QR on an upper Hessenberg matrix (destroys `a`).
std::vector<std::complex<double>> hessenberg_qr(Matrix& a) {
    using std::abs;
    const int n = static_cast<int>(a.rows());
    std::vector<std::complex<double>> w(a.rows());
    double anorm = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = std::max(i - 1, 0); j < n; ++j) anorm += abs(a(i, j));
    }
    int nn = n - 1;
    double t = 0.0;
    double p = 0.0, q = 0.0, r = 0.0, s = 0.0, x = 0.0, y = 0.0, z = 0.0, ww = 0.0;
    while (nn >= 0) {
        int its = 0;
        int l = 0;
        do {
            for (l = nn; l > 0; --l) {
                s = abs(a(l - 1, l - 1)) + abs(a(l, l));
                if (s == 0.0) s = anorm;
                if (abs(a(l, l - 1)) <= kEps * s) {
                    a(l, l - 1) = 0.0;
                    break;
                }
            }
            x = a(nn, nn);
            if (l == nn) {
                w[nn--] = x + t;
            } else {
                y = a(nn - 1, nn - 1);
                ww = a(nn, nn - 1) * a(nn - 1, nn);
                if (l == nn - 1) {
                    p = 0.5 * (y - x);
                    q = p * p + ww;
                    z = std::sqrt(abs(q));
                    x += t;
                    if (q >= 0.0) {
                        z = p + sign_of(z, p);
                        w[nn - 1] = w[nn] = x + z;
                        if (z != 0.0) w[nn] = x - ww / z;
                    } else {
                        w[nn] = {x + p, -z};
                        w[nn - 1] = std::conj(w[nn]);
                    }
                    nn -= 2;
                } else {
                    if (its == 60) throw Error(ErrorCode::Singular, "QR eigenvalue iteration did not converge");
                    if (its == 10 || its == 20) {
                        // exceptional shift
                        t += x;
                        for (int i = 0; i <= nn; ++i) a(i, i) -= x;
                        s = abs(a(nn, nn - 1)) + abs(a(nn - 1, nn - 2));
                        y = x = 0.75 * s;
                        ww = -0.4375 * s * s;
                    }
                    ++its;
                    int m = nn - 2;
                    for (; m >= l; --m) {
                        z = a(m, m);
                        r = x - z;
                        s = y - z;
                        p = (r * s - ww) / a(m + 1, m) + a(m, m + 1);
                        q = a(m + 1, m + 1) - z - r - s;
                        r = a(m + 2, m + 1);
                        s = abs(p) + abs(q) + abs(r);
                        p /= s;
                        q /= s;
                        r /= s;
                        if (m == l) break;
                        const double u = abs(a(m, m - 1)) * (abs(q) + abs(r));
                        const double v = abs(p) * (abs(a(m - 1, m - 1)) + abs(z) + abs(a(m + 1, m + 1)));
                        if (u <= kEps * v) break;
                    }
                    for (int i = m; i < nn - 1; ++i) {
                        a(i + 2, i) = 0.0;
                        if (i != m) a(i + 2, i - 1) = 0.0;
                    }
                    for (int k = m; k < nn; ++k) {
                        if (k != m) {
                            p = a(k, k - 1);
                            q = a(k + 1, k - 1);
                            r = 0.0;
                            if (k + 1 != nn) r = a(k + 2, k - 1);
                            x = abs(p) + abs(q) + abs(r);
                            if (x != 0.0) {
                                p /= x;
                                q /= x;
                                r /= x;
                            }
                        }
                        s = sign_of(std::sqrt(p * p + q * q + r * r), p);
                        if (s == 0.0) continue;
                        if (k == m) {
                            if (l != m) a(k, k - 1) = -a(k, k - 1);
                        } else {
                            a(k, k - 1) = -s * x;
                        }
                        p += s;
                        x = p / s;
                        y = q / s;
                        z = r / s;
                        q /= p;
                        r /= p;
                        for (int j = k; j <= nn; ++j) {
                            p = a(k, j) + q * a(k + 1, j);
                            if (k + 1 != nn) {
                                p += r * a(k + 2, j);
                                a(k + 2, j) -= p * z;
                            }
                            a(k + 1, j) -= p * y;
                            a(k, j) -= p * x;
                        }
                        const int mmin = nn < k + 3 ? nn : k + 3;
                        for (int i = l; i <= mmin; ++i) {
                            p = x * a(i, k) + y * a(i, k + 1);
                            if (k + 1 != nn) {
                                p += z * a(i, k + 2);
                                a(i, k + 2) -= p * r;
                            }
                            a(i, k + 1) -= p * q;
                            a(i, k) -= p;
                        }
                    }
                }
            }
        } while (l + 1 < nn);
    }
    return w;
}

}  // namespace

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::NonPositiveArgument: return "NonPositiveArgument";
        case ErrorCode::NotHurwitz: return "NotHurwitz";
        case ErrorCode::Singular: return "Singular";
        case ErrorCode::Item1Violated: return "Item1Violated";
        case ErrorCode::Item2Violated: return "Item2Violated";
        case ErrorCode::Item3Violated: return "Item3Violated";
        case ErrorCode::Item4Violated: return "Item4Violated";
        case ErrorCode::MaxJumpsExceeded: return "MaxJumpsExceeded";
        case ErrorCode::NonFiniteState: return "NonFiniteState";
        case ErrorCode::NegativeAuxiliaryState: return "NegativeAuxiliaryState";
        case ErrorCode::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

// ---------------------------------------------------------------------------
// Matrix

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {
    if (!std::isfinite(fill)) throw Error(ErrorCode::InvalidArgument, "matrix entries must be finite");
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries)
    : rows_(rows), cols_(cols), data_(std::move(entries)) {
    if (data_.size() != rows_ * cols_) {
        throw Error(ErrorCode::DimensionMismatch, "matrix entry count does not equal rows*cols");
    }
    if (!all_finite()) throw Error(ErrorCode::InvalidArgument, "matrix entries must be finite");
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) throw Error(ErrorCode::DimensionMismatch, "ragged matrix literal");
        data_.insert(data_.end(), r.begin(), r.end());
    }
    if (!all_finite()) throw Error(ErrorCode::InvalidArgument, "matrix entries must be finite");
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::diagonal(std::span<const double> d) {
    Matrix m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
}

Matrix Matrix::column(std::span<const double> v) {
    return Matrix(v.size(), 1, std::vector<double>(v.begin(), v.end()));
}

Matrix Matrix::row(std::span<const double> v) {
    return Matrix(1, v.size(), std::vector<double>(v.begin(), v.end()));
}

Matrix Matrix::transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i) {
        for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    }
    return t;
}

bool Matrix::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double Matrix::max_abs() const noexcept {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
}

double Matrix::frobenius() const noexcept {
    double s = 0.0;
    for (double v : data_) s += v * v;
    return std::sqrt(s);
}

Matrix& Matrix::operator+=(const Matrix& rhs) {
    require_same_shape(*this, rhs, "operator+");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += rhs.data_[k];
    return *this;
}

Matrix& Matrix::operator-=(const Matrix& rhs) {
    require_same_shape(*this, rhs, "operator-");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= rhs.data_[k];
    return *this;
}

Matrix& Matrix::operator*=(double s) noexcept {
    for (double& v : data_) v *= s;
    return *this;
}

Matrix operator+(Matrix lhs, const Matrix& rhs) { return lhs += rhs; }
Matrix operator-(Matrix lhs, const Matrix& rhs) { return lhs -= rhs; }
Matrix operator*(double s, Matrix m) { return m *= s; }

Matrix operator*(const Matrix& lhs, const Matrix& rhs) {
    if (lhs.cols() != rhs.rows()) {
        throw Error(ErrorCode::DimensionMismatch, "matrix product inner dimensions differ");
    }
    Matrix out(lhs.rows(), rhs.cols());
    for (std::size_t i = 0; i < lhs.rows(); ++i) {
        for (std::size_t k = 0; k < lhs.cols(); ++k) {
            const double a = lhs(i, k);
            if (a == 0.0) continue;
            for (std::size_t j = 0; j < rhs.cols(); ++j) out(i, j) += a * rhs(k, j);
        }
    }
    return out;
}

Vector operator*(const Matrix& m, std::span<const double> v) {
    if (m.cols() != v.size()) throw Error(ErrorCode::DimensionMismatch, "matrix-vector product size mismatch");
    Vector out(m.rows(), 0.0);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < m.cols(); ++j) s += m(i, j) * v[j];
        out[i] = s;
    }
    return out;
}

// ---------------------------------------------------------------------------
// SymMatrix

SymMatrix::SymMatrix(std::size_t dim, double fill) : dim_(dim), packed_(dim * (dim + 1) / 2, fill) {
    if (!std::isfinite(fill)) throw Error(ErrorCode::InvalidArgument, "matrix entries must be finite");
}

SymMatrix SymMatrix::from_matrix(const Matrix& m) {
    require_square(m, "SymMatrix::from_matrix");
    SymMatrix s(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = i; j < m.cols(); ++j) s.set(i, j, 0.5 * (m(i, j) + m(j, i)));
    }
    return s;
}

SymMatrix SymMatrix::identity(std::size_t n) {
    SymMatrix s(n);
    for (std::size_t i = 0; i < n; ++i) s.set(i, i, 1.0);
    return s;
}

SymMatrix SymMatrix::diagonal(std::span<const double> d) {
    SymMatrix s(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) s.set(i, i, d[i]);
    return s;
}

Matrix SymMatrix::to_matrix() const {
    Matrix m(dim_, dim_);
    for (std::size_t i = 0; i < dim_; ++i) {
        for (std::size_t j = 0; j < dim_; ++j) m(i, j) = (*this)(i, j);
    }
    return m;
}

double SymMatrix::quadratic_form(std::span<const double> v) const noexcept {
    double s = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) {
        s += (*this)(i, i) * v[i] * v[i];
        for (std::size_t j = i + 1; j < dim_; ++j) s += 2.0 * (*this)(i, j) * v[i] * v[j];
    }
    return s;
}

SymMatrix operator*(double s, const SymMatrix& m) {
    SymMatrix out(m.dim());
    for (std::size_t i = 0; i < m.dim(); ++i) {
        for (std::size_t j = i; j < m.dim(); ++j) out.set(i, j, s * m(i, j));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Kernels

std::vector<std::complex<double>> eigenvalues(const Matrix& a) {
    require_square(a, "eigenvalues");
    if (!a.all_finite()) throw Error(ErrorCode::InvalidArgument, "eigenvalues of a non-finite matrix");
    Matrix h = a;
    to_hessenberg(h);
    return hessenberg_qr(h);
}

Vector eigenvalues_sym(const SymMatrix& s) {
    const std::size_t n = s.dim();
    Matrix a = s.to_matrix();
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        double diag = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            diag += a(i, i) * a(i, i);
            for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
        }
        if (off == 0.0 || off <= kEps * kEps * (diag + off)) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = sign_of(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double sn = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - sn * akq;
                    a(k, q) = sn * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - sn * aqk;
                    a(q, k) = sn * apk + c * aqk;
                }
            }
        }
    }
    Vector ev(n);
    for (std::size_t i = 0; i < n; ++i) ev[i] = a(i, i);
    std::sort(ev.begin(), ev.end());
    return ev;
}

EigenExtremes eig_sym_extremes(const SymMatrix& s) {
    if (s.dim() == 0) throw Error(ErrorCode::DimensionMismatch, "eigenvalues of an empty matrix");
    const Vector ev = eigenvalues_sym(s);
    return {ev.front(), ev.back()};
}

double norm2(const Matrix& m) {
    if (m.empty()) return 0.0;
    const Matrix mt = m.transpose();
    // Use the smaller Gram matrix.
    const SymMatrix gram = m.rows() < m.cols() ? SymMatrix::from_matrix(m * mt) : SymMatrix::from_matrix(mt * m);
    return std::sqrt(std::max(0.0, eig_sym_extremes(gram).max));
}

bool is_hurwitz(const Matrix& a, double tol) {
    for (const auto& lambda : eigenvalues(a)) {
        if (!(lambda.real() < -tol)) return false;
    }
    return true;
}

SymMatrix solve_lyapunov(const Matrix& acl, const SymMatrix& q) {
    require_square(acl, "solve_lyapunov");
    if (!is_hurwitz(acl)) throw Error(ErrorCode::NotHurwitz, "closed-loop matrix has an eigenvalue with nonnegative real part");
    return solve_lyapunov_unfolded(acl, q);
}

SymMatrix solve_lyapunov_unfolded(const Matrix& acl, const SymMatrix& q) {
    require_square(acl, "solve_lyapunov_unfolded");
    const std::size_t n = acl.rows();
    if (q.dim() != n) throw Error(ErrorCode::DimensionMismatch, "Q dimension does not match Acl");
    const std::size_t nn = n * n;
    // Row (i,j) of Acl^T P + P Acl: sum_k Acl(k,i) P(k,j) + sum_k P(i,k) Acl(k,j).
    Matrix k(nn, nn);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t row = i * n + j;
            for (std::size_t m = 0; m < n; ++m) {
                k(row, m * n + j) += acl(m, i);
                k(row, i * n + m) += acl(m, j);
            }
        }
    }
    Vector rhs(nn);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) rhs[i * n + j] = -q(i, j);
    }
    const LuFactor lu(k);
    Vector p = lu.solve(rhs);
    // one step of iterative refinement
    Vector r = rhs;
    for (std::size_t row = 0; row < nn; ++row) {
        double s = 0.0;
        for (std::size_t col = 0; col < nn; ++col) s += k(row, col) * p[col];
        r[row] -= s;
    }
    const Vector dp = lu.solve(r);
    for (std::size_t idx = 0; idx < nn; ++idx) p[idx] += dp[idx];

    Matrix pm(n, n, std::move(p));
    return SymMatrix::from_matrix(pm);
}

double lyapunov_residual(const Matrix& acl, const SymMatrix& p, const SymMatrix& q) {
    const Matrix pm = p.to_matrix();
    Matrix r = acl.transpose() * pm + pm * acl;
    r += q.to_matrix();
    return r.frobenius();
}

Vector lu_solve(Matrix a, Vector b) {
    require_square(a, "lu_solve");
    if (b.size() != a.rows()) throw Error(ErrorCode::DimensionMismatch, "lu_solve right-hand side size");
    return LuFactor(std::move(a)).solve(std::move(b));
}

double dot(std::span<const double> a, std::span<const double> b) noexcept {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double squared_norm(std::span<const double> v) noexcept { return dot(v, v); }

double norm(std::span<const double> v) noexcept { return std::sqrt(squared_norm(v)); }

}  // namespace etobs
