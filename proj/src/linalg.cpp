#include "mmcr/linalg.hpp"

#include "mmcr/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace mmcr {

namespace {

std::string dims(const Matrix& a) { return std::to_string(a.rows()) + "x" + std::to_string(a.cols()); }

constexpr int kMaxJacobiSweeps = 80;
constexpr int kMaxQlIterations = 60;
constexpr double kEps = std::numeric_limits<double>::epsilon();

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b, Exec exec)
{
    if (a.cols() != b.rows())
        throw ContractViolation("matmul: " + dims(a) + " * " + dims(b));
    Matrix c(a.rows(), b.cols());
    const auto n = static_cast<std::ptrdiff_t>(a.rows());
    const std::size_t inner = a.cols(), out = b.cols();
#pragma omp parallel for schedule(static) if (exec == Exec::parallel && n > 16)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        auto crow = c.row(i);
        for (std::size_t k = 0; k < inner; ++k) {
            const double aik = a(i, k);
            const auto brow = b.row(k);
            for (std::size_t j = 0; j < out; ++j)
                crow[j] += aik * brow[j];
        }
    }
    return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b, Exec exec)
{
    if (a.rows() != b.rows())
        throw ContractViolation("matmul_tn: " + dims(a) + "^T * " + dims(b));
    Matrix c(a.cols(), b.cols());
    const auto n = static_cast<std::ptrdiff_t>(a.cols());
    const std::size_t inner = a.rows(), out = b.cols();
#pragma omp parallel for schedule(static) if (exec == Exec::parallel && n > 16)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        auto crow = c.row(i);
        for (std::size_t k = 0; k < inner; ++k) {
            const double aki = a(k, i);
            const auto brow = b.row(k);
            for (std::size_t j = 0; j < out; ++j)
                crow[j] += aki * brow[j];
        }
    }
    return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b, Exec exec)
{
    if (a.cols() != b.cols())
        throw ContractViolation("matmul_nt: " + dims(a) + " * " + dims(b) + "^T");
    Matrix c(a.rows(), b.rows());
    const auto n = static_cast<std::ptrdiff_t>(a.rows());
    const std::size_t out = b.rows();
#pragma omp parallel for schedule(static) if (exec == Exec::parallel && n > 16)
    for (std::ptrdiff_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < out; ++j)
            c(i, j) = dot(a.row(i), b.row(j));
    return c;
}

std::vector<double> matvec(const Matrix& a, std::span<const double> x)
{
    if (a.cols() != x.size())
        throw ContractViolation("matvec: width mismatch");
    std::vector<double> y(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        y[i] = dot(a.row(i), x);
    return y;
}

std::vector<double> matvec_t(const Matrix& a, std::span<const double> x)
{
    if (a.rows() != x.size())
        throw ContractViolation("matvec_t: height mismatch");
    std::vector<double> y(a.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const auto r = a.row(i);
        for (std::size_t j = 0; j < a.cols(); ++j)
            y[j] += x[i] * r[j];
    }
    return y;
}

Matrix gram(const Matrix& a, Exec exec) { return matmul_tn(a, a, exec); }

namespace {

// Hestenes Jacobi on a tall matrix (rows >= cols). Works on the transpose so
// that each column of `a` is a contiguous row of `w`.
struct TallJacobi {
    Matrix w;   // cols x rows; row j converges to sigma_j * u_j
    Matrix vt;  // cols x cols; row j converges to v_j
};

TallJacobi jacobi_orthogonalize(const Matrix& a, bool want_v)
{
    const std::size_t n = a.cols();
    TallJacobi out{a.transpose(), want_v ? Matrix::identity(n) : Matrix()};
    Matrix& w = out.w;
    std::vector<double> norms(n);
    double frob2 = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        norms[j] = dot(w.row(j), w.row(j));
        frob2 += norms[j];
    }
    // Columns below rounding level of the whole matrix are treated as zero;
    // rotating them against large columns only reshuffles rounding noise.
    const double negligible = frob2 * kEps * kEps;

    constexpr double tol = 1e-15;
    for (int sweep = 0; sweep < kMaxJacobiSweeps; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double alpha = norms[p];
                const double beta = norms[q];
                if (alpha <= negligible || beta <= negligible)
                    continue;
                const double gamma = dot(w.row(p), w.row(q));
                if (std::abs(gamma) <= tol * std::sqrt(alpha * beta))
                    continue;
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                auto wp = w.row(p);
                auto wq = w.row(q);
                for (std::size_t i = 0; i < wp.size(); ++i) {
                    const double x = wp[i], y = wq[i];
                    wp[i] = c * x - s * y;
                    wq[i] = s * x + c * y;
                }
                if (want_v) {
                    auto vp = out.vt.row(p);
                    auto vq = out.vt.row(q);
                    for (std::size_t i = 0; i < n; ++i) {
                        const double x = vp[i], y = vq[i];
                        vp[i] = c * x - s * y;
                        vq[i] = s * x + c * y;
                    }
                }
                norms[p] = dot(wp, wp);
                norms[q] = dot(wq, wq);
            }
        }
        if (!rotated)
            return out;
    }
    throw NumericalFailure("svd: Jacobi sweeps did not converge for " + dims(a) + " matrix");
}

SvdResult svd_tall(const Matrix& a)
{
    const std::size_t m = a.rows(), n = a.cols();
    TallJacobi j = jacobi_orthogonalize(a, true);

    std::vector<double> sig(n);
    for (std::size_t k = 0; k < n; ++k)
        sig[k] = norm2(j.w.row(k));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return sig[x] > sig[y]; });

    SvdResult r{Matrix(m, n), std::vector<double>(n), Matrix(n, n)};
    const double smax = n ? sig[order[0]] : 0.0;
    const double floor = smax * static_cast<double>(std::max(m, n)) * kEps;
    std::size_t good = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t src = order[k];
        r.s[k] = sig[src];
        for (std::size_t i = 0; i < n; ++i)
            r.v(i, k) = j.vt(src, i);
        if (sig[src] > floor && sig[src] > 0.0) {
            for (std::size_t i = 0; i < m; ++i)
                r.u(i, k) = j.w(src, i) / sig[src];
            ++good;
        }
    }
    // Columns of u for (numerically) zero singular values carry no signal;
    // replace them with an orthonormal completion.
    if (good < n)
        complete_orthonormal(r.u, good);
    return r;
}

}  // namespace

SvdResult svd(const Matrix& a)
{
    if (a.rows() == 0 || a.cols() == 0)
        throw ContractViolation("svd: empty matrix");
    if (!a.all_finite())
        throw ContractViolation("svd: non-finite entries in " + dims(a) + " matrix");
    if (a.rows() >= a.cols())
        return svd_tall(a);
    SvdResult t = svd_tall(a.transpose());
    return SvdResult{std::move(t.v), std::move(t.s), std::move(t.u)};
}

std::vector<double> singular_values(const Matrix& a)
{
    if (a.rows() == 0 || a.cols() == 0)
        throw ContractViolation("singular_values: empty matrix");
    if (!a.all_finite())
        throw ContractViolation("singular_values: non-finite entries in " + dims(a) + " matrix");
    TallJacobi j = jacobi_orthogonalize(a.rows() >= a.cols() ? a : a.transpose(), false);
    std::vector<double> s(j.w.rows());
    for (std::size_t k = 0; k < s.size(); ++k)
        s[k] = norm2(j.w.row(k));
    std::sort(s.begin(), s.end(), std::greater<>());
    return s;
}

void complete_orthonormal(Matrix& q, std::size_t first)
{
    const std::size_t m = q.rows();
    std::size_t next = first;
    for (std::size_t e = 0; e < m && next < q.cols(); ++e) {
        std::vector<double> cand(m, 0.0);
        cand[e] = 1.0;
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t j = 0; j < next; ++j) {
                double p = 0.0;
                for (std::size_t i = 0; i < m; ++i)
                    p += q(i, j) * cand[i];
                for (std::size_t i = 0; i < m; ++i)
                    cand[i] -= p * q(i, j);
            }
        }
        const double nrm = norm2(cand);
        if (nrm < 1e-6)
            continue;
        for (std::size_t i = 0; i < m; ++i)
            q(i, next) = cand[i] / nrm;
        ++next;
    }
    if (next < q.cols())
        throw NumericalFailure("complete_orthonormal: could not complete basis");
}

EigResult symmetric_eig(const Matrix& a)
{
    const std::size_t n = a.rows();
    if (n == 0 || a.cols() != n)
        throw ContractViolation("symmetric_eig: matrix must be square, got " + dims(a));
    double scale = 0.0;
    for (double v : a.data())
        scale = std::max(scale, std::abs(v));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (std::abs(a(i, j) - a(j, i)) > 1e-9 * std::max(1.0, scale))
                throw ContractViolation("symmetric_eig: input is not symmetric at (" + std::to_string(i) + ", " +
                                        std::to_string(j) + ")");

    // Householder reduction to tridiagonal form; v accumulates the transform.
    Matrix v = a;
    std::vector<double> d(n), e(n);
    for (std::size_t j = 0; j < n; ++j)
        d[j] = v(n - 1, j);

    for (std::size_t i = n - 1; i > 0; --i) {
        double sc = 0.0, h = 0.0;
        for (std::size_t k = 0; k < i; ++k)
            sc += std::abs(d[k]);
        if (sc == 0.0) {
            e[i] = d[i - 1];
            for (std::size_t j = 0; j < i; ++j) {
                d[j] = v(i - 1, j);
                v(i, j) = 0.0;
                v(j, i) = 0.0;
            }
        } else {
            for (std::size_t k = 0; k < i; ++k) {
                d[k] /= sc;
                h += d[k] * d[k];
            }
            double f = d[i - 1];
            double g = std::sqrt(h);
            if (f > 0)
                g = -g;
            e[i] = sc * g;
            h -= f * g;
            d[i - 1] = f - g;
            for (std::size_t j = 0; j < i; ++j)
                e[j] = 0.0;
            for (std::size_t j = 0; j < i; ++j) {
                f = d[j];
                v(j, i) = f;
                g = e[j] + v(j, j) * f;
                for (std::size_t k = j + 1; k < i; ++k) {
                    g += v(k, j) * d[k];
                    e[k] += v(k, j) * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for (std::size_t j = 0; j < i; ++j) {
                e[j] /= h;
                f += e[j] * d[j];
            }
            const double hh = f / (h + h);
            for (std::size_t j = 0; j < i; ++j)
                e[j] -= hh * d[j];
            for (std::size_t j = 0; j < i; ++j) {
                f = d[j];
                g = e[j];
                for (std::size_t k = j; k < i; ++k)
                    v(k, j) -= (f * e[k] + g * d[k]);
                d[j] = v(i - 1, j);
                v(i, j) = 0.0;
            }
        }
        d[i] = h;
    }
    for (std::size_t i = 0; i + 1 < n; ++i) {
        v(n - 1, i) = v(i, i);
        v(i, i) = 1.0;
        const double h = d[i + 1];
        if (h != 0.0) {
            for (std::size_t k = 0; k <= i; ++k)
                d[k] = v(k, i + 1) / h;
            for (std::size_t j = 0; j <= i; ++j) {
                double g = 0.0;
                for (std::size_t k = 0; k <= i; ++k)
                    g += v(k, i + 1) * v(k, j);
                for (std::size_t k = 0; k <= i; ++k)
                    v(k, j) -= g * d[k];
            }
        }
        for (std::size_t k = 0; k <= i; ++k)
            v(k, i + 1) = 0.0;
    }
    for (std::size_t j = 0; j < n; ++j) {
        d[j] = v(n - 1, j);
        v(n - 1, j) = 0.0;
    }
    v(n - 1, n - 1) = 1.0;
    e[0] = 0.0;

    // Implicit QL on the tridiagonal (d, e).
    for (std::size_t i = 1; i < n; ++i)
        e[i - 1] = e[i];
    e[n - 1] = 0.0;
    double f = 0.0, tst1 = 0.0;
    for (std::size_t l = 0; l < n; ++l) {
        tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
        std::size_t m = l;
        while (m < n) {
            if (std::abs(e[m]) <= kEps * tst1)
                break;
            ++m;
        }
        if (m == n)
            m = n - 1;
        if (m > l) {
            int iter = 0;
            do {
                if (++iter > kMaxQlIterations)
                    throw NumericalFailure("symmetric_eig: QL iteration did not converge for " + dims(a) + " matrix");
                double g = d[l];
                double p = (d[l + 1] - g) / (2.0 * e[l]);
                double r = std::hypot(p, 1.0);
                if (p < 0)
                    r = -r;
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                const double dl1 = d[l + 1];
                double h = g - d[l];
                for (std::size_t i = l + 2; i < n; ++i)
                    d[i] -= h;
                f += h;
                p = d[m];
                double c = 1.0, c2 = 1.0, c3 = 1.0;
                const double el1 = e[l + 1];
                double s = 0.0, s2 = 0.0;
                for (std::size_t ii = m; ii-- > l;) {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[ii];
                    h = c * p;
                    r = std::hypot(p, e[ii]);
                    e[ii + 1] = s * r;
                    s = e[ii] / r;
                    c = p / r;
                    p = c * d[ii] - s * g;
                    d[ii + 1] = h + s * (c * g + s * d[ii]);
                    for (std::size_t k = 0; k < n; ++k) {
                        h = v(k, ii + 1);
                        v(k, ii + 1) = s * v(k, ii) + c * h;
                        v(k, ii) = c * v(k, ii) - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
            } while (std::abs(e[l]) > kEps * tst1);
        }
        d[l] += f;
        e[l] = 0.0;
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return d[x] > d[y]; });
    EigResult out{std::vector<double>(n), Matrix(n, n)};
    for (std::size_t k = 0; k < n; ++k) {
        out.values[k] = d[order[k]];
        for (std::size_t i = 0; i < n; ++i)
            out.vectors(i, k) = v(i, order[k]);
    }
    return out;
}

double nuclear_norm(const Matrix& a)
{
    const auto s = singular_values(a);
    return std::accumulate(s.begin(), s.end(), 0.0);
}

double rank_threshold(std::size_t rows, std::size_t cols, double s_max) noexcept
{
    return 1e-10 * static_cast<double>(std::max(rows, cols)) * s_max;
}

Matrix nuclear_norm_subgradient(const SvdResult& d, std::size_t rows, std::size_t cols)
{
    Matrix g(rows, cols);
    if (d.s.empty() || d.s[0] == 0.0)
        return g;
    const double tau = rank_threshold(rows, cols, d.s[0]);
    for (std::size_t k = 0; k < d.s.size(); ++k) {
        if (d.s[k] <= tau)
            break;
        for (std::size_t i = 0; i < rows; ++i) {
            const double uik = d.u(i, k);
            auto grow = g.row(i);
            for (std::size_t j = 0; j < cols; ++j)
                grow[j] += uik * d.v(j, k);
        }
    }
    return g;
}

Matrix nuclear_norm_subgradient(const Matrix& a) { return nuclear_norm_subgradient(svd(a), a.rows(), a.cols()); }

std::pair<double, double> two_column_singular_values(std::span<const double> c1, std::span<const double> c2)
{
    if (c1.size() != c2.size())
        throw ContractViolation("two_column_singular_values: length mismatch");
    const double n1 = dot(c1, c1);
    const double n2 = dot(c2, c2);
    const double x = dot(c1, c2);
    const double disc = std::sqrt((n1 - n2) * (n1 - n2) + 4.0 * x * x);
    const double hi = std::sqrt(std::max(0.0, n1 + n2 + disc) / 2.0);
    const double lo = std::sqrt(std::max(0.0, n1 + n2 - disc) / 2.0);
    return {hi, lo};
}

Matrix column_space(const Matrix& a, double rel_tol)
{
    const SvdResult d = svd(a);
    std::size_t r = 0;
    while (r < d.s.size() && d.s[r] > rel_tol * d.s[0])
        ++r;
    return d.u.left_cols(r);
}

}  // namespace mmcr
