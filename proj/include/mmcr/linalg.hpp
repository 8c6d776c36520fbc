#pragma once

#include "mmcr/matrix.hpp"

#include <utility>
#include <vector>

namespace mmcr {

/// Execution policy for kernels that have both an OpenMP implementation and
/// a serial reference. Both produce bitwise-identical results: parallel loops
/// only partition independent outputs and every reduction runs in a fixed
/// serial order.
enum class Exec { serial, parallel };

/// Thin SVD a = u * diag(s) * v^T with k = min(rows, cols):
/// u is rows x k, v is cols x k, s descending and non-negative.
struct SvdResult {
    Matrix u;
    std::vector<double> s;
    Matrix v;
};

struct EigResult {
    std::vector<double> values;  // descending
    Matrix vectors;              // column i pairs with values[i]
};

// Products. The `_tn` / `_nt` variants transpose the left / right operand.
Matrix matmul(const Matrix& a, const Matrix& b, Exec exec = Exec::parallel);
Matrix matmul_tn(const Matrix& a, const Matrix& b, Exec exec = Exec::parallel);
Matrix matmul_nt(const Matrix& a, const Matrix& b, Exec exec = Exec::parallel);
std::vector<double> matvec(const Matrix& a, std::span<const double> x);
std::vector<double> matvec_t(const Matrix& a, std::span<const double> x);
/// a^T a.
Matrix gram(const Matrix& a, Exec exec = Exec::parallel);

/// One-sided (Hestenes) Jacobi SVD. Throws NumericalFailure, with the
/// matrix dimensions in the message, if the sweep cap is reached.
SvdResult svd(const Matrix& a);
/// Singular values only, descending.
std::vector<double> singular_values(const Matrix& a);

/// Householder tridiagonalization followed by implicit QL.
/// Input must be square and symmetric to 1e-9 (relative to its largest entry).
EigResult symmetric_eig(const Matrix& a);

double nuclear_norm(const Matrix& a);

/// Rank cutoff used by the subgradient: 1e-10 * max(rows, cols) * s_max.
double rank_threshold(std::size_t rows, std::size_t cols, double s_max) noexcept;

/// u_r v_r^T over singular values above `rank_threshold`. For full-rank input
/// with distinct singular values this is the gradient of the nuclear norm;
/// at repeated singular values it depends on the basis the solver returns.
Matrix nuclear_norm_subgradient(const Matrix& a);
/// Same, reusing an existing decomposition of `a`.
Matrix nuclear_norm_subgradient(const SvdResult& d, std::size_t rows, std::size_t cols);

/// Closed-form singular values of the two-column matrix [c1 c2], descending.
std::pair<double, double> two_column_singular_values(std::span<const double> c1, std::span<const double> c2);

/// Fills columns [first, cols) of `q` (whose leading columns are orthonormal)
/// with an orthonormal completion drawn from the standard basis.
void complete_orthonormal(Matrix& q, std::size_t first);

/// Orthonormal basis of the column span of `a` with numerical rank cutoff
/// `rel_tol * s_max`. Columns ordered by decreasing singular value.
Matrix column_space(const Matrix& a, double rel_tol = 1e-10);

}  // namespace mmcr
