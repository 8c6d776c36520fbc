#include "mmcr/spectral.hpp"

#include "mmcr/error.hpp"
#include "mmcr/parallel.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>

namespace mmcr {

namespace {

Matrix top_eigenvectors(const AugmentationGraph& graph, std::size_t d, std::vector<double>* values)
{
    const EigResult e = symmetric_eig(graph.g);
    if (values)
        values->assign(e.values.begin(), e.values.begin() + static_cast<std::ptrdiff_t>(d));
    return e.vectors.left_cols(d);
}

std::vector<double> optimal_sigma(const std::vector<double>& lambda, std::size_t rows)
{
    double sq = 0.0;
    for (double l : lambda)
        sq += l * l;
    const double scale = std::sqrt(static_cast<double>(rows) / sq);
    std::vector<double> sigma;
    for (double l : lambda)
        sigma.push_back(l * scale);
    return sigma;
}

// q * diag(s) * v^T
Matrix compose(const Matrix& q, const std::vector<double>& s, const Matrix& v)
{
    Matrix qs = q;
    for (std::size_t i = 0; i < qs.rows(); ++i)
        for (std::size_t j = 0; j < s.size(); ++j)
            qs(i, j) *= s[j];
    return matmul_nt(qs, v, Exec::serial);
}

void require_dims(const AugmentationGraph& graph, std::size_t d)
{
    if (d == 0 || d > graph.n)
        throw ContractViolation("embedding dimension " + std::to_string(d) + " must be in [1, n = " +
                                std::to_string(graph.n) + "]");
}

}  // namespace

AugmentationGraph build_graph(std::size_t n, std::size_t k)
{
    if (n == 0 || k == 0)
        throw ContractViolation("build_graph: n and k must be >= 1");
    AugmentationGraph graph{n, k, Matrix(n * k, n * k)};
    const double w = 1.0 / static_cast<double>(k);
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < k; ++j)
                graph.g(b * k + i, b * k + j) = w;
    return graph;
}

double graph_loss(const AugmentationGraph& graph, const Matrix& z, Exec exec)
{
    if (z.rows() != graph.size())
        throw ContractViolation("graph_loss: embedding has " + std::to_string(z.rows()) + " rows, graph has " +
                                std::to_string(graph.size()));
    return -nuclear_norm(matmul(graph.g, z, exec));
}

std::pair<double, double> zero_pad_nuclear_invariance(const Matrix& a, const Matrix& b)
{
    if (a.rows() != a.cols())
        throw ContractViolation("zero_pad_nuclear_invariance: a must be square");
    if (b.rows() != a.rows())
        throw ContractViolation("zero_pad_nuclear_invariance: b must have as many rows as a");
    if (b.cols() >= b.rows())
        throw ContractViolation("zero_pad_nuclear_invariance: b must have fewer columns than rows");
    Matrix padded(b.rows(), b.rows());
    for (std::size_t i = 0; i < b.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j)
            padded(i, j) = b(i, j);
    return {nuclear_norm(matmul(a, b, Exec::serial)), nuclear_norm(matmul(a, padded, Exec::serial))};
}

OptimalEmbedding optimal_embedding(const AugmentationGraph& graph, std::size_t d, const Matrix& r)
{
    require_dims(graph, d);
    Matrix rot = r.empty() ? Matrix::identity(d) : r;
    if (rot.rows() != d || rot.cols() != d)
        throw ContractViolation("optimal_embedding: rotation must be d x d");
    const Matrix rtr = matmul_tn(rot, rot, Exec::serial);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j)
            if (std::abs(rtr(i, j) - (i == j ? 1.0 : 0.0)) > 1e-9)
                throw ContractViolation("optimal_embedding: rotation is not orthogonal");

    std::vector<double> lambda;
    const Matrix q = top_eigenvectors(graph, d, &lambda);
    OptimalEmbedding out;
    out.sigma = optimal_sigma(lambda, graph.size());
    out.z = compose(q, out.sigma, rot);
    out.loss = graph_loss(graph, out.z, Exec::serial);
    for (std::size_t i = 0; i < out.z.rows(); ++i)
        out.max_row_norm_deviation = std::max(out.max_row_norm_deviation, std::abs(norm2(out.z.row(i)) - 1.0));
    out.unit_rows = out.max_row_norm_deviation <= 1e-9;
    return out;
}

Matrix frobenius_sphere_sample(RngStream& rng, std::size_t rows, std::size_t cols)
{
    Matrix z = gaussian_matrix(rng, rows, cols);
    double sq = 0.0;
    for (double x : z.data())
        sq += x * x;
    z *= std::sqrt(static_cast<double>(rows) / sq);
    return z;
}

Matrix unit_row_sample(RngStream& rng, std::size_t rows, std::size_t cols)
{
    Matrix z = gaussian_matrix(rng, rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        auto row = z.row(i);
        const double n = norm2(row);
        for (double& x : row)
            x /= n;
    }
    return z;
}

std::vector<double> alignment_path(const AugmentationGraph& graph, const Matrix& z)
{
    const std::size_t d = z.cols();
    require_dims(graph, d);
    if (z.rows() != graph.size())
        throw ContractViolation("alignment_path: embedding rows do not match the graph");
    std::vector<double> lambda;
    const Matrix q = top_eigenvectors(graph, d, &lambda);
    const SvdResult s = svd(z);
    const Matrix aligned = compose(q, s.s, s.v);
    const Matrix optimal = compose(q, optimal_sigma(lambda, graph.size()), s.v);
    return {graph_loss(graph, z, Exec::serial), graph_loss(graph, aligned, Exec::serial),
            graph_loss(graph, optimal, Exec::serial)};
}

OptimalityReport verify_optimality(const AugmentationGraph& graph, std::size_t d, std::size_t trials,
                                   std::uint64_t seed, Exec exec)
{
    if (trials == 0)
        throw ContractViolation("verify_optimality: trials must be >= 1");
    const OptimalEmbedding opt = optimal_embedding(graph, d);
    OptimalityReport r;
    r.n = graph.n;
    r.k = graph.k;
    r.d = d;
    r.trials = trials;
    r.seed = seed;
    r.optimum_loss = opt.loss;
    r.optimum_has_unit_rows = opt.unit_rows;
    r.self_margin = graph_loss(graph, opt.z, Exec::serial) - opt.loss;
    r.frobenius_margins.resize(trials);
    r.unit_row_margins.resize(trials);
    const RngStream base(seed);
    parallel_for(trials, exec, [&](std::size_t t) {
        RngStream rng = base.derive(t);
        const Matrix f = frobenius_sphere_sample(rng, graph.size(), d);
        const Matrix u = unit_row_sample(rng, graph.size(), d);
        r.frobenius_margins[t] = graph_loss(graph, f, Exec::serial) - opt.loss;
        r.unit_row_margins[t] = graph_loss(graph, u, Exec::serial) - opt.loss;
    });
    for (double m : r.frobenius_margins)
        r.frobenius_violations += m < -1e-9 ? 1 : 0;
    for (double m : r.unit_row_margins)
        r.unit_row_violations += m < -1e-9 ? 1 : 0;
    r.best_unit_row_gap = *std::min_element(r.unit_row_margins.begin(), r.unit_row_margins.end());
    return r;
}

std::string optimality_report_json(const OptimalityReport& r, int indent)
{
    nlohmann::ordered_json j;
    j["n"] = r.n;
    j["k"] = r.k;
    j["d"] = r.d;
    j["trials"] = r.trials;
    j["seed"] = r.seed;
    j["constraint"] = "frobenius sphere sum sigma^2 = n k; unit-row embeddings as a sub-family";
    j["optimum_loss"] = r.optimum_loss;
    j["self_margin"] = r.self_margin;
    j["optimum_has_unit_rows"] = r.optimum_has_unit_rows;
    j["frobenius_violations"] = r.frobenius_violations;
    j["unit_row_violations"] = r.unit_row_violations;
    j["best_unit_row_gap"] = r.best_unit_row_gap;
    j["frobenius_margins"] = r.frobenius_margins;
    j["unit_row_margins"] = r.unit_row_margins;
    return j.dump(indent);
}

}  // namespace mmcr
