#include "mmcr/objective.hpp"

#include "mmcr/error.hpp"
#include "mmcr/parallel.hpp"

#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <string>

namespace mmcr {

namespace {

constexpr double kMinViewNorm = 1e-12;

void require_normalized(const ManifoldBatch& batch)
{
    for (std::size_t b = 0; b < batch.b(); ++b)
        for (std::size_t k = 0; k < batch.k(); ++k)
            if (std::abs(norm2(batch.view(b, k)) - 1.0) > 1e-8)
                throw ContractViolation("mmcr_loss: view (" + std::to_string(b) + ", " + std::to_string(k) +
                                        ") is not unit norm; call sphere_normalize first");
}

std::string shape(std::size_t b, std::size_t k, std::size_t d)
{
    return std::to_string(b) + "x" + std::to_string(k) + "x" + std::to_string(d);
}

}  // namespace

ManifoldBatch::ManifoldBatch(std::size_t b, std::size_t k, std::size_t d) : ManifoldBatch(b, k, d, std::vector<double>(b * k * d, 0.0)) {}

ManifoldBatch::ManifoldBatch(std::size_t b, std::size_t k, std::size_t d, std::vector<double> z)
    : b_(b), k_(k), d_(d), z_(std::move(z))
{
    if (b == 0 || k == 0 || d < 2)
        throw ContractViolation("ManifoldBatch needs b >= 1, k >= 1, d >= 2; got " + shape(b, k, d));
    if (z_.size() != b * k * d)
        throw ContractViolation("ManifoldBatch data length mismatch for " + shape(b, k, d));
    for (double v : z_)
        if (!std::isfinite(v))
            throw ContractViolation("ManifoldBatch entries must be finite");
}

ManifoldBatch ManifoldBatch::from_rows(const Matrix& features, std::size_t b, std::size_t k)
{
    if (features.rows() != b * k)
        throw ContractViolation("from_rows: expected " + std::to_string(b * k) + " rows, got " +
                                std::to_string(features.rows()));
    return ManifoldBatch(b, k, features.cols(), std::vector<double>(features.data().begin(), features.data().end()));
}

Matrix ManifoldBatch::manifold_matrix(std::size_t bi) const
{
    Matrix m(d_, k_);
    for (std::size_t ki = 0; ki < k_; ++ki) {
        const auto v = view(bi, ki);
        for (std::size_t j = 0; j < d_; ++j)
            m(j, ki) = v[j];
    }
    return m;
}

Matrix ManifoldBatch::as_rows() const { return Matrix(b_ * k_, d_, z_); }

ManifoldBatch sphere_normalize(const ManifoldBatch& raw)
{
    ManifoldBatch out = raw;
    for (std::size_t b = 0; b < raw.b(); ++b) {
        for (std::size_t k = 0; k < raw.k(); ++k) {
            auto v = out.view(b, k);
            const double n = norm2(v);
            if (!(n > kMinViewNorm))
                throw DegenerateInput("sphere_normalize: view (" + std::to_string(b) + ", " + std::to_string(k) +
                                      ") has near-zero norm " + std::to_string(n));
            for (double& x : v)
                x /= n;
        }
    }
    return out;
}

Matrix centroids(const ManifoldBatch& batch)
{
    Matrix c(batch.d(), batch.b());
    const double inv_k = 1.0 / static_cast<double>(batch.k());
    for (std::size_t b = 0; b < batch.b(); ++b) {
        for (std::size_t k = 0; k < batch.k(); ++k) {
            const auto v = batch.view(b, k);
            for (std::size_t j = 0; j < batch.d(); ++j)
                c(j, b) += v[j];
        }
        for (std::size_t j = 0; j < batch.d(); ++j)
            c(j, b) *= inv_k;
    }
    return c;
}

namespace {

// Per-manifold nuclear norms, optionally with their subgradients. Each
// manifold writes only its own slot, so the parallel and serial paths match.
std::vector<double> manifold_nuclear_norms(const ManifoldBatch& batch, Exec exec, std::vector<Matrix>* grads)
{
    std::vector<double> norms(batch.b());
    if (grads)
        grads->assign(batch.b(), Matrix());
    parallel_for(batch.b(), exec, [&](std::size_t b) {
        const Matrix zb = batch.manifold_matrix(b);
        const SvdResult d = svd(zb);
        norms[b] = std::accumulate(d.s.begin(), d.s.end(), 0.0);
        if (grads)
            (*grads)[b] = nuclear_norm_subgradient(d, zb.rows(), zb.cols());
    });
    return norms;
}

LossBreakdown evaluate(const ManifoldBatch& batch, double lambda, Exec exec, bool always_compression)
{
    if (!(lambda >= 0.0))
        throw ContractViolation("mmcr_loss: lambda must be >= 0");
    require_normalized(batch);
    LossBreakdown out;
    out.lambda = lambda;
    out.centroid_term = -nuclear_norm(centroids(batch));
    if (lambda > 0.0 || always_compression) {
        const auto norms = manifold_nuclear_norms(batch, exec, nullptr);
        out.compression_term = std::accumulate(norms.begin(), norms.end(), 0.0) / static_cast<double>(batch.b());
    }
    out.total = out.centroid_term + lambda * out.compression_term;
    return out;
}

}  // namespace

LossBreakdown mmcr_loss(const ManifoldBatch& batch, double lambda, Exec exec)
{
    return evaluate(batch, lambda, exec, false);
}

LossBreakdown mmcr_loss_full(const ManifoldBatch& batch, double lambda, Exec exec)
{
    return evaluate(batch, lambda, exec, true);
}

LossAndGradient mmcr_loss_and_grad(const ManifoldBatch& raw, double lambda, Exec exec)
{
    if (!(lambda >= 0.0))
        throw ContractViolation("mmcr_loss_grad: lambda must be >= 0");
    const ManifoldBatch z = sphere_normalize(raw);
    const std::size_t nb = z.b(), nk = z.k(), nd = z.d();

    LossAndGradient out{{}, ManifoldBatch(nb, nk, nd)};
    out.loss.lambda = lambda;

    const Matrix c = centroids(z);
    const SvdResult cd = svd(c);
    out.loss.centroid_term = -std::accumulate(cd.s.begin(), cd.s.end(), 0.0);
    const Matrix gc = nuclear_norm_subgradient(cd, c.rows(), c.cols());  // d x B

    std::vector<Matrix> gz;
    if (lambda > 0.0) {
        const auto norms = manifold_nuclear_norms(z, exec, &gz);
        out.loss.compression_term = std::accumulate(norms.begin(), norms.end(), 0.0) / static_cast<double>(nb);
    }
    out.loss.total = out.loss.centroid_term + lambda * out.loss.compression_term;

    const double wc = -1.0 / static_cast<double>(nk);
    const double wz = lambda / static_cast<double>(nb);
    std::vector<double> dz(nd);
    for (std::size_t b = 0; b < nb; ++b) {
        for (std::size_t k = 0; k < nk; ++k) {
            for (std::size_t j = 0; j < nd; ++j)
                dz[j] = wc * gc(j, b) + (lambda > 0.0 ? wz * gz[b](j, k) : 0.0);
            // Chain through z = r / ||r||: dr = (dz - z (z . dz)) / ||r||.
            const auto zv = z.view(b, k);
            const double rn = norm2(raw.view(b, k));
            const double radial = dot(zv, dz);
            auto g = out.grad.view(b, k);
            for (std::size_t j = 0; j < nd; ++j)
                g[j] = (dz[j] - zv[j] * radial) / rn;
        }
    }
    return out;
}

ManifoldBatch mmcr_loss_grad(const ManifoldBatch& raw, double lambda, Exec exec)
{
    return mmcr_loss_and_grad(raw, lambda, exec).grad;
}

double mean_centroid_norm(const ManifoldBatch& batch)
{
    const Matrix c = centroids(batch);
    double s = 0.0;
    for (std::size_t b = 0; b < c.cols(); ++b)
        s += norm2(c.col(b));
    return s / static_cast<double>(c.cols());
}

double mean_centroid_similarity(const ManifoldBatch& batch)
{
    const Matrix c = centroids(batch);
    const std::size_t nb = c.cols();
    if (nb < 2)
        return 0.0;
    std::vector<std::vector<double>> unit(nb);
    for (std::size_t b = 0; b < nb; ++b) {
        unit[b] = c.col(b);
        const double n = norm2(unit[b]);
        for (double& x : unit[b])
            x = n > 0.0 ? x / n : 0.0;
    }
    double s = 0.0;
    for (std::size_t i = 0; i < nb; ++i)
        for (std::size_t j = i + 1; j < nb; ++j)
            s += dot(unit[i], unit[j]);
    return s / (0.5 * static_cast<double>(nb * (nb - 1)));
}

double mean_within_manifold_similarity(const ManifoldBatch& batch)
{
    if (batch.k() < 2)
        return 1.0;
    double s = 0.0;
    std::size_t n = 0;
    for (std::size_t b = 0; b < batch.b(); ++b)
        for (std::size_t i = 0; i < batch.k(); ++i)
            for (std::size_t j = i + 1; j < batch.k(); ++j) {
                s += dot(batch.view(b, i), batch.view(b, j));
                ++n;
            }
    return s / static_cast<double>(n);
}

void write_batch(std::ostream& os, const ManifoldBatch& batch)
{
    io::put_u64(os, batch.b());
    io::put_u64(os, batch.k());
    io::put_u64(os, batch.d());
    for (double v : batch.values())
        io::put_f64(os, v);
}

ManifoldBatch read_batch(std::istream& is)
{
    const auto b = io::get_u64(is), k = io::get_u64(is), d = io::get_u64(is);
    if (b > (1u << 20) || k > (1u << 20) || d > (1u << 20) || b * k * d > (1ull << 30))
        throw IoError("manifold batch: implausible dimensions");
    std::vector<double> z(b * k * d);
    for (double& v : z)
        v = io::get_f64(is);
    return ManifoldBatch(b, k, d, std::move(z));
}

}  // namespace mmcr
