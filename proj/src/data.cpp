#include "mmcr/data.hpp"

#include "mmcr/error.hpp"
#include "mmcr/linalg.hpp"

#include <cmath>
#include <string>

namespace mmcr {

Matrix SceneDataset::rows(std::span<const std::size_t> idx) const
{
    Matrix out(idx.size(), x.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const auto src = x.row(idx[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

std::vector<int> SceneDataset::labels_of(std::span<const std::size_t> idx) const
{
    std::vector<int> out;
    out.reserve(idx.size());
    for (std::size_t i : idx)
        out.push_back(labels.at(i));
    return out;
}

SceneDataset make_dataset(const DatasetConfig& cfg, RngStream& rng)
{
    if (cfg.n_classes < 2)
        throw ConfigError("dataset.n_classes must be >= 2");
    if (cfg.intrinsic_dim == 0 || cfg.intrinsic_dim >= cfg.ambient_dim)
        throw ConfigError("dataset.intrinsic_dim must be in [1, ambient_dim), got " +
                          std::to_string(cfg.intrinsic_dim) + " with ambient_dim " + std::to_string(cfg.ambient_dim));
    if (cfg.n_per_class == 0)
        throw ConfigError("dataset.n_per_class must be >= 1");
    if (cfg.coeff_std < 0 || cfg.noise_sigma < 0 || cfg.offset_norm < 0 || cfg.radius_spread < 0)
        throw ConfigError("dataset scales must be non-negative");

    const std::size_t amb = cfg.ambient_dim, intr = cfg.intrinsic_dim;
    SceneDataset ds;
    ds.config = cfg;
    const bool disjoint = cfg.n_classes * intr <= amb;
    const Matrix q = disjoint ? random_orthogonal(rng, amb) : Matrix();
    for (std::size_t c = 0; c < cfg.n_classes; ++c) {
        ClassFrame f;
        f.basis = disjoint ? q.block(0, c * intr, amb, intr) : random_orthonormal_columns(rng, amb, intr);
        std::vector<double> dir(intr);
        for (double& v : dir)
            v = rng.normal();
        const double n = norm2(dir);
        f.offset = matvec(f.basis, dir);
        for (double& v : f.offset)
            v *= cfg.offset_norm / n;
        ds.frames.push_back(std::move(f));
    }

    ds.x = Matrix(cfg.n_classes * cfg.n_per_class, amb);
    std::vector<double> coef(intr);
    for (std::size_t c = 0; c < cfg.n_classes; ++c) {
        const ClassFrame& f = ds.frames[c];
        for (std::size_t i = 0; i < cfg.n_per_class; ++i) {
            const std::size_t r = c * cfg.n_per_class + i;
            const double radius = cfg.radius_spread > 0.0 ? std::exp(cfg.radius_spread * rng.normal()) : 1.0;
            for (double& v : coef)
                v = radius * cfg.coeff_std * rng.normal();
            const auto p = matvec(f.basis, coef);
            auto row = ds.x.row(r);
            for (std::size_t j = 0; j < amb; ++j)
                row[j] = f.offset[j] + p[j] + cfg.noise_sigma * rng.normal();
            ds.labels.push_back(static_cast<int>(c));
        }
    }

    if (cfg.standardize) {
        double ss = 0.0;
        for (std::size_t j = 0; j < amb; ++j) {
            double mean = 0.0;
            for (std::size_t r = 0; r < ds.x.rows(); ++r)
                mean += ds.x(r, j);
            mean /= static_cast<double>(ds.x.rows());
            for (std::size_t r = 0; r < ds.x.rows(); ++r)
                ss += (ds.x(r, j) - mean) * (ds.x(r, j) - mean);
        }
        const double sd = std::sqrt(ss / static_cast<double>(ds.x.size()));
        if (sd > 0.0) {
            ds.scale = 1.0 / sd;
            ds.x *= ds.scale;
            for (auto& f : ds.frames)
                for (double& v : f.offset)
                    v *= ds.scale;
        }
    }
    return ds;
}

DatasetSplit split_dataset(const SceneDataset& ds, double test_fraction, RngStream& rng)
{
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw ConfigError("test_fraction must be in (0, 1)");
    std::vector<std::size_t> idx(ds.size());
    for (std::size_t i = 0; i < idx.size(); ++i)
        idx[i] = i;
    rng.shuffle(idx);
    const auto n_test = static_cast<std::size_t>(std::lround(test_fraction * static_cast<double>(idx.size())));
    DatasetSplit s;
    s.test.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
    s.train.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());
    return s;
}

Matrix augment(std::span<const double> x, std::size_t k, const AugmentationSpec& spec, RngStream& rng,
               const ClassFrame* frame)
{
    if (k == 0)
        throw ContractViolation("augment: k must be >= 1");
    if (spec.mask_fraction < 0.0 || spec.mask_fraction >= 1.0 || spec.scale_lo > spec.scale_hi ||
        spec.jitter_sigma < 0.0 || spec.rotation_angle_max < 0.0)
        throw ContractViolation("augment: invalid augmentation spec");
    const bool rotate = spec.rotation_angle_max > 0.0;
    if (rotate && (!frame || frame->basis.rows() != x.size()))
        throw ContractViolation("augment: rotation requires the class frame of x");

    const std::size_t dim = x.size();
    const auto n_mask = static_cast<std::size_t>(std::lround(spec.mask_fraction * static_cast<double>(dim)));
    Matrix out(k, dim);
    std::vector<double> v(dim);
    for (std::size_t view = 0; view < k; ++view) {
        std::copy(x.begin(), x.end(), v.begin());
        if (rotate) {
            const Matrix& a = frame->basis;
            const std::size_t intr = a.cols();
            if (intr >= 2) {
                // Rotate the in-subspace coordinates of (x - offset) in a random 2-plane.
                std::vector<double> rel(dim);
                for (std::size_t j = 0; j < dim; ++j)
                    rel[j] = v[j] - frame->offset[j];
                const auto coef = matvec_t(a, rel);
                const Matrix plane = random_orthonormal_columns(rng, intr, 2);
                const double theta = rng.uniform(-spec.rotation_angle_max, spec.rotation_angle_max);
                const auto p0 = plane.col(0), p1 = plane.col(1);
                const double c0 = dot(p0, coef), c1 = dot(p1, coef);
                const double r0 = c0 * std::cos(theta) - c1 * std::sin(theta) - c0;
                const double r1 = c0 * std::sin(theta) + c1 * std::cos(theta) - c1;
                std::vector<double> dcoef(intr);
                for (std::size_t i = 0; i < intr; ++i)
                    dcoef[i] = r0 * p0[i] + r1 * p1[i];
                const auto dv = matvec(a, dcoef);
                for (std::size_t j = 0; j < dim; ++j)
                    v[j] += dv[j];
            }
        }
        if (spec.scale_lo != 1.0 || spec.scale_hi != 1.0) {
            const double s = rng.uniform(spec.scale_lo, spec.scale_hi);
            for (double& e : v)
                e *= s;
        }
        if (spec.jitter_sigma > 0.0)
            for (double& e : v)
                e += spec.jitter_sigma * rng.normal();
        if (n_mask > 0)
            for (std::size_t j : rng.sample_indices(dim, n_mask))
                v[j] = 0.0;
        std::copy(v.begin(), v.end(), out.row(view).begin());
    }
    return out;
}

}  // namespace mmcr
