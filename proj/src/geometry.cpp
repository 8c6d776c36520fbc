#include "mmcr/geometry.hpp"

#include "mmcr/error.hpp"
#include "mmcr/linalg.hpp"
#include "mmcr/parallel.hpp"
#include "mmcr/trainer.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace mmcr {

namespace {

void require_orthonormal(const Matrix& q, const char* name)
{
    const Matrix g = matmul_tn(q, q, Exec::serial);
    for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j)
            if (std::abs(g(i, j) - (i == j ? 1.0 : 0.0)) > 1e-9)
                throw ContractViolation(std::string("principal_angles: ") + name + " does not have orthonormal columns");
}

Matrix centered(const PointManifold& m)
{
    Matrix x = m.points;
    for (std::size_t j = 0; j < x.cols(); ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < x.rows(); ++i)
            mean += x(i, j);
        mean /= static_cast<double>(x.rows());
        for (std::size_t i = 0; i < x.rows(); ++i)
            x(i, j) -= mean;
    }
    return x;
}

double mean_of(const std::vector<double>& v)
{
    if (v.empty())
        return 0.0;
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

int label_of(const PointManifold& m)
{
    if (!m.label)
        throw ContractViolation("similarity statistics need a class label on every manifold");
    return *m.label;
}

void require_groups(std::span<const int> labels)
{
    std::map<int, std::size_t> count;
    for (int l : labels)
        ++count[l];
    if (count.size() < 2)
        throw ContractViolation("similarity statistics need at least 2 classes");
    for (const auto& [label, n] : count)
        if (n < 2)
            throw ContractViolation("similarity statistics need at least 2 manifolds in class " + std::to_string(label));
}

// Evaluates f on every pair i < j in parallel and splits the values by label
// agreement in pair order.
template <class F>
SimilarityDistributions pairwise(const std::vector<int>& labels, F&& f)
{
    const std::size_t n = labels.size();
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            pairs.emplace_back(i, j);
    std::vector<std::optional<double>> values(pairs.size());
    parallel_for(pairs.size(), Exec::parallel, [&](std::size_t p) { values[p] = f(pairs[p].first, pairs[p].second); });
    SimilarityDistributions out;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        if (!values[p]) {
            ++out.excluded;
            continue;
        }
        (labels[pairs[p].first] == labels[pairs[p].second] ? out.within_class : out.across_class)
            .push_back(*values[p]);
    }
    return out;
}

}  // namespace

std::vector<double> principal_angles(const Matrix& basis_a, const Matrix& basis_b)
{
    if (basis_a.rows() != basis_b.rows())
        throw ContractViolation("principal_angles: bases live in different dimensions");
    if (basis_a.cols() == 0 || basis_b.cols() == 0)
        throw ContractViolation("principal_angles: empty basis");
    if (basis_a.cols() > basis_a.rows() || basis_b.cols() > basis_b.rows())
        throw ContractViolation("principal_angles: k exceeds the ambient dimension");
    require_orthonormal(basis_a, "basis_a");
    require_orthonormal(basis_b, "basis_b");
    const Matrix& a = basis_a.cols() >= basis_b.cols() ? basis_a : basis_b;
    const Matrix& b = basis_a.cols() >= basis_b.cols() ? basis_b : basis_a;

    // Cosines resolve large angles well, sines of the residual B - A A^T B
    // resolve small ones.
    const Matrix atb = matmul_tn(a, b, Exec::serial);
    auto cosines = singular_values(atb);
    Matrix resid = b;
    const Matrix proj = matmul(a, atb, Exec::serial);
    for (std::size_t i = 0; i < resid.rows(); ++i)
        for (std::size_t j = 0; j < resid.cols(); ++j)
            resid(i, j) -= proj(i, j);
    auto sines = singular_values(resid);
    std::sort(sines.begin(), sines.end());

    const std::size_t k = b.cols();
    std::vector<double> angles(k);
    for (std::size_t i = 0; i < k; ++i) {
        const double c = std::clamp(cosines[i], 0.0, 1.0);
        angles[i] = c * c >= 0.5 ? std::asin(std::clamp(sines[i], 0.0, 1.0)) : std::acos(c);
    }
    std::sort(angles.begin(), angles.end());
    return angles;
}

Matrix principal_subspace(const PointManifold& m, std::size_t k)
{
    if (k == 0 || k > m.dim())
        throw ContractViolation("principal_subspace: need 1 <= k <= dimension");
    if (k > m.m())
        throw ContractViolation("principal_subspace: k exceeds the number of points");
    const SvdResult d = svd(centered(m));
    return d.v.left_cols(k);
}

std::size_t default_subspace_rank(const PointManifold& m, double fraction, std::size_t cap)
{
    const auto s = singular_values(centered(m));
    double total = 0.0;
    for (double x : s)
        total += x * x;
    if (!(total > 0.0))
        throw DegenerateInput("default_subspace_rank: manifold has zero variance");
    double acc = 0.0;
    std::size_t k = 0;
    while (k < s.size() && acc < fraction * total) {
        acc += s[k] * s[k];
        ++k;
    }
    return std::max<std::size_t>(1, std::min(k, cap));
}

double shared_variance(const PointManifold& source, const PointManifold& target, std::size_t k)
{
    if (source.dim() != target.dim())
        throw ContractViolation("shared_variance: manifolds live in different dimensions");
    const Matrix x = centered(source);
    double total = 0.0;
    for (double v : x.data())
        total += v * v;
    if (!(total > 0.0))
        throw DegenerateInput("shared_variance: source manifold has zero variance");
    const Matrix p = principal_subspace(target, k);
    const Matrix xp = matmul(x, p, Exec::serial);
    double kept = 0.0;
    for (double v : xp.data())
        kept += v * v;
    return std::clamp(kept / total, 0.0, 1.0);
}

double SimilarityDistributions::mean_within() const { return mean_of(within_class); }
double SimilarityDistributions::mean_across() const { return mean_of(across_class); }

std::optional<double> cosine_similarity(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size())
        throw ContractViolation("cosine_similarity: length mismatch");
    const double na = norm2(a), nb = norm2(b);
    if (!(na > 0.0) || !(nb > 0.0))
        return std::nullopt;
    return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

SimilarityDistributions centroid_similarity_stats(const Matrix& centroids, std::span<const int> labels,
                                                  const CentroidSimilarityOptions& options)
{
    if (labels.size() != centroids.rows())
        throw ContractViolation("centroid_similarity_stats: one label per centroid required");
    require_groups(labels);
    Matrix c = centroids;
    if (options.center) {
        for (std::size_t j = 0; j < c.cols(); ++j) {
            double mean = 0.0;
            for (std::size_t i = 0; i < c.rows(); ++i)
                mean += c(i, j);
            mean /= static_cast<double>(c.rows());
            for (std::size_t i = 0; i < c.rows(); ++i)
                c(i, j) -= mean;
        }
    }
    const std::vector<int> lab(labels.begin(), labels.end());
    auto out = pairwise(lab, [&](std::size_t i, std::size_t j) -> std::optional<double> {
        auto s = cosine_similarity(c.row(i), c.row(j));
        if (s && options.absolute)
            *s = std::abs(*s);
        return s;
    });
    out.metric = std::string(options.absolute ? "abs_" : "") + "cosine";
    out.note = options.center ? "centroids centered by the mean centroid before comparison"
                              : "raw centroids";
    return out;
}

SimilarityDistributions centroid_similarity_stats(const ManifoldBatch& z, std::span<const int> labels,
                                                  const CentroidSimilarityOptions& options)
{
    return centroid_similarity_stats(centroids(z).transpose(), labels, options);
}

SimilarityDistributions subspace_angle_stats(const std::vector<PointManifold>& manifolds, std::size_t rank)
{
    std::vector<int> labels;
    for (const auto& m : manifolds)
        labels.push_back(label_of(m));
    require_groups(labels);
    std::vector<std::size_t> ranks;
    std::vector<Matrix> bases;
    for (const auto& m : manifolds) {
        const std::size_t k = rank ? rank : default_subspace_rank(m);
        ranks.push_back(k);
        bases.push_back(principal_subspace(m, k));
    }
    auto out = pairwise(labels, [&](std::size_t i, std::size_t j) -> std::optional<double> {
        const std::size_t k = std::min(ranks[i], ranks[j]);
        return mean_of(principal_angles(bases[i].left_cols(k), bases[j].left_cols(k)));
    });
    out.metric = "mean_principal_angle";
    out.note = rank ? "fixed subspace rank " + std::to_string(rank)
                    : std::string("rank per pair: smaller of the two 90%-variance ranks, capped at 10");
    return out;
}

SimilarityDistributions shared_variance_stats(const std::vector<PointManifold>& manifolds, std::size_t rank)
{
    std::vector<int> labels;
    std::vector<std::size_t> ranks;
    for (const auto& m : manifolds) {
        labels.push_back(label_of(m));
        ranks.push_back(rank ? rank : default_subspace_rank(m));
    }
    require_groups(labels);
    auto out = pairwise(labels, [&](std::size_t i, std::size_t j) -> std::optional<double> {
        const std::size_t k = std::min(ranks[i], ranks[j]);
        return 0.5 * (shared_variance(manifolds[i], manifolds[j], k) + shared_variance(manifolds[j], manifolds[i], k));
    });
    out.metric = "shared_variance";
    out.note = "average of both projection directions";
    return out;
}

std::vector<PointManifold> augmentation_manifolds(const MlpEncoder* encoder, const SceneDataset& ds,
                                                  std::span<const std::size_t> scenes, std::size_t k,
                                                  const AugmentationSpec& spec, const RngStream& rng,
                                                  bool normalize, Exec exec)
{
    if (k == 0)
        throw ContractViolation("augmentation_manifolds: k must be >= 1");
    Matrix views = augment_batch(ds, scenes, k, spec, rng, 0, exec);
    if (encoder)
        views = encoder->encode(views, exec);
    if (normalize) {
        for (std::size_t i = 0; i < views.rows(); ++i) {
            auto r = views.row(i);
            const double n = norm2(r);
            if (!(n > 1e-12))
                throw DegenerateInput("augmentation_manifolds: zero feature vector for scene " +
                                      std::to_string(scenes[i / k]));
            for (double& x : r)
                x /= n;
        }
    }
    std::vector<PointManifold> out;
    for (std::size_t s = 0; s < scenes.size(); ++s) {
        PointManifold m;
        m.points = views.block(s * k, 0, k, views.cols());
        m.label = ds.labels[scenes[s]];
        out.push_back(std::move(m));
    }
    return out;
}

std::vector<double> batch_gradient(const MlpEncoder& encoder, const SceneDataset& ds,
                                   std::span<const std::size_t> scenes, std::size_t k, double lambda,
                                   const AugmentationSpec& spec, const RngStream& rng, ParamGroup group, Exec exec)
{
    const Matrix views = augment_batch(ds, scenes, k, spec, rng, 0, exec);
    const auto bg = batch_loss_and_grads(encoder, views, scenes.size(), k, lambda, exec);
    return encoder.group_flat(bg.grads, group);
}

std::vector<SimilarityDistributions> gradient_coherence(const MlpEncoder& encoder, const SceneDataset& ds,
                                                        std::span<const std::size_t> pool,
                                                        const AugmentationSpec& spec, const CoherenceConfig& config,
                                                        RngStream& rng, Exec exec)
{
    if (config.batches_per_class == 0 || config.batch_b == 0 || config.views_k == 0)
        throw ContractViolation("gradient_coherence: batch counts and sizes must be >= 1");
    if (config.groups.empty())
        throw ContractViolation("gradient_coherence: no parameter groups");
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t idx : pool)
        by_class[ds.labels.at(idx)].push_back(idx);
    if (by_class.size() < 2)
        throw ContractViolation("gradient_coherence: need at least 2 classes");
    for (const auto& [label, members] : by_class)
        if (members.size() < config.batch_b)
            throw ContractViolation("gradient_coherence: class " + std::to_string(label) + " has " +
                                    std::to_string(members.size()) + " scenes, fewer than the batch size");

    std::vector<std::vector<std::size_t>> batches;
    std::vector<int> labels;
    for (const auto& [label, members] : by_class)
        for (std::size_t i = 0; i < config.batches_per_class; ++i) {
            std::vector<std::size_t> b;
            for (std::size_t j : rng.sample_indices(members.size(), config.batch_b))
                b.push_back(members[j]);
            batches.push_back(std::move(b));
            labels.push_back(label);
        }
    const RngStream aug(rng.next_u64());

    std::vector<ParamGrads> grads;
    for (std::size_t i = 0; i < batches.size(); ++i) {
        const Matrix views = augment_batch(ds, batches[i], config.views_k, spec, aug.derive(i), 0, exec);
        grads.push_back(
            batch_loss_and_grads(encoder, views, config.batch_b, config.views_k, config.lambda, exec).grads);
    }

    std::vector<SimilarityDistributions> out;
    for (ParamGroup g : config.groups) {
        std::vector<std::vector<double>> flat;
        for (const auto& gr : grads)
            flat.push_back(encoder.group_flat(gr, g));
        auto d = pairwise(labels, [&](std::size_t i, std::size_t j) { return cosine_similarity(flat[i], flat[j]); });
        d.metric = "gradient_cosine:" + to_string(g);
        d.note = "lambda " + std::to_string(config.lambda) + ", B " + std::to_string(config.batch_b) + ", K " +
                 std::to_string(config.views_k);
        out.push_back(std::move(d));
    }
    return out;
}

std::string similarity_json(const SimilarityDistributions& s, int indent)
{
    nlohmann::ordered_json j;
    j["metric"] = s.metric;
    j["note"] = s.note;
    j["excluded"] = s.excluded;
    j["mean_within_class"] = s.mean_within();
    j["mean_across_class"] = s.mean_across();
    j["within_class"] = s.within_class;
    j["across_class"] = s.across_class;
    return j.dump(indent);
}

}  // namespace mmcr
