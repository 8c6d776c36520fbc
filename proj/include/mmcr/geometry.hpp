#pragma once

#include "mmcr/capacity.hpp"
#include "mmcr/data.hpp"
#include "mmcr/encoder.hpp"
#include "mmcr/matrix.hpp"
#include "mmcr/objective.hpp"
#include "mmcr/rng.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mmcr {

/// Principal angles (radians, ascending) between the column spans of two
/// orthonormal d x k bases. Throws ContractViolation if either basis is not
/// orthonormal to 1e-9 or the row counts differ.
std::vector<double> principal_angles(const Matrix& basis_a, const Matrix& basis_b);

/// Top-k principal directions (d x k) of the centered points.
Matrix principal_subspace(const PointManifold& m, std::size_t k);

/// Smallest k whose components explain `fraction` of the variance, capped.
std::size_t default_subspace_rank(const PointManifold& m, double fraction = 0.9, std::size_t cap = 10);

/// Fraction of the centered source variance preserved by projection onto the
/// top-k principal subspace of the centered target.
double shared_variance(const PointManifold& source, const PointManifold& target, std::size_t k);

struct SimilarityDistributions {
    std::string metric;
    std::vector<double> within_class;
    std::vector<double> across_class;
    std::size_t excluded = 0;  // pairs dropped for a zero-norm vector
    std::string note;

    double mean_within() const;
    double mean_across() const;
};

/// Cosine similarity, or nothing when either vector has zero norm.
std::optional<double> cosine_similarity(std::span<const double> a, std::span<const double> b);

struct CentroidSimilarityOptions {
    bool center = false;    // subtract the mean centroid before comparing
    bool absolute = false;  // |cos|, so opposite directions count as aligned
};

/// Pairwise centroid similarities split by same-class and cross-class pairs.
/// Rows of `centroids` are manifold centroids. Needs >= 2 classes and >= 2
/// manifolds in some class.
SimilarityDistributions centroid_similarity_stats(const Matrix& centroids, std::span<const int> labels,
                                                  const CentroidSimilarityOptions& options = {});
/// Centroids of each manifold of `z` (features already normalized or not).
SimilarityDistributions centroid_similarity_stats(const ManifoldBatch& z, std::span<const int> labels,
                                                  const CentroidSimilarityOptions& options = {});

/// Mean principal angle between the principal subspaces of every pair of
/// manifolds. `rank` 0 picks default_subspace_rank per pair (the smaller of the two).
SimilarityDistributions subspace_angle_stats(const std::vector<PointManifold>& manifolds, std::size_t rank = 0);
/// Shared variance for every pair, averaged over both directions.
SimilarityDistributions shared_variance_stats(const std::vector<PointManifold>& manifolds, std::size_t rank = 0);

/// K augmentations of each scene, passed through the encoder (or left in input
/// space when `encoder` is null) and optionally normalized to the sphere. One
/// labelled manifold per scene.
std::vector<PointManifold> augmentation_manifolds(const MlpEncoder* encoder, const SceneDataset& ds,
                                                  std::span<const std::size_t> scenes, std::size_t k,
                                                  const AugmentationSpec& spec, const RngStream& rng,
                                                  bool normalize, Exec exec = Exec::parallel);

struct CoherenceConfig {
    std::size_t batches_per_class = 10;
    std::size_t batch_b = 8;
    std::size_t views_k = 4;
    double lambda = 0.0;
    std::vector<ParamGroup> groups{ParamGroup::all};
};

/// Flattened loss gradient (restricted to `group`) of one batch built from
/// the listed scenes, at the encoder's current parameters.
std::vector<double> batch_gradient(const MlpEncoder& encoder, const SceneDataset& ds,
                                   std::span<const std::size_t> scenes, std::size_t k, double lambda,
                                   const AugmentationSpec& spec, const RngStream& rng, ParamGroup group,
                                   Exec exec = Exec::parallel);

/// Single-class batches drawn from `pool`; pairwise gradient cosines grouped
/// by same-class and cross-class pairs. One result per parameter group.
std::vector<SimilarityDistributions> gradient_coherence(const MlpEncoder& encoder, const SceneDataset& ds,
                                                        std::span<const std::size_t> pool,
                                                        const AugmentationSpec& spec, const CoherenceConfig& config,
                                                        RngStream& rng, Exec exec = Exec::parallel);

std::string similarity_json(const SimilarityDistributions& s, int indent = 2);

}  // namespace mmcr
