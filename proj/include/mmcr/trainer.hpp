#pragma once

#include "mmcr/data.hpp"
#include "mmcr/encoder.hpp"
#include "mmcr/objective.hpp"

#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

namespace mmcr {

struct TrainConfig {
    std::size_t epochs = 100;
    std::size_t batch_b = 32;
    std::size_t views_k = 8;
    double lambda = 0.0;
    double lr = kDefaultLearningRate;
    double weight_decay = kDefaultWeightDecay;
    Exec exec = Exec::parallel;
};

/// Per-epoch means over the epoch's batches.
struct EpochRecord {
    std::size_t epoch = 0;
    LossBreakdown loss;  // compression_term is evaluated even when lambda == 0
    double centroid_norm_mean = 0.0;
    double centroid_similarity_mean = 0.0;
    double within_manifold_similarity = 0.0;
};

struct TrainState {
    MlpEncoder encoder;
    AdamState adam;
    RngStream rng;
    std::uint64_t augment_draws = 0;  // keys the per-scene augmentation streams
    std::vector<EpochRecord> history;
};

TrainState make_train_state(MlpEncoder encoder, std::uint64_t seed);

struct BatchGradient {
    LossBreakdown loss;
    ParamGrads grads;
    ManifoldBatch z;  // normalized features
};

/// Encoder forward on B*K stacked views (manifold-major rows), MMCR loss and
/// the parameter gradient of the loss through the encoder.
BatchGradient batch_loss_and_grads(const MlpEncoder& enc, const Matrix& views, std::size_t b, std::size_t k,
                                   double lambda, Exec exec = Exec::parallel);

/// Stacks K augmentations of each listed scene, manifold-major. Each scene
/// draws from its own stream `base.derive(first_key + i)`.
Matrix augment_batch(const SceneDataset& ds, std::span<const std::size_t> scenes, std::size_t k,
                     const AugmentationSpec& spec, const RngStream& base, std::uint64_t first_key,
                     Exec exec = Exec::parallel);

using EpochCallback = std::function<void(const TrainState&)>;

/// Runs `cfg.epochs` epochs of shuffled, drop-last minibatches over `train_idx`.
/// Appends one EpochRecord per epoch.
void train(TrainState& state, const SceneDataset& ds, std::span<const std::size_t> train_idx,
           const AugmentationSpec& spec, const TrainConfig& cfg, const EpochCallback& on_epoch = {});

/// Mean within-manifold cosine similarity of the encoder's normalized
/// outputs on K fresh augmentations of each listed scene.
double evaluate_within_manifold_similarity(const MlpEncoder& enc, const SceneDataset& ds,
                                           std::span<const std::size_t> scenes, std::size_t k,
                                           const AugmentationSpec& spec, const RngStream& rng);

/// One JSON object per line with the EpochRecord fields.
void write_history_jsonl(std::ostream& os, const std::vector<EpochRecord>& history);

}  // namespace mmcr
