#include "mmcr/trainer.hpp"

#include "mmcr/error.hpp"
#include "mmcr/parallel.hpp"

#include "json.hpp"

#include <ostream>
#include <string>

namespace mmcr {

TrainState make_train_state(MlpEncoder encoder, std::uint64_t seed)
{
    TrainState s{std::move(encoder), {}, RngStream(seed), 0, {}};
    s.adam = make_adam(s.encoder);
    return s;
}

BatchGradient batch_loss_and_grads(const MlpEncoder& enc, const Matrix& views, std::size_t b, std::size_t k,
                                   double lambda, Exec exec)
{
    const ForwardCache cache = enc.forward(views, exec);
    const ManifoldBatch raw = ManifoldBatch::from_rows(cache.output(), b, k);
    LossAndGradient lg = mmcr_loss_and_grad(raw, lambda, exec);
    const Matrix d_out(b * k, enc.output_dim(), std::vector<double>(lg.grad.values().begin(), lg.grad.values().end()));
    BatchGradient out{lg.loss, enc.backward(cache, d_out, nullptr, exec), sphere_normalize(raw)};
    return out;
}

Matrix augment_batch(const SceneDataset& ds, std::span<const std::size_t> scenes, std::size_t k,
                     const AugmentationSpec& spec, const RngStream& base, std::uint64_t first_key, Exec exec)
{
    const std::size_t dim = ds.x.cols();
    Matrix out(scenes.size() * k, dim);
    parallel_for(scenes.size(), exec, [&](std::size_t i) {
        RngStream rng = base.derive(first_key + i);
        const std::size_t s = scenes[i];
        const Matrix v = augment(ds.x.row(s), k, spec, rng, &ds.frames.at(ds.labels[s]));
        std::copy(v.data().begin(), v.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(i * k * dim));
    });
    return out;
}

void train(TrainState& state, const SceneDataset& ds, std::span<const std::size_t> train_idx,
           const AugmentationSpec& spec, const TrainConfig& cfg, const EpochCallback& on_epoch)
{
    if (cfg.batch_b < 2)
        throw ContractViolation("train: batch_b must be >= 2");
    if (cfg.views_k < 1)
        throw ContractViolation("train: views_k must be >= 1");
    if (train_idx.size() < cfg.batch_b)
        throw ContractViolation("train: fewer training scenes than batch_b");

    std::vector<std::size_t> order(train_idx.begin(), train_idx.end());
    const std::size_t n_batches = order.size() / cfg.batch_b;
    for (std::size_t e = 0; e < cfg.epochs; ++e) {
        state.rng.shuffle(order);
        EpochRecord rec;
        rec.epoch = state.history.size();
        rec.loss.lambda = cfg.lambda;
        for (std::size_t bi = 0; bi < n_batches; ++bi) {
            const std::span<const std::size_t> scenes(order.data() + bi * cfg.batch_b, cfg.batch_b);
            const Matrix views =
                augment_batch(ds, scenes, cfg.views_k, spec, state.rng, state.augment_draws, cfg.exec);
            state.augment_draws += cfg.batch_b;
            BatchGradient bg;
            try {
                bg = batch_loss_and_grads(state.encoder, views, cfg.batch_b, cfg.views_k, cfg.lambda, cfg.exec);
            } catch (const DegenerateInput& err) {
                throw DegenerateInput("epoch " + std::to_string(rec.epoch) + ", batch " + std::to_string(bi) + ": " +
                                      err.what());
            }
            if (cfg.lambda == 0.0)
                bg.loss.compression_term = mmcr_loss_full(bg.z, 0.0, cfg.exec).compression_term;
            optimizer_step(state.encoder, state.adam, bg.grads, cfg.lr, cfg.weight_decay);

            rec.loss.total += bg.loss.total;
            rec.loss.centroid_term += bg.loss.centroid_term;
            rec.loss.compression_term += bg.loss.compression_term;
            rec.centroid_norm_mean += mean_centroid_norm(bg.z);
            rec.centroid_similarity_mean += mean_centroid_similarity(bg.z);
            rec.within_manifold_similarity += mean_within_manifold_similarity(bg.z);
        }
        const double inv = 1.0 / static_cast<double>(n_batches);
        rec.loss.total *= inv;
        rec.loss.centroid_term *= inv;
        rec.loss.compression_term *= inv;
        rec.centroid_norm_mean *= inv;
        rec.centroid_similarity_mean *= inv;
        rec.within_manifold_similarity *= inv;
        state.history.push_back(rec);
        if (on_epoch)
            on_epoch(state);
    }
}

double evaluate_within_manifold_similarity(const MlpEncoder& enc, const SceneDataset& ds,
                                           std::span<const std::size_t> scenes, std::size_t k,
                                           const AugmentationSpec& spec, const RngStream& rng)
{
    const Matrix views = augment_batch(ds, scenes, k, spec, rng, 0);
    const auto z = sphere_normalize(ManifoldBatch::from_rows(enc.encode(views), scenes.size(), k));
    return mean_within_manifold_similarity(z);
}

void write_history_jsonl(std::ostream& os, const std::vector<EpochRecord>& history)
{
    for (const auto& r : history) {
        nlohmann::ordered_json j;
        j["epoch"] = r.epoch;
        j["loss_total"] = r.loss.total;
        j["centroid_term"] = r.loss.centroid_term;
        j["compression_term"] = r.loss.compression_term;
        j["lambda"] = r.loss.lambda;
        j["centroid_norm_mean"] = r.centroid_norm_mean;
        j["centroid_similarity_mean"] = r.centroid_similarity_mean;
        j["within_manifold_similarity"] = r.within_manifold_similarity;
        os << j.dump() << '\n';
    }
}

}  // namespace mmcr
