#pragma once

#include "mmcr/encoder.hpp"
#include "mmcr/matrix.hpp"

#include <iosfwd>
#include <vector>

namespace mmcr {

/// Affine classifier: scores = features * weights^T + bias.
struct LinearProbe {
    Matrix weights;             // n_classes x d
    std::vector<double> bias;   // n_classes

    std::size_t n_classes() const noexcept { return bias.size(); }
    Matrix scores(const Matrix& features) const;
    std::vector<int> predict(const Matrix& features) const;
    double accuracy(const Matrix& features, const std::vector<int>& labels) const;
};

inline constexpr std::size_t kDefaultProbeEpochs = 200;
inline constexpr double kDefaultProbeLr = 0.5;

/// Multinomial logistic regression by full-batch gradient descent from zero
/// weights. Features are centered and divided by one pooled standard
/// deviation, then the transform is folded into the returned weights, so the
/// fit commutes with orthogonal transforms of the features. When `loss_trace`
/// is given it receives the training cross-entropy before each step and after
/// the last one.
LinearProbe fit_probe(const Matrix& features, const std::vector<int>& labels, std::size_t epochs = kDefaultProbeEpochs,
                      double lr = kDefaultProbeLr, std::vector<double>* loss_trace = nullptr);

/// Mean cross-entropy of the probe on (features, labels).
double cross_entropy(const LinearProbe& probe, const Matrix& features, const std::vector<int>& labels);

inline constexpr std::size_t kDefaultKnnK = 20;

/// Majority vote among the k training features with the highest cosine
/// similarity; equal similarities keep training order, equal votes go to
/// the smaller class index. Returns test accuracy.
double knn_monitor(const Matrix& train_features, const std::vector<int>& train_labels, const Matrix& test_features,
                   const std::vector<int>& test_labels, std::size_t k = kDefaultKnnK);

struct AttackConfig {
    double epsilon = 0.0;
    double step_size = -1.0;  // negative: 2.5 * epsilon / iterations
    std::size_t iterations = 20;
    bool random_start = true;
    std::uint64_t seed = 0;

    double effective_step() const;
};

/// Gradient of the probe cross-entropy with respect to the encoder input, one row per sample.
Matrix input_gradient(const MlpEncoder& enc, const LinearProbe& probe, const Matrix& x, const std::vector<int>& y,
                      Exec exec = Exec::parallel);

/// L-infinity PGD on cross-entropy of probe(encoder(x)). Row i's random start
/// draws from RngStream(cfg.seed).derive(i). Every output row satisfies
/// max |x' - x| <= epsilon exactly.
Matrix pgd_attack(const MlpEncoder& enc, const LinearProbe& probe, const Matrix& x, const std::vector<int>& y,
                  const AttackConfig& cfg, Exec exec = Exec::parallel);

struct RobustnessPoint {
    double epsilon = 0.0;
    std::size_t iterations = 0;
    std::size_t n = 0;
    double clean_acc = 0.0;
    double robust_acc = 0.0;
    std::uint64_t seed = 0;
};

/// One point per epsilon (ascending, first must be 0) at cfg.iterations.
std::vector<RobustnessPoint> robustness_curve(const MlpEncoder& enc, const LinearProbe& probe, const Matrix& x,
                                              const std::vector<int>& y, const std::vector<double>& epsilons,
                                              const AttackConfig& cfg, Exec exec = Exec::parallel);
/// Robust accuracy at fixed cfg.epsilon for each iteration count.
std::vector<RobustnessPoint> iteration_sweep(const MlpEncoder& enc, const LinearProbe& probe, const Matrix& x,
                                             const std::vector<int>& y, const std::vector<std::size_t>& iterations,
                                             const AttackConfig& cfg, Exec exec = Exec::parallel);

/// Header: epsilon,iterations,n,clean_acc,robust_acc,seed
void write_robustness_csv(std::ostream& os, const std::vector<RobustnessPoint>& points);

}  // namespace mmcr
