#pragma once

#include "mmcr/linalg.hpp"
#include "mmcr/matrix.hpp"
#include "mmcr/rng.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace mmcr {

/// Per-layer parameter gradients (or any parameter-shaped quantity such as
/// optimizer moments). Layout: for each layer, weights row-major then bias.
struct ParamGrads {
    std::vector<Matrix> w;                // out x in
    std::vector<std::vector<double>> b;   // out

    std::size_t size() const;
    std::vector<double> flat() const;
    void set_zero();
};

enum class ParamGroup { all, backbone, projector, first_layer, last_layer };
ParamGroup parse_param_group(const std::string& name);
std::string to_string(ParamGroup g);

struct ForwardCache {
    std::uint64_t version = 0;         // encoder version the cache was built against
    std::vector<Matrix> activations;   // activations[0] = input, activations[L] = output
    std::vector<Matrix> preact;        // preact[l] = activations[l] W_l^T + b_l

    const Matrix& output() const { return activations.back(); }
};

/// Fully connected ReLU network with a linear output layer. Rows of every
/// input matrix are samples. The last `projector_layers` layers form the
/// projector group, the rest the backbone.
class MlpEncoder {
public:
    MlpEncoder() = default;
    /// Weights and biases ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
    MlpEncoder(std::vector<std::size_t> layer_dims, RngStream& rng, std::size_t projector_layers = 1);
    /// Explicit parameters; used by tests and checkpoint loading.
    MlpEncoder(std::vector<Matrix> weights, std::vector<std::vector<double>> biases, std::size_t projector_layers = 1);

    const std::vector<std::size_t>& layer_dims() const noexcept { return dims_; }
    std::size_t n_layers() const noexcept { return w_.size(); }
    std::size_t input_dim() const noexcept { return dims_.front(); }
    std::size_t output_dim() const noexcept { return dims_.back(); }
    std::size_t projector_layers() const noexcept { return projector_layers_; }
    std::size_t parameter_count() const;
    /// Bumped on every parameter mutation; caches from older versions are stale.
    std::uint64_t version() const noexcept { return version_; }

    const Matrix& weight(std::size_t l) const { return w_.at(l); }
    const std::vector<double>& bias(std::size_t l) const { return b_.at(l); }

    double parameter(std::size_t flat_index) const;
    void set_parameter(std::size_t flat_index, double value);
    std::vector<double> flat_parameters() const;

    ForwardCache forward(const Matrix& x, Exec exec = Exec::parallel) const;
    Matrix encode(const Matrix& x, Exec exec = Exec::parallel) const { return forward(x, exec).output(); }

    /// Parameter gradients for upstream gradient `d_out` (same shape as the
    /// output). When `d_input` is non-null it receives d loss / d input.
    ParamGrads backward(const ForwardCache& cache, const Matrix& d_out, Matrix* d_input = nullptr,
                        Exec exec = Exec::parallel) const;

    ParamGrads zeros_like() const;
    /// Flattened gradient restricted to a parameter group, in layout order.
    std::vector<double> group_flat(const ParamGrads& g, ParamGroup group) const;

    /// In-place `p += scale * delta` over every parameter.
    void apply_update(const ParamGrads& delta, double scale);

    /// Compares architecture and parameters, not the version counter.
    friend bool operator==(const MlpEncoder& a, const MlpEncoder& b);

private:
    friend void write_checkpoint(std::ostream&, const MlpEncoder&);
    std::vector<std::size_t> dims_;
    std::vector<Matrix> w_;
    std::vector<std::vector<double>> b_;
    std::size_t projector_layers_ = 1;
    std::uint64_t version_ = 0;

    void bump() noexcept { ++version_; }
    bool in_group(std::size_t layer, ParamGroup g) const;
};

/// Adam with bias correction; weight decay enters as an L2 gradient term.
struct AdamState {
    ParamGrads m, v;
    std::uint64_t step = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

inline constexpr double kDefaultLearningRate = 1e-3;
inline constexpr double kDefaultWeightDecay = 1e-6;

AdamState make_adam(const MlpEncoder& enc);
void optimizer_step(MlpEncoder& enc, AdamState& adam, const ParamGrads& grads, double lr = kDefaultLearningRate,
                    double weight_decay = kDefaultWeightDecay);

// Checkpoint: u64 layer count L, u64 projector layer count, L+1 u64 dims,
// then per layer the weight block (out*in f64, row-major) and the bias block.
void write_checkpoint(std::ostream& os, const MlpEncoder& enc);
MlpEncoder read_checkpoint(std::istream& is);

}  // namespace mmcr
