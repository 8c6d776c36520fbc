#include "mmcr/encoder.hpp"

#include "mmcr/error.hpp"

#include <cmath>
#include <istream>
#include <ostream>

namespace mmcr {

std::size_t ParamGrads::size() const
{
    std::size_t n = 0;
    for (std::size_t l = 0; l < w.size(); ++l)
        n += w[l].size() + b[l].size();
    return n;
}

std::vector<double> ParamGrads::flat() const
{
    std::vector<double> out;
    out.reserve(size());
    for (std::size_t l = 0; l < w.size(); ++l) {
        out.insert(out.end(), w[l].data().begin(), w[l].data().end());
        out.insert(out.end(), b[l].begin(), b[l].end());
    }
    return out;
}

void ParamGrads::set_zero()
{
    for (auto& m : w)
        for (double& x : m.data())
            x = 0.0;
    for (auto& v : b)
        for (double& x : v)
            x = 0.0;
}

ParamGroup parse_param_group(const std::string& name)
{
    if (name == "all")
        return ParamGroup::all;
    if (name == "backbone")
        return ParamGroup::backbone;
    if (name == "projector")
        return ParamGroup::projector;
    if (name == "first_layer")
        return ParamGroup::first_layer;
    if (name == "last_layer")
        return ParamGroup::last_layer;
    throw ConfigError("unknown parameter group '" + name +
                      "' (expected all, backbone, projector, first_layer, last_layer)");
}

std::string to_string(ParamGroup g)
{
    switch (g) {
    case ParamGroup::all: return "all";
    case ParamGroup::backbone: return "backbone";
    case ParamGroup::projector: return "projector";
    case ParamGroup::first_layer: return "first_layer";
    case ParamGroup::last_layer: return "last_layer";
    }
    return "all";
}

MlpEncoder::MlpEncoder(std::vector<std::size_t> layer_dims, RngStream& rng, std::size_t projector_layers)
    : dims_(std::move(layer_dims)), projector_layers_(projector_layers)
{
    if (dims_.size() < 2)
        throw ContractViolation("MlpEncoder needs at least an input and an output width");
    for (std::size_t d : dims_)
        if (d == 0)
            throw ContractViolation("MlpEncoder layer widths must be positive");
    if (projector_layers_ > dims_.size() - 1)
        throw ContractViolation("MlpEncoder: projector_layers exceeds layer count");
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
        const std::size_t in = dims_[l], out = dims_[l + 1];
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        Matrix w(out, in);
        for (double& x : w.data())
            x = rng.uniform(-bound, bound);
        std::vector<double> b(out);
        for (double& x : b)
            x = rng.uniform(-bound, bound);
        w_.push_back(std::move(w));
        b_.push_back(std::move(b));
    }
}

MlpEncoder::MlpEncoder(std::vector<Matrix> weights, std::vector<std::vector<double>> biases,
                       std::size_t projector_layers)
    : w_(std::move(weights)), b_(std::move(biases)), projector_layers_(projector_layers)
{
    if (w_.empty() || w_.size() != b_.size())
        throw ContractViolation("MlpEncoder: need one bias vector per weight matrix");
    if (projector_layers_ > w_.size())
        throw ContractViolation("MlpEncoder: projector_layers exceeds layer count");
    dims_.push_back(w_[0].cols());
    for (std::size_t l = 0; l < w_.size(); ++l) {
        if (w_[l].cols() != dims_.back() || b_[l].size() != w_[l].rows() || w_[l].rows() == 0)
            throw ContractViolation("MlpEncoder: layer " + std::to_string(l) + " shape mismatch");
        for (double x : b_[l])
            if (!std::isfinite(x))
                throw ContractViolation("MlpEncoder: non-finite bias");
        dims_.push_back(w_[l].rows());
    }
}

bool operator==(const MlpEncoder& a, const MlpEncoder& b)
{
    return a.dims_ == b.dims_ && a.w_ == b.w_ && a.b_ == b.b_ && a.projector_layers_ == b.projector_layers_;
}

std::size_t MlpEncoder::parameter_count() const
{
    std::size_t n = 0;
    for (std::size_t l = 0; l < w_.size(); ++l)
        n += w_[l].size() + b_[l].size();
    return n;
}

double MlpEncoder::parameter(std::size_t i) const
{
    for (std::size_t l = 0; l < w_.size(); ++l) {
        if (i < w_[l].size())
            return w_[l].data()[i];
        i -= w_[l].size();
        if (i < b_[l].size())
            return b_[l][i];
        i -= b_[l].size();
    }
    throw ContractViolation("parameter index out of range");
}

void MlpEncoder::set_parameter(std::size_t i, double value)
{
    bump();
    for (std::size_t l = 0; l < w_.size(); ++l) {
        if (i < w_[l].size()) {
            w_[l].data()[i] = value;
            return;
        }
        i -= w_[l].size();
        if (i < b_[l].size()) {
            b_[l][i] = value;
            return;
        }
        i -= b_[l].size();
    }
    throw ContractViolation("parameter index out of range");
}

std::vector<double> MlpEncoder::flat_parameters() const
{
    ParamGrads p{w_, b_};
    return p.flat();
}

ForwardCache MlpEncoder::forward(const Matrix& x, Exec exec) const
{
    if (x.cols() != input_dim())
        throw ContractViolation("forward: input width " + std::to_string(x.cols()) + " != " +
                                std::to_string(input_dim()));
    ForwardCache cache;
    cache.version = version_;
    cache.activations.reserve(w_.size() + 1);
    cache.activations.push_back(x);
    for (std::size_t l = 0; l < w_.size(); ++l) {
        Matrix z = matmul_nt(cache.activations.back(), w_[l], exec);
        for (std::size_t r = 0; r < z.rows(); ++r) {
            auto row = z.row(r);
            for (std::size_t j = 0; j < row.size(); ++j)
                row[j] += b_[l][j];
        }
        Matrix a = z;
        if (l + 1 < w_.size())
            for (double& v : a.data())
                v = v > 0.0 ? v : 0.0;
        cache.preact.push_back(std::move(z));
        cache.activations.push_back(std::move(a));
    }
    return cache;
}

ParamGrads MlpEncoder::backward(const ForwardCache& cache, const Matrix& d_out, Matrix* d_input, Exec exec) const
{
    if (cache.version != version_ || cache.preact.size() != w_.size())
        throw ContractViolation("backward: stale forward cache (parameters changed since forward)");
    if (d_out.rows() != cache.output().rows() || d_out.cols() != output_dim())
        throw ContractViolation("backward: upstream gradient shape mismatch");
    ParamGrads g;
    g.w.resize(w_.size());
    g.b.resize(w_.size());
    Matrix delta = d_out;  // d loss / d preact of the current layer
    for (std::size_t l = w_.size(); l-- > 0;) {
        if (l + 1 < w_.size()) {
            const Matrix& z = cache.preact[l];
            for (std::size_t i = 0; i < delta.size(); ++i)
                if (!(z.data()[i] > 0.0))
                    delta.data()[i] = 0.0;
        }
        g.w[l] = matmul_tn(delta, cache.activations[l], exec);
        g.b[l].assign(delta.cols(), 0.0);
        for (std::size_t r = 0; r < delta.rows(); ++r) {
            const auto row = delta.row(r);
            for (std::size_t j = 0; j < row.size(); ++j)
                g.b[l][j] += row[j];
        }
        if (l > 0 || d_input)
            delta = matmul(delta, w_[l], exec);
    }
    if (d_input)
        *d_input = std::move(delta);
    return g;
}

ParamGrads MlpEncoder::zeros_like() const
{
    ParamGrads g;
    for (std::size_t l = 0; l < w_.size(); ++l) {
        g.w.emplace_back(w_[l].rows(), w_[l].cols());
        g.b.emplace_back(b_[l].size(), 0.0);
    }
    return g;
}

bool MlpEncoder::in_group(std::size_t layer, ParamGroup g) const
{
    const std::size_t n_backbone = w_.size() - projector_layers_;
    switch (g) {
    case ParamGroup::all: return true;
    case ParamGroup::backbone: return layer < n_backbone;
    case ParamGroup::projector: return layer >= n_backbone;
    case ParamGroup::first_layer: return layer == 0;
    case ParamGroup::last_layer: return layer + 1 == w_.size();
    }
    return false;
}

std::vector<double> MlpEncoder::group_flat(const ParamGrads& g, ParamGroup group) const
{
    std::vector<double> out;
    for (std::size_t l = 0; l < g.w.size(); ++l) {
        if (!in_group(l, group))
            continue;
        out.insert(out.end(), g.w[l].data().begin(), g.w[l].data().end());
        out.insert(out.end(), g.b[l].begin(), g.b[l].end());
    }
    return out;
}

void MlpEncoder::apply_update(const ParamGrads& delta, double scale)
{
    if (delta.w.size() != w_.size())
        throw ContractViolation("apply_update: layer count mismatch");
    for (std::size_t l = 0; l < w_.size(); ++l) {
        if (!delta.w[l].same_shape(w_[l]) || delta.b[l].size() != b_[l].size())
            throw ContractViolation("apply_update: shape mismatch at layer " + std::to_string(l));
        for (std::size_t i = 0; i < w_[l].size(); ++i)
            w_[l].data()[i] += scale * delta.w[l].data()[i];
        for (std::size_t i = 0; i < b_[l].size(); ++i)
            b_[l][i] += scale * delta.b[l][i];
    }
    bump();
}

AdamState make_adam(const MlpEncoder& enc)
{
    AdamState s;
    s.m = enc.zeros_like();
    s.v = enc.zeros_like();
    return s;
}

void optimizer_step(MlpEncoder& enc, AdamState& adam, const ParamGrads& grads, double lr, double weight_decay)
{
    const std::size_t nl = enc.n_layers();
    if (grads.w.size() != nl || adam.m.w.size() != nl)
        throw ContractViolation("optimizer_step: gradient layer count mismatch");
    for (std::size_t l = 0; l < nl; ++l)
        if (!grads.w[l].same_shape(enc.weight(l)) || grads.b[l].size() != enc.bias(l).size())
            throw ContractViolation("optimizer_step: gradient shape mismatch at layer " + std::to_string(l));

    ++adam.step;
    const double c1 = 1.0 - std::pow(adam.beta1, static_cast<double>(adam.step));
    const double c2 = 1.0 - std::pow(adam.beta2, static_cast<double>(adam.step));
    ParamGrads delta = enc.zeros_like();
    const auto update = [&](double p, double g, double& m, double& v) {
        g += weight_decay * p;
        m = adam.beta1 * m + (1.0 - adam.beta1) * g;
        v = adam.beta2 * v + (1.0 - adam.beta2) * g * g;
        return (m / c1) / (std::sqrt(v / c2) + adam.eps);
    };
    for (std::size_t l = 0; l < nl; ++l) {
        const Matrix& w = enc.weight(l);
        for (std::size_t i = 0; i < w.size(); ++i)
            delta.w[l].data()[i] = update(w.data()[i], grads.w[l].data()[i], adam.m.w[l].data()[i], adam.v.w[l].data()[i]);
        const auto& b = enc.bias(l);
        for (std::size_t i = 0; i < b.size(); ++i)
            delta.b[l][i] = update(b[i], grads.b[l][i], adam.m.b[l][i], adam.v.b[l][i]);
    }
    enc.apply_update(delta, -lr);
}

void write_checkpoint(std::ostream& os, const MlpEncoder& enc)
{
    io::put_u64(os, enc.n_layers());
    io::put_u64(os, enc.projector_layers_);
    for (std::size_t d : enc.dims_)
        io::put_u64(os, d);
    for (std::size_t l = 0; l < enc.n_layers(); ++l) {
        for (double v : enc.w_[l].data())
            io::put_f64(os, v);
        for (double v : enc.b_[l])
            io::put_f64(os, v);
    }
}

MlpEncoder read_checkpoint(std::istream& is)
{
    const auto nl = io::get_u64(is);
    const auto proj = io::get_u64(is);
    if (nl == 0 || nl > 1024)
        throw IoError("checkpoint: implausible layer count");
    std::vector<std::size_t> dims(nl + 1);
    for (auto& d : dims) {
        d = io::get_u64(is);
        if (d == 0 || d > (1u << 20))
            throw IoError("checkpoint: implausible layer width");
    }
    std::vector<Matrix> w;
    std::vector<std::vector<double>> b;
    for (std::size_t l = 0; l < nl; ++l) {
        std::vector<double> wv(dims[l + 1] * dims[l]);
        for (double& v : wv)
            v = io::get_f64(is);
        std::vector<double> bv(dims[l + 1]);
        for (double& v : bv)
            v = io::get_f64(is);
        try {
            w.emplace_back(dims[l + 1], dims[l], std::move(wv));
        } catch (const Error& e) {
            throw IoError(std::string("checkpoint: ") + e.what());
        }
        b.push_back(std::move(bv));
    }
    return MlpEncoder(std::move(w), std::move(b), proj);
}

}  // namespace mmcr
