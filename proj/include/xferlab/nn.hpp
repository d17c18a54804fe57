#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "autodiff.hpp"
#include "common.hpp"
#include "rng.hpp"

namespace xferlab {

enum class Activation { Relu, Tanh, Identity };

inline const char* activation_name(Activation a) {
    switch (a) {
        case Activation::Relu: return "relu";
        case Activation::Tanh: return "tanh";
        case Activation::Identity: return "identity";
    }
    return "?";
}

inline Activation activation_from_name(const std::string& s) {
    if (s == "relu") return Activation::Relu;
    if (s == "tanh") return Activation::Tanh;
    if (s == "identity") return Activation::Identity;
    throw Error(ErrorCode::ConfigBadValue, "unknown activation: " + s);
}

/// Fully connected network. weights[l] is (layer_sizes[l] x layer_sizes[l+1]);
/// the output layer is always linear.
struct MlpParams {
    std::vector<std::size_t> layer_sizes;
    std::vector<Mat> weights;
    std::vector<Mat> biases;
    std::vector<Activation> activations;  // one per weight layer; last is Identity

    std::size_t n_layers() const { return weights.size(); }
    std::size_t in_dim() const { return layer_sizes.front(); }
    std::size_t out_dim() const { return layer_sizes.back(); }

    std::size_t param_count() const {
        std::size_t n = 0;
        for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
        return n;
    }
};

/// Glorot-uniform initialization; biases start at zero.
inline MlpParams mlp_init(const std::vector<std::size_t>& layer_sizes, Activation hidden, Rng& rng) {
    require(layer_sizes.size() >= 2, ErrorCode::Precondition, "mlp needs >= 2 layer sizes");
    MlpParams p;
    p.layer_sizes = layer_sizes;
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        std::size_t fan_in = layer_sizes[l], fan_out = layer_sizes[l + 1];
        require(fan_in > 0 && fan_out > 0, ErrorCode::Precondition, "zero-width layer");
        Mat w(fan_in, fan_out);
        double limit = std::sqrt(6.0 / double(fan_in + fan_out));
        for (double& v : w.data) v = rng.uniform(-limit, limit);
        p.weights.push_back(std::move(w));
        p.biases.emplace_back(1, fan_out, 0.0);
        bool last = (l + 2 == layer_sizes.size());
        p.activations.push_back(last ? Activation::Identity : hidden);
    }
    return p;
}

/// Same-shape zeroed gradient buffers for an MlpParams.
struct MlpGrads {
    std::vector<Mat> dweights;
    std::vector<Mat> dbiases;

    explicit MlpGrads(const MlpParams& p) {
        for (std::size_t l = 0; l < p.n_layers(); ++l) {
            dweights.emplace_back(p.weights[l].rows, p.weights[l].cols, 0.0);
            dbiases.emplace_back(1, p.biases[l].cols, 0.0);
        }
    }

    void zero() {
        for (auto& m : dweights) m.zero();
        for (auto& m : dbiases) m.zero();
    }
};

/// Plain batched forward pass (no tape) for rollouts and evaluation.
inline Mat mlp_forward(const MlpParams& p, const Mat& x) {
    require(x.cols == p.in_dim(), ErrorCode::ShapeMismatch, "mlp_forward: input width");
    Mat h = x;
    for (std::size_t l = 0; l < p.n_layers(); ++l) {
        Mat out(h.rows, p.weights[l].cols);
        for (std::size_t i = 0; i < out.rows; ++i)
            for (std::size_t j = 0; j < out.cols; ++j) out.at(i, j) = p.biases[l].at(0, j);
        matmul_acc(h, p.weights[l], out);
        switch (p.activations[l]) {
            case Activation::Relu:
                for (double& v : out.data) v = v > 0.0 ? v : 0.0;
                break;
            case Activation::Tanh:
                for (double& v : out.data) v = std::tanh(v);
                break;
            case Activation::Identity:
                break;
        }
        h = std::move(out);
    }
    return h;
}

/// Forward pass recorded on a tape. Pass grads to collect parameter
/// gradients, or nullptr to treat the network as frozen.
inline int mlp_on_tape(Tape& tape, const MlpParams& p, int x, MlpGrads* grads) {
    require(tape.val(x).cols == p.in_dim(), ErrorCode::ShapeMismatch, "mlp_on_tape: input width");
    int h = x;
    for (std::size_t l = 0; l < p.n_layers(); ++l) {
        Mat* dw = grads ? &grads->dweights[l] : nullptr;
        Mat* db = grads ? &grads->dbiases[l] : nullptr;
        h = tape.linear(h, p.weights[l], p.biases[l], dw, db);
        switch (p.activations[l]) {
            case Activation::Relu: h = tape.relu(h); break;
            case Activation::Tanh: h = tape.tanh_(h); break;
            case Activation::Identity: break;
        }
    }
    return h;
}

/// Adam with bias correction. One state per optimized network.
struct AdamState {
    std::vector<Mat> mw, vw, mb, vb;
    long t = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    explicit AdamState(const MlpParams& p) {
        for (std::size_t l = 0; l < p.n_layers(); ++l) {
            mw.emplace_back(p.weights[l].rows, p.weights[l].cols, 0.0);
            vw.emplace_back(p.weights[l].rows, p.weights[l].cols, 0.0);
            mb.emplace_back(1, p.biases[l].cols, 0.0);
            vb.emplace_back(1, p.biases[l].cols, 0.0);
        }
    }
};

inline void adam_update_buffer(Mat& param, const Mat& grad, Mat& m, Mat& v, const AdamState& st,
                               double lr) {
    double bc1 = 1.0 - std::pow(st.beta1, double(st.t));
    double bc2 = 1.0 - std::pow(st.beta2, double(st.t));
    for (std::size_t i = 0; i < param.size(); ++i) {
        double g = grad.data[i];
        require(std::isfinite(g), ErrorCode::NumericNan, "non-finite gradient in adam step");
        m.data[i] = st.beta1 * m.data[i] + (1.0 - st.beta1) * g;
        v.data[i] = st.beta2 * v.data[i] + (1.0 - st.beta2) * g * g;
        double mhat = m.data[i] / bc1;
        double vhat = v.data[i] / bc2;
        param.data[i] -= lr * mhat / (std::sqrt(vhat) + st.eps);
    }
}

inline void adam_step(MlpParams& p, const MlpGrads& g, AdamState& st, double lr) {
    st.t += 1;
    for (std::size_t l = 0; l < p.n_layers(); ++l) {
        adam_update_buffer(p.weights[l], g.dweights[l], st.mw[l], st.vw[l], st, lr);
        adam_update_buffer(p.biases[l], g.dbiases[l], st.mb[l], st.vb[l], st, lr);
    }
}

/// target <- (1 - tau) target + tau online.
inline void polyak_update(MlpParams& target, const MlpParams& online, double tau) {
    require(target.layer_sizes == online.layer_sizes, ErrorCode::ShapeMismatch,
            "polyak_update: architecture mismatch");
    for (std::size_t l = 0; l < target.n_layers(); ++l) {
        for (std::size_t i = 0; i < target.weights[l].size(); ++i)
            target.weights[l].data[i] =
                (1.0 - tau) * target.weights[l].data[i] + tau * online.weights[l].data[i];
        for (std::size_t i = 0; i < target.biases[l].size(); ++i)
            target.biases[l].data[i] =
                (1.0 - tau) * target.biases[l].data[i] + tau * online.biases[l].data[i];
    }
}

/// Flatten / unflatten helpers used by the finite-difference tests and the
/// checkpoint codec (row-major weight order, weights then bias per layer).
inline std::vector<double> mlp_flatten(const MlpParams& p) {
    std::vector<double> out;
    out.reserve(p.param_count());
    for (std::size_t l = 0; l < p.n_layers(); ++l) {
        out.insert(out.end(), p.weights[l].data.begin(), p.weights[l].data.end());
        out.insert(out.end(), p.biases[l].data.begin(), p.biases[l].data.end());
    }
    return out;
}

inline void mlp_unflatten(MlpParams& p, const std::vector<double>& flat) {
    require(flat.size() == p.param_count(), ErrorCode::ShapeMismatch, "unflatten size mismatch");
    std::size_t k = 0;
    for (std::size_t l = 0; l < p.n_layers(); ++l) {
        for (double& v : p.weights[l].data) v = flat[k++];
        for (double& v : p.biases[l].data) v = flat[k++];
    }
}

inline std::vector<double> grads_flatten(const MlpGrads& g) {
    std::vector<double> out;
    for (std::size_t l = 0; l < g.dweights.size(); ++l) {
        out.insert(out.end(), g.dweights[l].data.begin(), g.dweights[l].data.end());
        out.insert(out.end(), g.dbiases[l].data.begin(), g.dbiases[l].data.end());
    }
    return out;
}

}  // namespace xferlab
