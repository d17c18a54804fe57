#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "autodiff.hpp"
#include "common.hpp"
#include "nn.hpp"
#include "rng.hpp"

namespace xferlab {

inline constexpr double kHalfLog2Pi = 0.9189385332046727;  // 0.5 * log(2*pi)

/// Diagonal Gaussian policy with optional tanh squashing onto a box.
/// The network emits [mean | log_std] (2 * action_dim columns); log_std is
/// clamped to [log_std_min, log_std_max]. With squashing, actions are
/// offset + scale * tanh(u) with u = mean + std * noise, and log-densities
/// include the change-of-variables correction per dimension.
struct GaussianPolicy {
    MlpParams net;
    std::size_t state_dim = 0;
    std::size_t action_dim = 0;
    std::vector<double> low, high;  // per-dimension box; ignored when !squash
    bool squash = true;
    double log_std_min = -20.0;
    double log_std_max = 2.0;

    double offset(std::size_t d) const { return 0.5 * (low[d] + high[d]); }
    double scale(std::size_t d) const { return 0.5 * (high[d] - low[d]); }

    void validate() const {
        require(net.in_dim() == state_dim, ErrorCode::ShapeMismatch, "policy net input width");
        require(net.out_dim() == 2 * action_dim, ErrorCode::ShapeMismatch,
                "policy net must emit mean and log_std per action dim");
        if (squash) {
            require(low.size() == action_dim && high.size() == action_dim, ErrorCode::ShapeMismatch,
                    "action bounds size");
            for (std::size_t d = 0; d < action_dim; ++d)
                require(low[d] < high[d], ErrorCode::Precondition, "action bounds must be ordered");
        }
    }
};

inline GaussianPolicy make_gaussian_policy(std::size_t state_dim, std::size_t action_dim,
                                           const std::vector<std::size_t>& hidden, Activation act,
                                           const std::vector<double>& low,
                                           const std::vector<double>& high, Rng& rng,
                                           bool squash = true) {
    GaussianPolicy p;
    p.state_dim = state_dim;
    p.action_dim = action_dim;
    p.low = low;
    p.high = high;
    p.squash = squash;
    std::vector<std::size_t> sizes;
    sizes.push_back(state_dim);
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(2 * action_dim);
    p.net = mlp_init(sizes, act, rng);
    p.validate();
    return p;
}

/// Mean/log_std rows for a batch of states (plain forward, log_std clamped).
struct PolicyHeadsValue {
    Mat mean;
    Mat log_std;
};

inline PolicyHeadsValue policy_heads(const GaussianPolicy& p, const Mat& states) {
    Mat out = mlp_forward(p.net, states);
    PolicyHeadsValue h;
    h.mean = Mat(out.rows, p.action_dim);
    h.log_std = Mat(out.rows, p.action_dim);
    for (std::size_t i = 0; i < out.rows; ++i)
        for (std::size_t d = 0; d < p.action_dim; ++d) {
            h.mean.at(i, d) = out.at(i, d);
            h.log_std.at(i, d) =
                std::min(std::max(out.at(i, p.action_dim + d), p.log_std_min), p.log_std_max);
        }
    return h;
}

struct PolicySampleBatch {
    Mat actions;                // squashed (or raw when !squash)
    Mat raws;                   // pre-squash Gaussian draws
    std::vector<double> logps;  // one per row
};

/// Log-density of the action obtained by squashing raw value u, given the
/// Gaussian head values for one row. Works off the raw value, so no inverse
/// tanh is ever needed for actions we generated ourselves.
inline double log_prob_from_raw(const GaussianPolicy& p, const PolicyHeadsValue& h, std::size_t row,
                                const double* raw) {
    double lp = 0.0;
    for (std::size_t d = 0; d < p.action_dim; ++d) {
        double mean = h.mean.at(row, d);
        double ls = h.log_std.at(row, d);
        double z = (raw[d] - mean) * std::exp(-ls);
        lp += -0.5 * z * z - ls - kHalfLog2Pi;
        if (p.squash) lp -= tanh_log_det_scalar(raw[d]) + std::log(p.scale(d));
    }
    return lp;
}

/// Draw one action per state row. Noise order is row-major (row, then
/// dimension), which pins the RNG stream layout.
inline PolicySampleBatch policy_sample(const GaussianPolicy& p, const Mat& states, Rng& rng) {
    PolicyHeadsValue h = policy_heads(p, states);
    PolicySampleBatch out;
    out.actions = Mat(states.rows, p.action_dim);
    out.raws = Mat(states.rows, p.action_dim);
    out.logps.resize(states.rows);
    for (std::size_t i = 0; i < states.rows; ++i) {
        for (std::size_t d = 0; d < p.action_dim; ++d) {
            double u = h.mean.at(i, d) + std::exp(h.log_std.at(i, d)) * rng.normal();
            out.raws.at(i, d) = u;
            out.actions.at(i, d) = p.squash ? p.offset(d) + p.scale(d) * std::tanh(u) : u;
        }
        out.logps[i] = log_prob_from_raw(p, h, i, &out.raws.data[i * p.action_dim]);
    }
    return out;
}

/// Deterministic action: squashed mean (used for evaluation rollouts).
inline std::vector<double> policy_mean_action(const GaussianPolicy& p,
                                              const std::vector<double>& state) {
    Mat s = Mat::row(state);
    PolicyHeadsValue h = policy_heads(p, s);
    std::vector<double> a(p.action_dim);
    for (std::size_t d = 0; d < p.action_dim; ++d)
        a[d] = p.squash ? p.offset(d) + p.scale(d) * std::tanh(h.mean.at(0, d)) : h.mean.at(0, d);
    return a;
}

/// Log-density of an externally supplied action. Squashed actions strictly
/// inside the box are inverted with atanh; on-or-outside-boundary actions
/// have no finite density and are rejected.
inline double policy_log_prob(const GaussianPolicy& p, const std::vector<double>& state,
                              const std::vector<double>& action) {
    require(action.size() == p.action_dim, ErrorCode::ShapeMismatch, "action size");
    Mat s = Mat::row(state);
    PolicyHeadsValue h = policy_heads(p, s);
    std::vector<double> raw(p.action_dim);
    for (std::size_t d = 0; d < p.action_dim; ++d) {
        if (p.squash) {
            double norm = (action[d] - p.offset(d)) / p.scale(d);
            require(std::fabs(norm) < 1.0, ErrorCode::ActionOutOfBounds,
                    "action on or outside the box boundary has no finite density");
            raw[d] = 0.5 * std::log((1.0 + norm) / (1.0 - norm));
        } else {
            raw[d] = action[d];
        }
    }
    return log_prob_from_raw(p, h, 0, raw.data());
}

/// Exact differential entropy; defined only for the unsquashed Gaussian.
inline double policy_entropy(const GaussianPolicy& p, const std::vector<double>& state) {
    require(!p.squash, ErrorCode::UnsupportedOp,
            "closed-form entropy exists only for the unsquashed policy");
    Mat s = Mat::row(state);
    PolicyHeadsValue h = policy_heads(p, s);
    double ent = 0.0;
    for (std::size_t d = 0; d < p.action_dim; ++d)
        ent += h.log_std.at(0, d) + 0.5 + kHalfLog2Pi;
    return ent;
}

// ---------------------------------------------------------------------------
// Tape-side pieces (for loss gradients).

struct PolicyHeadsNodes {
    int mean = -1;
    int log_std = -1;  // already clamped
};

inline PolicyHeadsNodes policy_heads_on_tape(Tape& tape, const GaussianPolicy& p, int states,
                                             MlpGrads* grads) {
    int out = mlp_on_tape(tape, p.net, states, grads);
    PolicyHeadsNodes h;
    h.mean = tape.slice_cols(out, 0, p.action_dim);
    h.log_std = tape.clamp(tape.slice_cols(out, p.action_dim, 2 * p.action_dim), p.log_std_min,
                           p.log_std_max);
    return h;
}

struct PolicyRsampleNodes {
    int raw = -1;     // mean + std * xi
    int action = -1;  // squashed
    int logp = -1;    // batch x 1
};

/// Reparameterized sample on the tape with fixed noise xi. The Gaussian part
/// of the log-density uses the substitution (u - mean)/std = xi, which gives
/// exactly the pathwise gradients of log pi(u|s) with respect to the heads.
inline PolicyRsampleNodes policy_rsample_on_tape(Tape& tape, const GaussianPolicy& p,
                                                 const PolicyHeadsNodes& h, const Mat& xi) {
    PolicyRsampleNodes out;
    int xi_node = tape.input(xi);
    int std_node = tape.exp_(h.log_std);
    out.raw = tape.add(h.mean, tape.mul(std_node, xi_node));

    // sum_d [ -xi^2/2 - log_std - log sqrt(2 pi) ]
    int gauss = tape.row_sum(
        tape.sub(tape.scale(tape.square(xi_node), -0.5), h.log_std));
    int logp = tape.add_scalar(gauss, -kHalfLog2Pi * double(p.action_dim));

    if (p.squash) {
        int corr = tape.row_sum(tape.tanh_log_det(out.raw));
        double log_scale_sum = 0.0;
        for (std::size_t d = 0; d < p.action_dim; ++d) log_scale_sum += std::log(p.scale(d));
        logp = tape.add_scalar(tape.sub(logp, corr), -log_scale_sum);

        int squashed = tape.tanh_(out.raw);
        // per-dimension affine map onto the box
        if (p.action_dim == 1) {
            out.action = tape.add_scalar(tape.scale(squashed, p.scale(0)), p.offset(0));
        } else {
            int acc = -1;
            for (std::size_t d = 0; d < p.action_dim; ++d) {
                int col = tape.slice_cols(squashed, d, d + 1);
                int mapped = tape.add_scalar(tape.scale(col, p.scale(d)), p.offset(d));
                acc = d == 0 ? mapped : tape.concat_cols(acc, mapped);
            }
            out.action = acc;
        }
    } else {
        out.action = out.raw;
    }
    out.logp = logp;
    return out;
}

/// log pi(squash(raw)|s) on the tape for externally supplied raw values
/// (constants). Gradients flow only into the heads; used by the
/// cross-entropy objective where actions come from another policy.
inline int policy_log_prob_raw_on_tape(Tape& tape, const GaussianPolicy& p,
                                       const PolicyHeadsNodes& h, const Mat& raw) {
    int raw_node = tape.input(raw);
    int diff = tape.sub(raw_node, h.mean);
    int neg_ls = tape.scale(h.log_std, -1.0);
    int z = tape.mul(diff, tape.exp_(neg_ls));
    int per_dim = tape.add(tape.scale(tape.square(z), -0.5), neg_ls);
    int logp = tape.add_scalar(tape.row_sum(per_dim), -kHalfLog2Pi * double(p.action_dim));
    if (p.squash) {
        int corr = tape.row_sum(tape.tanh_log_det(raw_node));
        double log_scale_sum = 0.0;
        for (std::size_t d = 0; d < p.action_dim; ++d) log_scale_sum += std::log(p.scale(d));
        logp = tape.add_scalar(tape.sub(logp, corr), -log_scale_sum);
    }
    return logp;
}

}  // namespace xferlab
