#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "common.hpp"
#include "env.hpp"
#include "nn.hpp"
#include "rng.hpp"

namespace xferlab {

/// Per-feature affine normalization fitted on training data. Constant
/// features get unit scale so they pass through unchanged.
struct Standardizer {
    std::vector<double> mean, stdev;

    void fit(const Mat& x, std::size_t n_rows) {
        mean.assign(x.cols, 0.0);
        stdev.assign(x.cols, 0.0);
        for (std::size_t i = 0; i < n_rows; ++i)
            for (std::size_t j = 0; j < x.cols; ++j) mean[j] += x.at(i, j);
        for (double& m : mean) m /= double(n_rows);
        for (std::size_t i = 0; i < n_rows; ++i)
            for (std::size_t j = 0; j < x.cols; ++j) {
                double d = x.at(i, j) - mean[j];
                stdev[j] += d * d;
            }
        for (double& s : stdev) {
            s = std::sqrt(s / double(n_rows));
            if (s < 1e-12) s = 1.0;
        }
    }

    Mat apply(const Mat& x) const {
        Mat out = x;
        for (std::size_t i = 0; i < out.rows; ++i)
            for (std::size_t j = 0; j < out.cols; ++j)
                out.at(i, j) = (out.at(i, j) - mean[j]) / stdev[j];
        return out;
    }

    Mat unapply(const Mat& z) const {
        Mat out = z;
        for (std::size_t i = 0; i < out.rows; ++i)
            for (std::size_t j = 0; j < out.cols; ++j)
                out.at(i, j) = out.at(i, j) * stdev[j] + mean[j];
        return out;
    }
};

/// Random-policy rollout data: x = [state | action], plus next states and
/// rewards as regression targets.
struct RolloutDataset {
    Mat x;        // n x (state_dim + action_dim)
    Mat next_s;   // n x state_dim
    Mat reward;   // n x 1
};

inline RolloutDataset collect_random_rollouts(const EnvSpec& spec, std::size_t n, Rng& rng) {
    PointMassEnv env(spec);
    RolloutDataset d;
    d.x = Mat(n, EnvSpec::state_dim + EnvSpec::action_dim);
    d.next_s = Mat(n, EnvSpec::state_dim);
    d.reward = Mat(n, 1);
    std::vector<double> state = env.reset(rng);
    std::size_t steps_in_episode = 0;
    for (std::size_t k = 0; k < n; ++k) {
        std::vector<double> a(EnvSpec::action_dim);
        for (std::size_t dd = 0; dd < EnvSpec::action_dim; ++dd)
            a[dd] = rng.uniform(spec.action_low[dd], spec.action_high[dd]);
        auto res = env.step(a, rng);
        for (std::size_t dd = 0; dd < EnvSpec::state_dim; ++dd) {
            d.x.at(k, dd) = state[dd];
            d.next_s.at(k, dd) = res.next_state[dd];
        }
        for (std::size_t dd = 0; dd < EnvSpec::action_dim; ++dd)
            d.x.at(k, EnvSpec::state_dim + dd) = a[dd];
        d.reward.at(k, 0) = res.reward;
        ++steps_in_episode;
        if (res.terminal || steps_in_episode >= spec.horizon) {
            state = env.reset(rng);
            steps_in_episode = 0;
        } else {
            state = res.next_state;
        }
    }
    return d;
}

struct SimilarityConfig {
    std::size_t n_samples = 2048;   // transitions per task
    std::size_t epochs = 120;
    std::size_t batch_size = 128;
    double lr = 3e-3;
    std::vector<std::size_t> encoder_hidden = {32, 32};
    std::size_t latent_dim = 8;
    std::vector<std::size_t> decoder_hidden = {32, 32};
    double holdout_fraction = 0.2;
    bool literal_self_model = false;  // report the self-fit residual as the measure
    std::uint64_t seed = 0;

    void validate() const {
        require(n_samples >= 64, ErrorCode::ConfigBadValue, "n_samples too small");
        require(epochs > 0 && batch_size > 0 && lr > 0.0, ErrorCode::ConfigBadValue,
                "bad fit schedule");
        require(latent_dim > 0, ErrorCode::ConfigBadValue, "latent_dim must be positive");
        require(holdout_fraction >= 0.0 && holdout_fraction < 0.9, ErrorCode::ConfigBadValue,
                "holdout_fraction out of range");
    }
};

/// Mean squared error over all entries, recorded on the tape. This is the
/// exact training loss graph of the model fits.
inline int mse_loss_on_tape(Tape& tape, const MlpParams& net, const Mat& x, const Mat& y,
                            MlpGrads* grads) {
    int xi = tape.input(x);
    int yi = tape.input(y);
    int pred = mlp_on_tape(tape, net, xi, grads);
    return tape.mean_all(tape.square(tape.sub(pred, yi)));
}

/// A fitted encoder-decoder regressor with its input/output normalization.
struct ModelFit {
    MlpParams net;
    Standardizer in, out;
    double train_mse = 0.0;    // standardized units
    double holdout_mse = 0.0;  // standardized units

    Mat predict(const Mat& x_raw) const { return out.unapply(mlp_forward(net, in.apply(x_raw))); }
};

/// Minibatch Adam on standardized data. The architecture funnels through a
/// narrow latent layer: [in, encoder..., latent, decoder..., out].
inline ModelFit fit_regression(const Mat& x_raw, const Mat& y_raw, const SimilarityConfig& cfg,
                               Rng& rng) {
    cfg.validate();
    require(x_raw.rows == y_raw.rows && x_raw.rows >= 8, ErrorCode::Precondition,
            "fit_regression needs matched non-trivial datasets");

    // Shuffle once, split off the holdout tail.
    std::size_t n = x_raw.rows;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = n - 1; i > 0; --i)
        std::swap(order[i], order[rng.index(i + 1)]);
    Mat xs(n, x_raw.cols), ys(n, y_raw.cols);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < x_raw.cols; ++j) xs.at(i, j) = x_raw.at(order[i], j);
        for (std::size_t j = 0; j < y_raw.cols; ++j) ys.at(i, j) = y_raw.at(order[i], j);
    }
    std::size_t n_train = n - std::size_t(double(n) * cfg.holdout_fraction);

    ModelFit fit;
    fit.in.fit(xs, n_train);
    fit.out.fit(ys, n_train);
    Mat xz = fit.in.apply(xs);
    Mat yz = fit.out.apply(ys);

    std::vector<std::size_t> sizes;
    sizes.push_back(x_raw.cols);
    sizes.insert(sizes.end(), cfg.encoder_hidden.begin(), cfg.encoder_hidden.end());
    sizes.push_back(cfg.latent_dim);
    sizes.insert(sizes.end(), cfg.decoder_hidden.begin(), cfg.decoder_hidden.end());
    sizes.push_back(y_raw.cols);
    fit.net = mlp_init(sizes, Activation::Relu, rng);
    AdamState opt(fit.net);
    MlpGrads grads(fit.net);

    std::vector<std::size_t> idx(n_train);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = n_train - 1; i > 0; --i)
            std::swap(idx[i], idx[rng.index(i + 1)]);
        for (std::size_t b0 = 0; b0 + cfg.batch_size <= n_train; b0 += cfg.batch_size) {
            Mat bx(cfg.batch_size, xz.cols), by(cfg.batch_size, yz.cols);
            for (std::size_t i = 0; i < cfg.batch_size; ++i) {
                std::size_t k = idx[b0 + i];
                for (std::size_t j = 0; j < xz.cols; ++j) bx.at(i, j) = xz.at(k, j);
                for (std::size_t j = 0; j < yz.cols; ++j) by.at(i, j) = yz.at(k, j);
            }
            grads.zero();
            Tape tape;
            int loss = mse_loss_on_tape(tape, fit.net, bx, by, &grads);
            tape.backward(loss);
            adam_step(fit.net, grads, opt, cfg.lr);
        }
    }

    auto mse_on = [&](std::size_t from, std::size_t to) {
        if (to <= from) return 0.0;
        Mat sub_x(to - from, xz.cols), sub_y(to - from, yz.cols);
        for (std::size_t i = from; i < to; ++i) {
            for (std::size_t j = 0; j < xz.cols; ++j) sub_x.at(i - from, j) = xz.at(i, j);
            for (std::size_t j = 0; j < yz.cols; ++j) sub_y.at(i - from, j) = yz.at(i, j);
        }
        Mat pred = mlp_forward(fit.net, sub_x);
        double acc = 0.0;
        for (std::size_t i = 0; i < pred.size(); ++i) {
            double d = pred.data[i] - sub_y.data[i];
            acc += d * d;
        }
        return acc / double(pred.size());
    };
    fit.train_mse = mse_on(0, n_train);
    fit.holdout_mse = mse_on(n_train, n);
    return fit;
}

/// Mean per-sample L2 prediction error in raw units.
inline double mean_l2_error(const ModelFit& model, const Mat& x_raw, const Mat& y_raw) {
    Mat pred = model.predict(x_raw);
    double acc = 0.0;
    for (std::size_t i = 0; i < y_raw.rows; ++i) {
        double sq = 0.0;
        for (std::size_t j = 0; j < y_raw.cols; ++j) {
            double d = pred.at(i, j) - y_raw.at(i, j);
            sq += d * d;
        }
        acc += std::sqrt(sq);
    }
    return acc / double(y_raw.rows);
}

/// Dynamics and reward models of one task, fitted on its own random-policy
/// data. The dynamics model predicts the state increment s' - s; since the
/// reconstructed next state is s + prediction, increment errors equal
/// next-state errors while keeping the regression target well-scaled.
struct TaskModels {
    RolloutDataset data;
    Mat delta;          // next_s - s, the dynamics regression target
    ModelFit dynamics;  // maps [s | a] to the state increment
    ModelFit reward;    // maps [s | a] to the reward
};

inline Mat state_increment(const RolloutDataset& d) {
    Mat delta(d.next_s.rows, d.next_s.cols);
    for (std::size_t i = 0; i < delta.rows; ++i)
        for (std::size_t j = 0; j < delta.cols; ++j)
            delta.at(i, j) = d.next_s.at(i, j) - d.x.at(i, j);
    return delta;
}

inline Mat predict_next_state(const TaskModels& tm, const Mat& x) {
    Mat out = tm.dynamics.predict(x);
    for (std::size_t i = 0; i < out.rows; ++i)
        for (std::size_t j = 0; j < out.cols; ++j) out.at(i, j) += x.at(i, j);
    return out;
}

inline TaskModels fit_task_models(const EnvSpec& spec, const SimilarityConfig& cfg,
                                  const std::string& role) {
    cfg.validate();
    spec.validate();
    Rng data_rng = Rng::stream(cfg.seed, "simdata/" + role);
    TaskModels tm;
    tm.data = collect_random_rollouts(spec, cfg.n_samples, data_rng);
    tm.delta = state_increment(tm.data);
    Rng dyn_rng = Rng::stream(cfg.seed, "simfit/" + role + "/dyn");
    Rng rew_rng = Rng::stream(cfg.seed, "simfit/" + role + "/rew");
    tm.dynamics = fit_regression(tm.data.x, tm.delta, cfg, dyn_rng);
    tm.reward = fit_regression(tm.data.x, tm.data.reward, cfg, rew_rng);
    return tm;
}

struct SimilarityReport {
    double xi_dynamics = 0.0;   // source dynamics model error on target data
    double xi_reward = 0.0;     // source reward model error on target data
    double self_dynamics = 0.0; // target's own model error on the same data (fit floor)
    double self_reward = 0.0;
};

/// Cross-task prediction errors. Larger xi = less similar tasks; the self_*
/// fields give the attainable floor (the target model on its own data).
inline SimilarityReport compare_task_models(const TaskModels& source, const TaskModels& target,
                                            bool literal_self_model = false) {
    SimilarityReport rep;
    rep.self_dynamics = mean_l2_error(target.dynamics, target.data.x, target.delta);
    rep.self_reward = mean_l2_error(target.reward, target.data.x, target.data.reward);
    if (literal_self_model) {
        rep.xi_dynamics = rep.self_dynamics;
        rep.xi_reward = rep.self_reward;
    } else {
        rep.xi_dynamics = mean_l2_error(source.dynamics, target.data.x, target.delta);
        rep.xi_reward = mean_l2_error(source.reward, target.data.x, target.data.reward);
    }
    return rep;
}

/// Convenience wrapper for one source/target pair.
inline SimilarityReport task_similarity(const EnvSpec& source, const EnvSpec& target,
                                        const SimilarityConfig& cfg) {
    require(source.same_domain(target), ErrorCode::DomainMismatch,
            "similarity requires a shared state/action interface");
    auto src = fit_task_models(source, cfg, "source");
    auto tgt = fit_task_models(target, cfg, "target");
    return compare_task_models(src, tgt, cfg.literal_self_model);
}

}  // namespace xferlab
