#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "autodiff.hpp"
#include "common.hpp"
#include "env.hpp"
#include "nn.hpp"
#include "policy.hpp"
#include "replay.hpp"
#include "rng.hpp"

namespace xferlab {

struct SacHyper {
    std::vector<std::size_t> hidden = {200, 200};
    Activation activation = Activation::Relu;
    double lr = 3e-4;
    double gamma = 0.99;
    double alpha = 0.2;          // entropy temperature (fixed)
    double polyak_tau = 0.005;
    std::size_t buffer_capacity = 100000;
    std::size_t batch_size = 64;
    std::size_t start_steps = 1000;      // uniform-random warmup actions
    std::size_t update_every = 50;       // env steps between update bursts
    std::size_t gradient_updates = 50;   // gradient steps per burst
    std::size_t eval_every = 1000;       // env steps between evaluations
    std::size_t eval_episodes = 5;

    void validate() const {
        require(lr > 0.0 && gamma >= 0.0 && gamma < 1.0 && alpha > 0.0, ErrorCode::ConfigBadValue,
                "bad sac hyperparameters");
        require(polyak_tau > 0.0 && polyak_tau <= 1.0, ErrorCode::ConfigBadValue, "bad polyak tau");
        require(batch_size > 0 && buffer_capacity >= batch_size, ErrorCode::ConfigBadValue,
                "buffer must hold at least one batch");
        require(update_every > 0 && gradient_updates > 0 && eval_every > 0 && eval_episodes > 0,
                ErrorCode::ConfigBadValue, "schedule values must be positive");
    }
};

/// Soft actor-critic learner: tanh-Gaussian actor, twin critics with target
/// networks. Exposes the individual update steps so transfer variants can
/// recombine them; evaluation seams (q_eval_override) let tests rig critics.
class SacLearner {
  public:
    SacLearner(const EnvSpec& env_spec, const SacHyper& hyper, std::uint64_t seed)
        : spec_(env_spec), hp_(hyper) {
        hp_.validate();
        Rng pi_rng = Rng::stream(seed, "init/pi");
        policy_ = make_gaussian_policy(EnvSpec::state_dim, EnvSpec::action_dim, hp_.hidden,
                                       hp_.activation, spec_.action_low, spec_.action_high, pi_rng);
        std::vector<std::size_t> qs;
        qs.push_back(EnvSpec::state_dim + EnvSpec::action_dim);
        qs.insert(qs.end(), hp_.hidden.begin(), hp_.hidden.end());
        qs.push_back(1);
        Rng q1_rng = Rng::stream(seed, "init/q1");
        Rng q2_rng = Rng::stream(seed, "init/q2");
        q1_ = mlp_init(qs, hp_.activation, q1_rng);
        q2_ = mlp_init(qs, hp_.activation, q2_rng);
        q1_target_ = q1_;
        q2_target_ = q2_;
        opt_pi_.emplace(policy_.net);
        opt_q1_.emplace(q1_);
        opt_q2_.emplace(q2_);
    }

    const EnvSpec& env_spec() const { return spec_; }
    const SacHyper& hyper() const { return hp_; }
    GaussianPolicy& policy() { return policy_; }
    const GaussianPolicy& policy() const { return policy_; }
    MlpParams& q1() { return q1_; }
    MlpParams& q2() { return q2_; }
    const MlpParams& q1() const { return q1_; }
    const MlpParams& q2() const { return q2_; }
    const MlpParams& q1_target() const { return q1_target_; }
    const MlpParams& q2_target() const { return q2_target_; }

    /// Replace critic weights (checkpoint restore). Optimizer moments reset.
    void set_critic_weights(const MlpParams& q1, const MlpParams& q2, const MlpParams& q1t,
                            const MlpParams& q2t) {
        for (const MlpParams* p : {&q1, &q2, &q1t, &q2t})
            require(p->layer_sizes == q1_.layer_sizes, ErrorCode::DomainMismatch,
                    "critic architecture mismatch");
        q1_ = q1;
        q2_ = q2;
        q1_target_ = q1t;
        q2_target_ = q2t;
        opt_q1_.emplace(q1_);
        opt_q2_.emplace(q2_);
    }

    /// Replace the actor weights (transfer initialization). Optimizer state
    /// is reset so the new weights start from fresh moments.
    void set_policy_weights(const GaussianPolicy& src) {
        require(src.net.layer_sizes == policy_.net.layer_sizes, ErrorCode::DomainMismatch,
                "policy architecture mismatch");
        require(src.low == policy_.low && src.high == policy_.high, ErrorCode::DomainMismatch,
                "policy action-box mismatch");
        policy_.net = src.net;
        opt_pi_.emplace(policy_.net);
    }

    /// min(Q1, Q2) for a single state/action, honoring the test override.
    double q_min(const std::vector<double>& s, const std::vector<double>& a) const {
        if (q_eval_override) return q_eval_override(s, a);
        Mat in(1, s.size() + a.size());
        for (std::size_t i = 0; i < s.size(); ++i) in.at(0, i) = s[i];
        for (std::size_t i = 0; i < a.size(); ++i) in.at(0, s.size() + i) = a[i];
        double v1 = mlp_forward(q1_, in).at(0, 0);
        double v2 = mlp_forward(q2_, in).at(0, 0);
        return std::min(v1, v2);
    }

    /// Monte-Carlo soft state value: mean of Q_min(s,a) - alpha log pi(a|s)
    /// over k fresh policy samples.
    double soft_value_estimate(const std::vector<double>& s, std::size_t k, Rng& rng) const {
        Mat srow = Mat::row(s);
        double acc = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            auto smp = policy_sample(policy_, srow, rng);
            std::vector<double> a(smp.actions.data);
            acc += q_min(s, a) - hp_.alpha * smp.logps[0];
        }
        return acc / double(k);
    }

    /// The twin-critic regression loss
    ///   L = mean[(Q1(s,a) - y)^2] + mean[(Q2(s,a) - y)^2]
    /// built on the given tape; this exact graph is used by critic_update,
    /// and tests differentiate it directly.
    int build_critic_loss(Tape& tape, const ReplayBuffer::Batch& batch,
                          const std::vector<double>& targets, MlpGrads* g1, MlpGrads* g2) {
        int sa = tape.input(concat_rows(batch.s, batch.a));
        int q1n = mlp_on_tape(tape, q1_, sa, g1);
        int q2n = mlp_on_tape(tape, q2_, sa, g2);
        int y = tape.input(Mat::from_column(targets));
        return tape.add(tape.mean_all(tape.square(tape.sub(q1n, y))),
                        tape.mean_all(tape.square(tape.sub(q2n, y))));
    }

    /// One twin-critic regression step toward the soft Bellman target
    ///   y = r + gamma (1 - done) [min Q'(s',a') - alpha log pi(a'|s')],
    /// a' drawn fresh from the current actor. Returns the summed MSE loss.
    double critic_update(const ReplayBuffer::Batch& batch, Rng& upd_rng) {
        auto targets = critic_targets(batch, upd_rng);
        MlpGrads g1(q1_), g2(q2_);
        Tape tape;
        int loss = build_critic_loss(tape, batch, targets, &g1, &g2);
        tape.backward(loss);
        adam_step(q1_, g1, *opt_q1_, hp_.lr);
        adam_step(q2_, g2, *opt_q2_, hp_.lr);
        return tape.scalar(loss);
    }

    /// Actor step. The objective is
    ///   J1 = mean[ alpha log pi(a|s) - min Q(s,a) ],  a = rsample(phi)
    /// plus, when ce_source is given and ce_weight != 0, the cross-entropy
    /// term  ce_weight * mean[ -log pi(b|s) ]  with b drawn from ce_source.
    /// With ce_weight == 0 the extra nodes are never built, so the update is
    /// bit-identical to plain soft actor-critic.
    double policy_update(const ReplayBuffer::Batch& batch, Rng& upd_rng,
                         const GaussianPolicy* ce_source = nullptr, double ce_weight = 0.0,
                         Rng* ce_rng = nullptr) {
        Mat xi(batch.s.rows, EnvSpec::action_dim);
        for (double& v : xi.data) v = upd_rng.normal();

        const Mat* ce_raw_ptr = nullptr;
        Mat ce_raw;
        if (ce_source != nullptr && ce_weight != 0.0) {
            require(ce_rng != nullptr, ErrorCode::Precondition, "cross-entropy term needs its rng");
            ce_raw = sample_raw(*ce_source, batch.s, *ce_rng);
            ce_raw_ptr = &ce_raw;
        }

        MlpGrads grads(policy_.net);
        Tape tape;
        auto parts = build_actor_loss(tape, policy_, &grads, batch.s, xi, ce_weight, ce_raw_ptr);
        tape.backward(parts.loss);
        adam_step(policy_.net, grads, *opt_pi_, hp_.lr);
        return tape.scalar(parts.loss);
    }

    struct ActorLossParts {
        int loss = -1;
        int j1 = -1;  // entropy-regularized Q-ascent objective
        int j2 = -1;  // cross-entropy toward the source draws; -1 when absent
    };

    /// Actor objective for any policy evaluated against this learner's
    /// critics (critics frozen). Shared by the target-actor step, the
    /// source-policy sync step, and the gradient tests.
    ActorLossParts build_actor_loss(Tape& tape, const GaussianPolicy& actor, MlpGrads* grads,
                                    const Mat& states, const Mat& xi, double ce_weight = 0.0,
                                    const Mat* ce_raw = nullptr) {
        ActorLossParts parts;
        int s_node = tape.input(states);
        auto heads = policy_heads_on_tape(tape, actor, s_node, grads);
        auto rs = policy_rsample_on_tape(tape, actor, heads, xi);
        int qmin = critic_min_on_tape(tape, s_node, rs.action);
        parts.j1 = tape.mean_all(tape.sub(tape.scale(rs.logp, hp_.alpha), qmin));
        parts.loss = parts.j1;
        if (ce_raw != nullptr && ce_weight != 0.0) {
            int logp_src = policy_log_prob_raw_on_tape(tape, actor, heads, *ce_raw);
            parts.j2 = tape.scale(tape.mean_all(logp_src), -1.0);
            parts.loss = tape.add(parts.j1, tape.scale(parts.j2, ce_weight));
        }
        return parts;
    }

    void target_update() {
        polyak_update(q1_target_, q1_, hp_.polyak_tau);
        polyak_update(q2_target_, q2_, hp_.polyak_tau);
    }

    /// min(Q1, Q2) over a batch on the given tape (critic params frozen).
    /// Tests can swap the construction via critic_tape_override.
    int critic_min_on_tape(Tape& tape, int s_node, int a_node) {
        if (critic_tape_override) return critic_tape_override(tape, s_node, a_node);
        int sa = tape.concat_cols(s_node, a_node);
        int v1 = mlp_on_tape(tape, q1_, sa, nullptr);
        int v2 = mlp_on_tape(tape, q2_, sa, nullptr);
        return tape.min_elem(v1, v2);
    }

    std::vector<double> critic_targets(const ReplayBuffer::Batch& batch, Rng& upd_rng) const {
        std::size_t n = batch.s2.rows;
        auto next = policy_sample(policy_, batch.s2, upd_rng);
        Mat sa(n, EnvSpec::state_dim + EnvSpec::action_dim);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t d = 0; d < EnvSpec::state_dim; ++d) sa.at(i, d) = batch.s2.at(i, d);
            for (std::size_t d = 0; d < EnvSpec::action_dim; ++d)
                sa.at(i, EnvSpec::state_dim + d) = next.actions.at(i, d);
        }
        Mat t1 = mlp_forward(q1_target_, sa);
        Mat t2 = mlp_forward(q2_target_, sa);
        std::vector<double> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            double qmin = std::min(t1.at(i, 0), t2.at(i, 0));
            double cont = qmin - hp_.alpha * next.logps[i];
            y[i] = batch.r[i] + (batch.done[i] ? 0.0 : hp_.gamma * cont);
            require(std::isfinite(y[i]), ErrorCode::NumericNan, "non-finite critic target");
        }
        return y;
    }

    // Test seams.
    std::function<double(const std::vector<double>&, const std::vector<double>&)> q_eval_override;
    std::function<int(Tape&, int, int)> critic_tape_override;

    /// Draw raw (pre-squash) actions from a policy for every state row.
    static Mat sample_raw(const GaussianPolicy& p, const Mat& states, Rng& rng) {
        auto h = policy_heads(p, states);
        Mat raw(states.rows, p.action_dim);
        for (std::size_t i = 0; i < states.rows; ++i)
            for (std::size_t d = 0; d < p.action_dim; ++d)
                raw.at(i, d) = h.mean.at(i, d) + std::exp(h.log_std.at(i, d)) * rng.normal();
        return raw;
    }

    static Mat concat_rows(const Mat& a, const Mat& b) {
        require(a.rows == b.rows, ErrorCode::ShapeMismatch, "concat_rows");
        Mat out(a.rows, a.cols + b.cols);
        for (std::size_t i = 0; i < a.rows; ++i) {
            for (std::size_t j = 0; j < a.cols; ++j) out.at(i, j) = a.at(i, j);
            for (std::size_t j = 0; j < b.cols; ++j) out.at(i, a.cols + j) = b.at(i, j);
        }
        return out;
    }

  private:
    EnvSpec spec_;
    SacHyper hp_;
    GaussianPolicy policy_;
    MlpParams q1_, q2_, q1_target_, q2_target_;
    std::optional<AdamState> opt_pi_, opt_q1_, opt_q2_;
};

/// Deterministic-policy evaluation: mean undiscounted return of the squashed
/// mean action over n episodes.
inline double evaluate_policy(const EnvSpec& spec, const GaussianPolicy& policy,
                              std::size_t episodes, Rng& rng) {
    PointMassEnv env(spec);
    double total = 0.0;
    for (std::size_t e = 0; e < episodes; ++e)
        total += run_episode(env, [&](const std::vector<double>& s) {
            return policy_mean_action(policy, s);
        }, rng);
    return total / double(episodes);
}

struct EvalPoint {
    std::size_t env_step = 0;
    std::size_t eval_episode = 0;
    double rho = 0.0;
    double beta = 0.0;  // most recent cross-entropy weight; 0 for plain SAC
};

struct TrainOptions {
    std::size_t total_steps = 30000;
    std::uint64_t seed = 0;
    double stop_at_rho = std::numeric_limits<double>::quiet_NaN();  // early stop when reached
    const GaussianPolicy* init_policy = nullptr;                    // actor warm start
};

/// Extension point for transfer training: `compute` runs between the critic
/// and actor updates of every gradient step and returns the cross-entropy
/// weight; `source`/`ce_rng` feed the cross-entropy term itself.
struct TransferHook {
    std::function<double(SacLearner&, const ReplayBuffer::Batch&)> compute;
    const GaussianPolicy* source = nullptr;
    Rng* ce_rng = nullptr;
};

struct TrainResult {
    std::vector<EvalPoint> trace;
    std::size_t steps_run = 0;
    bool reached_stop = false;
};

/// The environment-interaction loop shared by every learner variant. All
/// randomness flows through named streams of `options.seed`, so variants that
/// share a stream layout produce identical streams for the shared parts.
inline TrainResult train_core(const EnvSpec& spec, SacLearner& learner,
                              const TrainOptions& options, const TransferHook* hook) {
    const SacHyper& hp = learner.hyper();
    PointMassEnv env(spec);
    ReplayBuffer buffer(hp.buffer_capacity, EnvSpec::state_dim, EnvSpec::action_dim);

    Rng env_rng = Rng::stream(options.seed, "env");
    Rng actor_rng = Rng::stream(options.seed, "actor");
    Rng buffer_rng = Rng::stream(options.seed, "buffer");
    Rng upd_rng = Rng::stream(options.seed, "upd");

    if (options.init_policy) learner.set_policy_weights(*options.init_policy);

    TrainResult out;
    double last_beta = hook ? 1.0 : 0.0;

    auto evaluate = [&](std::size_t step) {
        Rng eval_rng = Rng::stream(options.seed, "eval", out.trace.size());
        EvalPoint p;
        p.env_step = step;
        p.eval_episode = out.trace.size();
        p.rho = evaluate_policy(spec, learner.policy(), hp.eval_episodes, eval_rng);
        require(std::isfinite(p.rho), ErrorCode::NumericNan, "non-finite evaluation return");
        p.beta = last_beta;
        out.trace.push_back(p);
        return !std::isnan(options.stop_at_rho) && p.rho >= options.stop_at_rho;
    };

    if (evaluate(0)) {
        out.steps_run = 0;
        out.reached_stop = true;
        return out;
    }

    std::vector<double> state = env.reset(env_rng);
    std::size_t steps_in_episode = 0;
    for (std::size_t step = 1; step <= options.total_steps; ++step) {
        std::vector<double> action(EnvSpec::action_dim);
        if (step <= hp.start_steps) {
            for (std::size_t d = 0; d < EnvSpec::action_dim; ++d)
                action[d] = actor_rng.uniform(spec.action_low[d], spec.action_high[d]);
        } else {
            auto smp = policy_sample(learner.policy(), Mat::row(state), actor_rng);
            action.assign(smp.actions.data.begin(), smp.actions.data.end());
        }

        auto res = env.step(action, env_rng);
        ++steps_in_episode;
        bool horizon_cut = steps_in_episode >= spec.horizon;
        // Horizon truncation keeps done = false: the value beyond the cut
        // still exists, only data collection stops.
        buffer.push(state, action, res.next_state, res.reward, res.terminal);
        if (res.terminal || horizon_cut) {
            state = env.reset(env_rng);
            steps_in_episode = 0;
        } else {
            state = res.next_state;
        }

        if (step > hp.start_steps && step % hp.update_every == 0 &&
            buffer.size() >= hp.batch_size) {
            for (std::size_t u = 0; u < hp.gradient_updates; ++u) {
                auto batch = buffer.sample(hp.batch_size, buffer_rng);
                learner.critic_update(batch, upd_rng);
                double beta = 0.0;
                const GaussianPolicy* ce_source = nullptr;
                Rng* ce_rng = nullptr;
                if (hook) {
                    beta = hook->compute(learner, batch);
                    last_beta = beta;
                    ce_source = hook->source;
                    ce_rng = hook->ce_rng;
                }
                learner.policy_update(batch, upd_rng, ce_source, beta, ce_rng);
                learner.target_update();
            }
        }

        if (step % hp.eval_every == 0) {
            if (evaluate(step)) {
                out.steps_run = step;
                out.reached_stop = true;
                return out;
            }
        }
    }
    out.steps_run = options.total_steps;
    return out;
}

/// Plain soft actor-critic from scratch (or warm-started via options).
inline TrainResult train_sac(const EnvSpec& spec, SacLearner& learner,
                             const TrainOptions& options) {
    return train_core(spec, learner, options, nullptr);
}

}  // namespace xferlab
