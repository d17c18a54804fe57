#pragma once

#include <algorithm>
#include <cmath>
#include <optional>

#include "sac.hpp"

namespace xferlab {

/// Which estimator feeds the adaptive cross-entropy weight.
///  Soft:   gap = E[Q_min(s,a_mu) - alpha log mu(a_mu|s)]
///              - E[Q_min(s,a_pi) - alpha log pi(a_pi|s)]
///  PlainQ: the same expression without the entropy terms.
enum class GapFormula { Soft, PlainQ };

inline GapFormula gap_formula_from_name(const std::string& s) {
    if (s == "soft") return GapFormula::Soft;
    if (s == "plain_q") return GapFormula::PlainQ;
    throw Error(ErrorCode::ConfigBadValue, "unknown gap_formula: " + s);
}

inline const char* gap_formula_name(GapFormula f) {
    return f == GapFormula::Soft ? "soft" : "plain_q";
}

struct AdvantageGapEstimate {
    double source_term = 0.0;  // mean over states of the mu-action term
    double target_term = 0.0;  // mean over states of the pi-action term
    double gap = 0.0;          // source_term - target_term
};

/// One-sample estimate of the source-vs-target advantage gap over a batch of
/// states. Per state: one action from the source policy, one from the
/// current policy; critics are read through the learner (so test overrides
/// apply). Draw order: all source actions first, then all target actions.
inline AdvantageGapEstimate advantage_gap(const SacLearner& learner, const GaussianPolicy& source,
                                          const Mat& states, Rng& rng,
                                          GapFormula formula = GapFormula::Soft) {
    require(states.rows > 0, ErrorCode::Precondition, "advantage gap needs at least one state");
    double alpha = learner.hyper().alpha;
    auto smp_mu = policy_sample(source, states, rng);
    auto smp_pi = policy_sample(learner.policy(), states, rng);

    AdvantageGapEstimate est;
    std::vector<double> s(states.cols), a(source.action_dim);
    for (std::size_t i = 0; i < states.rows; ++i) {
        for (std::size_t d = 0; d < states.cols; ++d) s[d] = states.at(i, d);

        for (std::size_t d = 0; d < source.action_dim; ++d) a[d] = smp_mu.actions.at(i, d);
        double src = learner.q_min(s, a);
        if (formula == GapFormula::Soft) src -= alpha * smp_mu.logps[i];
        est.source_term += src;

        for (std::size_t d = 0; d < source.action_dim; ++d) a[d] = smp_pi.actions.at(i, d);
        double tgt = learner.q_min(s, a);
        if (formula == GapFormula::Soft) tgt -= alpha * smp_pi.logps[i];
        est.target_term += tgt;
    }
    est.source_term /= double(states.rows);
    est.target_term /= double(states.rows);
    est.gap = est.source_term - est.target_term;
    require(std::isfinite(est.gap), ErrorCode::NumericNan, "non-finite advantage gap");
    return est;
}

/// beta = exp(gap), with the exponent clipped for numerical safety.
inline double beta_from_gap(double gap, double clip = 10.0) {
    return std::exp(std::clamp(gap, -clip, clip));
}

/// Keeps the source policy adapting to target data: gradient steps on the
/// usual actor objective (entropy-regularized Q ascent) with the transfer
/// learner's critics held fixed.
class SourcePolicySync {
  public:
    SourcePolicySync(GaussianPolicy source, double lr)
        : policy_(std::move(source)), opt_(policy_.net), lr_(lr) {
        require(lr_ > 0.0, ErrorCode::ConfigBadValue, "source learning rate must be positive");
    }

    GaussianPolicy& policy() { return policy_; }
    const GaussianPolicy& policy() const { return policy_; }

    double update(SacLearner& learner, const Mat& states, Rng& rng) {
        Mat xi(states.rows, policy_.action_dim);
        for (double& v : xi.data) v = rng.normal();

        MlpGrads grads(policy_.net);
        Tape tape;
        auto parts = learner.build_actor_loss(tape, policy_, &grads, states, xi);
        tape.backward(parts.loss);
        adam_step(policy_.net, grads, opt_, lr_);
        return tape.scalar(parts.loss);
    }

  private:
    GaussianPolicy policy_;
    AdamState opt_;
    double lr_;
};

struct TransferOptions {
    std::optional<double> beta_override;  // fixed weight; empty = adaptive
    GapFormula gap_formula = GapFormula::Soft;
    double beta_clip = 10.0;              // clip on the exponent
    double source_lr = 3e-4;
};

struct TransferRunResult {
    TrainResult train;
    GaussianPolicy source_final;  // synced source policy after training
};

/// Advantage-weighted policy transfer on top of the shared training loop.
/// Per gradient step (after the critic update): sync the source policy on
/// the batch, estimate the advantage gap, set beta = exp(gap), then take the
/// actor step on J1 + beta * J2. The actor starts from the source weights
/// unless the caller supplied another initialization.
inline TransferRunResult train_transfer(const EnvSpec& spec, SacLearner& learner,
                                        const GaussianPolicy& source, TrainOptions options,
                                        const TransferOptions& topt) {
    require(source.low == spec.action_low && source.high == spec.action_high,
            ErrorCode::DomainMismatch, "source policy action box must match the target task");

    SourcePolicySync sync(source, topt.source_lr);
    Rng src_rng = Rng::stream(options.seed, "src");
    Rng adv_rng = Rng::stream(options.seed, "adv");
    Rng ce_rng = Rng::stream(options.seed, "ce");

    if (!options.init_policy) options.init_policy = &source;

    TransferHook hook;
    hook.source = &sync.policy();
    hook.ce_rng = &ce_rng;
    hook.compute = [&](SacLearner& l, const ReplayBuffer::Batch& batch) {
        sync.update(l, batch.s, src_rng);
        if (topt.beta_override) return *topt.beta_override;
        auto est = advantage_gap(l, sync.policy(), batch.s, adv_rng, topt.gap_formula);
        return beta_from_gap(est.gap, topt.beta_clip);
    };

    TransferRunResult out{train_core(spec, learner, options, &hook), sync.policy()};
    return out;
}

}  // namespace xferlab
