#include <gtest/gtest.h>

#include <cmath>

#include "testutil.hpp"
#include "xferlab/apt.hpp"

using namespace xferlab;

namespace {

SacHyper tiny_hyper() {
    SacHyper hp;
    hp.hidden = {12, 12};
    hp.buffer_capacity = 2000;
    hp.batch_size = 16;
    hp.start_steps = 40;
    hp.update_every = 20;
    hp.gradient_updates = 5;
    hp.eval_every = 100;
    hp.eval_episodes = 2;
    return hp;
}

GaussianPolicy constant_policy(const EnvSpec& spec, double mean_raw, double log_std) {
    // Matches tiny_hyper()'s architecture so learners can adopt the weights.
    Rng rng(1);
    auto p = make_gaussian_policy(EnvSpec::state_dim, EnvSpec::action_dim, {12, 12},
                                  Activation::Relu, spec.action_low, spec.action_high, rng);
    for (auto& w : p.net.weights) w.zero();
    for (auto& b : p.net.biases) b.zero();
    for (std::size_t d = 0; d < p.action_dim; ++d) {
        p.net.biases.back().at(0, d) = mean_raw;
        p.net.biases.back().at(0, p.action_dim + d) = log_std;
    }
    return p;
}

Mat random_states(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    Mat m(n, EnvSpec::state_dim);
    for (double& v : m.data) v = rng.normal();
    return m;
}

}  // namespace

TEST(AdvantageGap, ConstantCriticGivesExactlyZeroPlainGap) {
    EnvSpec spec;
    SacLearner learner(spec, tiny_hyper(), 1);
    learner.q_eval_override = [](const std::vector<double>&, const std::vector<double>&) {
        return 3.7;
    };
    Rng rng(2);
    auto est = advantage_gap(learner, learner.policy(), random_states(64, 3), rng,
                             GapFormula::PlainQ);
    EXPECT_DOUBLE_EQ(est.gap, 0.0);  // identical accumulations cancel exactly
    EXPECT_NEAR(est.source_term, 3.7, 1e-12);
    EXPECT_NEAR(est.target_term, 3.7, 1e-12);
}

TEST(AdvantageGap, LinearCriticSeparatedPolicies) {
    // Q(s,a) = a_0; source concentrated at tanh(0.5), target at tanh(-0.5):
    // plain gap -> 2 tanh(0.5), beta -> e^{2 tanh(0.5)}.
    EnvSpec spec;
    SacLearner learner(spec, tiny_hyper(), 4);
    learner.q_eval_override = [](const std::vector<double>&, const std::vector<double>& a) {
        return a[0];
    };
    auto source = constant_policy(spec, 0.5, -20.0);
    auto target = constant_policy(spec, -0.5, -20.0);
    learner.set_policy_weights(target);

    Rng rng(5);
    auto est = advantage_gap(learner, source, random_states(32, 6), rng, GapFormula::PlainQ);
    double expected = 2.0 * std::tanh(0.5);
    EXPECT_NEAR(est.gap, expected, 1e-6);
    EXPECT_NEAR(beta_from_gap(est.gap), std::exp(expected), 1e-5);

    // Swapping roles flips the sign: adversarial guidance shrinks beta.
    auto est2 = advantage_gap(learner, target, random_states(32, 7), rng, GapFormula::PlainQ);
    EXPECT_NEAR(est2.gap, 0.0, 1e-6);  // same policy on both sides now
}

TEST(AdvantageGap, IdenticalPoliciesSoftGapCentersOnZero) {
    EnvSpec spec;
    SacLearner learner(spec, tiny_hyper(), 8);
    Rng rng(9);
    std::vector<double> gaps;
    for (int i = 0; i < 4000; ++i) {
        auto est =
            advantage_gap(learner, learner.policy(), random_states(1, 1000 + std::uint64_t(i)),
                          rng, GapFormula::Soft);
        gaps.push_back(est.gap);
    }
    double m = testutil::mean(gaps);
    double se = testutil::sample_std(gaps) / std::sqrt(double(gaps.size()));
    EXPECT_LT(std::fabs(m), 3.0 * se) << "mean " << m << " se " << se;
}

TEST(Beta, IdentitiesAndClipping) {
    EXPECT_DOUBLE_EQ(beta_from_gap(0.0), 1.0);
    // Uniform shift of the gap multiplies beta by e^c.
    for (double g : {-3.0, -0.5, 0.0, 1.2, 4.0}) {
        for (double c : {-2.0, 0.7, 3.0}) {
            double lhs = beta_from_gap(g + c);
            double rhs = std::exp(c) * beta_from_gap(g);
            EXPECT_LT(std::fabs(lhs - rhs) / rhs, 1e-9);
        }
    }
    EXPECT_DOUBLE_EQ(beta_from_gap(50.0), std::exp(10.0));
    EXPECT_DOUBLE_EQ(beta_from_gap(-50.0), std::exp(-10.0));
    EXPECT_DOUBLE_EQ(beta_from_gap(25.0, 3.0), std::exp(3.0));
}

TEST(CrossEntropy, MatchesClosedFormForUnsquashedGaussians) {
    // E_mu[-log pi] = log s_pi + 0.5 log(2 pi) + (s_mu^2 + (m_mu - m_pi)^2) / (2 s_pi^2)
    double m_mu = 0.4, s_mu = 0.7, m_pi = -0.2, s_pi = 1.3;
    Rng rng_init(10);
    auto mk = [&](double mean, double sigma) {
        auto p = make_gaussian_policy(2, 1, {6}, Activation::Tanh, {}, {}, rng_init,
                                      /*squash=*/false);
        for (auto& w : p.net.weights) w.zero();
        for (auto& b : p.net.biases) b.zero();
        p.net.biases.back().at(0, 0) = mean;
        p.net.biases.back().at(0, 1) = std::log(sigma);
        return p;
    };
    auto mu = mk(m_mu, s_mu);
    auto pi = mk(m_pi, s_pi);

    std::size_t n = 200000;
    Mat states(n, 2, 0.0);
    Rng draw(11);
    Mat raw = SacLearner::sample_raw(mu, states, draw);

    Tape tape;
    int s_node = tape.input(states);
    auto heads = policy_heads_on_tape(tape, pi, s_node, nullptr);
    int logp = policy_log_prob_raw_on_tape(tape, pi, heads, raw);
    double ce = -tape.scalar(tape.mean_all(logp));

    double closed = std::log(s_pi) + kHalfLog2Pi +
                    (s_mu * s_mu + (m_mu - m_pi) * (m_mu - m_pi)) / (2.0 * s_pi * s_pi);
    EXPECT_NEAR(ce, closed, 0.01);
}

TEST(SourceSync, UpdatesDescendTheActorObjective) {
    EnvSpec spec;
    SacLearner learner(spec, tiny_hyper(), 12);
    auto source = constant_policy(spec, 0.3, std::log(0.5));
    SourcePolicySync sync(source, 1e-3);
    Mat states = random_states(32, 13);
    Rng rng(14);
    double first = sync.update(learner, states, rng);
    double last = first;
    for (int i = 0; i < 80; ++i) last = sync.update(learner, states, rng);
    EXPECT_LT(last, first);
    EXPECT_NE(mlp_flatten(sync.policy().net), mlp_flatten(source.net));
}

TEST(Transfer, ZeroWeightOverrideIsBitIdenticalToWarmStartBaseline) {
    // With the cross-entropy weight pinned to zero, the transfer learner and
    // a warm-started baseline consume identical random streams for every
    // shared component, so the runs must agree to the last bit.
    EnvSpec spec;
    Rng src_init(99);
    auto source = make_gaussian_policy(EnvSpec::state_dim, EnvSpec::action_dim, {12, 12},
                                       Activation::Relu, spec.action_low, spec.action_high,
                                       src_init);

    TrainOptions opts;
    opts.total_steps = 300;
    opts.seed = 11;

    SacLearner a(spec, tiny_hyper(), 5);
    TransferOptions topt;
    topt.beta_override = 0.0;
    auto ra = train_transfer(spec, a, source, opts, topt);

    SacLearner b(spec, tiny_hyper(), 5);
    TrainOptions opts_b = opts;
    opts_b.init_policy = &source;
    auto rb = train_sac(spec, b, opts_b);

    ASSERT_EQ(ra.train.trace.size(), rb.trace.size());
    for (std::size_t i = 0; i < rb.trace.size(); ++i)
        EXPECT_DOUBLE_EQ(ra.train.trace[i].rho, rb.trace[i].rho) << "eval " << i;
    EXPECT_EQ(mlp_flatten(a.policy().net), mlp_flatten(b.policy().net));
    EXPECT_EQ(mlp_flatten(a.q1()), mlp_flatten(b.q1()));
}

TEST(Transfer, AdaptiveRunProducesFiniteBetasAndSyncsSource) {
    EnvSpec spec;
    Rng src_init(101);
    auto source = make_gaussian_policy(EnvSpec::state_dim, EnvSpec::action_dim, {12, 12},
                                       Activation::Relu, spec.action_low, spec.action_high,
                                       src_init);
    TrainOptions opts;
    opts.total_steps = 300;
    opts.seed = 21;
    SacLearner a(spec, tiny_hyper(), 6);
    auto res = train_transfer(spec, a, source, opts, TransferOptions{});
    ASSERT_EQ(res.train.trace.size(), 4u);
    for (const auto& p : res.train.trace) {
        EXPECT_TRUE(std::isfinite(p.beta));
        EXPECT_GT(p.beta, 0.0);
    }
    // Updates happened after step 40 (start_steps), so the source moved.
    EXPECT_NE(mlp_flatten(res.source_final.net), mlp_flatten(source.net));
    // Deterministic repeat.
    SacLearner b(spec, tiny_hyper(), 6);
    auto res2 = train_transfer(spec, b, source, opts, TransferOptions{});
    for (std::size_t i = 0; i < res.train.trace.size(); ++i) {
        EXPECT_DOUBLE_EQ(res.train.trace[i].rho, res2.train.trace[i].rho);
        EXPECT_DOUBLE_EQ(res.train.trace[i].beta, res2.train.trace[i].beta);
    }
}

TEST(Transfer, RejectsMismatchedActionBox) {
    EnvSpec spec;
    Rng src_init(103);
    auto source = make_gaussian_policy(EnvSpec::state_dim, EnvSpec::action_dim, {12, 12},
                                       Activation::Relu, {-2.0, -2.0}, {2.0, 2.0}, src_init);
    SacLearner a(spec, tiny_hyper(), 7);
    TrainOptions opts;
    opts.total_steps = 100;
    try {
        train_transfer(spec, a, source, opts, TransferOptions{});
        FAIL() << "expected throw";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DomainMismatch);
    }
}
