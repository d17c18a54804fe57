#include <gtest/gtest.h>

#include <cmath>

#include "testutil.hpp"
#include "xferlab/sac.hpp"

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

ReplayBuffer::Batch random_batch(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    ReplayBuffer::Batch b;
    b.s = Mat(n, EnvSpec::state_dim);
    b.a = Mat(n, EnvSpec::action_dim);
    b.s2 = Mat(n, EnvSpec::state_dim);
    for (double& v : b.s.data) v = rng.normal();
    for (double& v : b.a.data) v = std::tanh(rng.normal());
    for (double& v : b.s2.data) v = rng.normal();
    b.r.resize(n);
    b.done.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        b.r[i] = rng.normal();
        b.done[i] = i % 5 == 0 ? 1 : 0;
    }
    return b;
}

double plain_qmin(const SacLearner& learner, const std::vector<double>& s,
                  const std::vector<double>& a) {
    return learner.q_min(s, a);
}

}  // namespace

TEST(Sac, CriticTargetFormula) {
    EnvSpec spec;
    SacLearner learner(spec, tiny_hyper(), 3);
    auto batch = random_batch(12, 4);

    Rng u1 = Rng::stream(9, "upd");
    Rng u2 = Rng::stream(9, "upd");
    auto targets = learner.critic_targets(batch, u1);

    // Independent recomputation: fresh learner targets equal online critics,
    // and the next-action draw replays the same stream.
    auto next = policy_sample(learner.policy(), batch.s2, u2);
    const SacHyper& hp = learner.hyper();
    for (std::size_t i = 0; i < 12; ++i) {
        std::vector<double> s2(EnvSpec::state_dim), a2(EnvSpec::action_dim);
        for (std::size_t d = 0; d < EnvSpec::state_dim; ++d) s2[d] = batch.s2.at(i, d);
        for (std::size_t d = 0; d < EnvSpec::action_dim; ++d) a2[d] = next.actions.at(i, d);
        double cont = plain_qmin(learner, s2, a2) - hp.alpha * next.logps[i];
        double expected = batch.r[i] + (batch.done[i] ? 0.0 : hp.gamma * cont);
        EXPECT_NEAR(targets[i], expected, 1e-12);
        if (batch.done[i]) EXPECT_DOUBLE_EQ(targets[i], batch.r[i]);
    }
}

TEST(Sac, CriticLossGradientMatchesFiniteDifference) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        EnvSpec spec;
        SacLearner learner(spec, tiny_hyper(), seed);
        auto batch = random_batch(8, seed + 50);
        Rng u = Rng::stream(seed, "upd");
        auto targets = learner.critic_targets(batch, u);

        MlpGrads g1(learner.q1()), g2(learner.q2());
        Tape tape;
        int loss = learner.build_critic_loss(tape, batch, targets, &g1, &g2);
        tape.backward(loss);

        std::vector<double> analytic = grads_flatten(g1);
        auto a2 = grads_flatten(g2);
        analytic.insert(analytic.end(), a2.begin(), a2.end());

        std::size_t n1 = mlp_flatten(learner.q1()).size();
        auto loss_at = [&](const std::vector<double>& flat) {
            SacLearner probe = learner;
            std::vector<double> f1(flat.begin(), flat.begin() + long(n1));
            std::vector<double> f2(flat.begin() + long(n1), flat.end());
            mlp_unflatten(probe.q1(), f1);
            mlp_unflatten(probe.q2(), f2);
            Mat sa = SacLearner::concat_rows(batch.s, batch.a);
            Mat v1 = mlp_forward(probe.q1(), sa);
            Mat v2 = mlp_forward(probe.q2(), sa);
            double acc = 0.0;
            for (std::size_t i = 0; i < sa.rows; ++i) {
                double d1 = v1.at(i, 0) - targets[i];
                double d2 = v2.at(i, 0) - targets[i];
                acc += d1 * d1 + d2 * d2;
            }
            return acc / double(sa.rows);
        };
        std::vector<double> at = mlp_flatten(learner.q1());
        auto f2 = mlp_flatten(learner.q2());
        at.insert(at.end(), f2.begin(), f2.end());
        auto numeric = testutil::fd_gradient(loss_at, at);
        EXPECT_LT(testutil::max_rel_err(analytic, numeric), testutil::kGradRelTol);
    }
}

TEST(Sac, ActorObjectiveGradientMatchesFiniteDifference) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        EnvSpec spec;
        SacLearner learner(spec, tiny_hyper(), seed + 10);
        auto batch = random_batch(6, seed + 60);
        Rng xr(seed + 70);
        Mat xi(6, EnvSpec::action_dim);
        for (double& v : xi.data) v = xr.normal();

        MlpGrads grads(learner.policy().net);
        Tape tape;
        auto parts = learner.build_actor_loss(tape, learner.policy(), &grads, batch.s, xi);
        tape.backward(parts.loss);

        auto loss_at = [&](const std::vector<double>& flat) {
            GaussianPolicy actor = learner.policy();
            mlp_unflatten(actor.net, flat);
            auto h = policy_heads(actor, batch.s);
            double acc = 0.0;
            for (std::size_t i = 0; i < 6; ++i) {
                std::vector<double> s(EnvSpec::state_dim), a(EnvSpec::action_dim);
                std::vector<double> raw(EnvSpec::action_dim);
                for (std::size_t d = 0; d < EnvSpec::state_dim; ++d) s[d] = batch.s.at(i, d);
                for (std::size_t d = 0; d < EnvSpec::action_dim; ++d) {
                    raw[d] = h.mean.at(i, d) + std::exp(h.log_std.at(i, d)) * xi.at(i, d);
                    a[d] = actor.offset(d) + actor.scale(d) * std::tanh(raw[d]);
                }
                double logp = log_prob_from_raw(actor, h, i, raw.data());
                acc += learner.hyper().alpha * logp - plain_qmin(learner, s, a);
            }
            return acc / 6.0;
        };
        auto numeric = testutil::fd_gradient(loss_at, mlp_flatten(learner.policy().net));
        EXPECT_LT(testutil::max_rel_err(grads_flatten(grads), numeric), testutil::kGradRelTol);
    }
}

TEST(Sac, CrossEntropyGradientMatchesFiniteDifference) {
    EnvSpec spec;
    SacLearner learner(spec, tiny_hyper(), 21);
    Rng src_init(22);
    auto source = make_gaussian_policy(EnvSpec::state_dim, EnvSpec::action_dim, {12, 12},
                                       Activation::Relu, spec.action_low, spec.action_high,
                                       src_init);
    auto batch = random_batch(6, 23);
    Rng xr(24), cr(25);
    Mat xi(6, EnvSpec::action_dim);
    for (double& v : xi.data) v = xr.normal();
    Mat ce_raw = SacLearner::sample_raw(source, batch.s, cr);

    double beta = 0.7;
    MlpGrads grads(learner.policy().net);
    Tape tape;
    auto parts = learner.build_actor_loss(tape, learner.policy(), &grads, batch.s, xi, beta, &ce_raw);
    ASSERT_GE(parts.j2, 0);
    tape.backward(parts.loss);

    auto loss_at = [&](const std::vector<double>& flat) {
        GaussianPolicy actor = learner.policy();
        mlp_unflatten(actor.net, flat);
        auto h = policy_heads(actor, batch.s);
        double acc = 0.0;
        for (std::size_t i = 0; i < 6; ++i) {
            std::vector<double> s(EnvSpec::state_dim), a(EnvSpec::action_dim);
            std::vector<double> raw(EnvSpec::action_dim);
            for (std::size_t d = 0; d < EnvSpec::state_dim; ++d) s[d] = batch.s.at(i, d);
            for (std::size_t d = 0; d < EnvSpec::action_dim; ++d) {
                raw[d] = h.mean.at(i, d) + std::exp(h.log_std.at(i, d)) * xi.at(i, d);
                a[d] = actor.offset(d) + actor.scale(d) * std::tanh(raw[d]);
            }
            double j1_i = learner.hyper().alpha * log_prob_from_raw(actor, h, i, raw.data()) -
                          plain_qmin(learner, s, a);
            double j2_i = -log_prob_from_raw(actor, h, i, &ce_raw.data[i * EnvSpec::action_dim]);
            acc += j1_i + beta * j2_i;
        }
        return acc / 6.0;
    };
    auto numeric = testutil::fd_gradient(loss_at, mlp_flatten(learner.policy().net));
    EXPECT_LT(testutil::max_rel_err(grads_flatten(grads), numeric), testutil::kGradRelTol);
}

TEST(Sac, CombinedGradientDecomposes) {
    // grad(J1 + beta J2) must equal grad(J1) + beta * grad(J2).
    EnvSpec spec;
    SacLearner learner(spec, tiny_hyper(), 31);
    Rng src_init(32);
    auto source = make_gaussian_policy(EnvSpec::state_dim, EnvSpec::action_dim, {12, 12},
                                       Activation::Relu, spec.action_low, spec.action_high,
                                       src_init);
    auto batch = random_batch(8, 33);
    Rng xr(34), cr(35);
    Mat xi(8, EnvSpec::action_dim);
    for (double& v : xi.data) v = xr.normal();
    Mat ce_raw = SacLearner::sample_raw(source, batch.s, cr);

    auto grad_for = [&](double beta, bool with_ce) {
        MlpGrads grads(learner.policy().net);
        Tape tape;
        auto parts = learner.build_actor_loss(tape, learner.policy(), &grads, batch.s, xi,
                                              with_ce ? beta : 0.0, with_ce ? &ce_raw : nullptr);
        tape.backward(parts.loss);
        return grads_flatten(grads);
    };

    auto g_j1 = grad_for(0.0, false);
    auto g_w1 = grad_for(1.0, true);
    std::vector<double> g_j2(g_j1.size());
    for (std::size_t i = 0; i < g_j1.size(); ++i) g_j2[i] = g_w1[i] - g_j1[i];

    double beta = 2.5;
    auto g_combined = grad_for(beta, true);
    std::vector<double> expected(g_j1.size());
    for (std::size_t i = 0; i < g_j1.size(); ++i) expected[i] = g_j1[i] + beta * g_j2[i];
    EXPECT_LT(testutil::max_rel_err(g_combined, expected, 1e-9), 1e-9);
}

TEST(Sac, UpdatesReduceTheirLosses) {
    EnvSpec spec;
    SacLearner learner(spec, tiny_hyper(), 41);
    auto batch = random_batch(32, 42);
    Rng upd = Rng::stream(43, "upd");

    double first_critic = learner.critic_update(batch, upd);
    double last_critic = first_critic;
    for (int i = 0; i < 60; ++i) last_critic = learner.critic_update(batch, upd);
    EXPECT_LT(last_critic, first_critic);

    double first_pi = learner.policy_update(batch, upd);
    double last_pi = first_pi;
    for (int i = 0; i < 60; ++i) last_pi = learner.policy_update(batch, upd);
    EXPECT_LT(last_pi, first_pi);
}

TEST(Sac, SoftValueEstimateMatchesDirectMonteCarlo) {
    EnvSpec spec;
    SacLearner learner(spec, tiny_hyper(), 51);
    learner.q_eval_override = [](const std::vector<double>&, const std::vector<double>& a) {
        return 2.0 * a[0] - a[1];
    };
    std::vector<double> s = {0.2, -0.3, 0.1, 0.0};

    Rng r1(52);
    double est = learner.soft_value_estimate(s, 20000, r1);

    // Independent accumulation with a different stream.
    Rng r2(53);
    Mat srow = Mat::row(s);
    double q_acc = 0.0, lp_acc = 0.0;
    for (int i = 0; i < 20000; ++i) {
        auto smp = policy_sample(learner.policy(), srow, r2);
        q_acc += 2.0 * smp.actions.at(0, 0) - smp.actions.at(0, 1);
        lp_acc += smp.logps[0];
    }
    double direct = (q_acc - learner.hyper().alpha * lp_acc) / 20000.0;
    EXPECT_NEAR(est, direct, 0.05 * std::max(1.0, std::fabs(direct)));
}

TEST(Sac, TrainingRunsDeterministically) {
    EnvSpec spec;
    TrainOptions opts;
    opts.total_steps = 400;
    opts.seed = 77;

    SacLearner a(spec, tiny_hyper(), 7);
    auto ra = train_sac(spec, a, opts);
    SacLearner b(spec, tiny_hyper(), 7);
    auto rb = train_sac(spec, b, opts);

    ASSERT_EQ(ra.trace.size(), 5u);  // evals at 0, 100, 200, 300, 400
    for (std::size_t i = 0; i < ra.trace.size(); ++i) {
        EXPECT_EQ(ra.trace[i].env_step, 100 * i);
        EXPECT_EQ(ra.trace[i].eval_episode, i);
        EXPECT_DOUBLE_EQ(ra.trace[i].rho, rb.trace[i].rho);
        EXPECT_DOUBLE_EQ(ra.trace[i].beta, 0.0);
    }
    EXPECT_EQ(mlp_flatten(a.policy().net), mlp_flatten(b.policy().net));

    TrainOptions other = opts;
    other.seed = 78;
    SacLearner c(spec, tiny_hyper(), 7);
    auto rc = train_sac(spec, c, other);
    EXPECT_NE(ra.trace.back().rho, rc.trace.back().rho);
}

TEST(Sac, EarlyStopTriggersOnThreshold) {
    EnvSpec spec;
    TrainOptions opts;
    opts.total_steps = 400;
    opts.seed = 79;
    opts.stop_at_rho = -1e9;  // any finite return satisfies this
    SacLearner a(spec, tiny_hyper(), 8);
    auto res = train_sac(spec, a, opts);
    EXPECT_TRUE(res.reached_stop);
    EXPECT_EQ(res.steps_run, 0u);
    EXPECT_EQ(res.trace.size(), 1u);
}

TEST(Sac, WarmStartCopiesAndValidatesArchitecture) {
    EnvSpec spec;
    SacLearner a(spec, tiny_hyper(), 9);
    Rng src_init(91);
    auto source = make_gaussian_policy(EnvSpec::state_dim, EnvSpec::action_dim, {12, 12},
                                       Activation::Relu, spec.action_low, spec.action_high,
                                       src_init);
    a.set_policy_weights(source);
    EXPECT_EQ(mlp_flatten(a.policy().net), mlp_flatten(source.net));

    auto wrong = make_gaussian_policy(EnvSpec::state_dim, EnvSpec::action_dim, {10},
                                      Activation::Relu, spec.action_low, spec.action_high,
                                      src_init);
    try {
        a.set_policy_weights(wrong);
        FAIL() << "expected throw";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DomainMismatch);
    }
}
