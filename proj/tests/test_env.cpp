#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "testutil.hpp"
#include "xferlab/env.hpp"
#include "xferlab/replay.hpp"

using namespace xferlab;

TEST(EnvSpec, JsonRoundTrip) {
    EnvSpec s;
    s.damping = 2.5;
    s.reward_mode = RewardMode::ForwardProgress;
    s.goal = {0.4, -0.3};
    auto j = s.to_json();
    auto back = EnvSpec::from_json(j, "test");
    EXPECT_EQ(back.damping, 2.5);
    EXPECT_EQ(back.reward_mode, RewardMode::ForwardProgress);
    EXPECT_EQ(back.goal, s.goal);
    EXPECT_EQ(canonical_json(back.to_json()), canonical_json(j));
}

TEST(EnvSpec, RejectsUnknownAndBadKeys) {
    Json j = EnvSpec{}.to_json();
    j["not_a_field"] = 1;
    try {
        EnvSpec::from_json(j, "test");
        FAIL() << "expected throw";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ConfigUnknownKey);
    }

    Json bad = EnvSpec{}.to_json();
    bad["mass"] = -1.0;
    try {
        EnvSpec::from_json(bad, "test");
        FAIL() << "expected throw";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ConfigBadValue);
    }

    Json bad_mode = EnvSpec{}.to_json();
    bad_mode["reward_mode"] = "bogus";
    EXPECT_THROW(EnvSpec::from_json(bad_mode, "test"), Error);
}

TEST(PointMass, SemiImplicitEulerStepIsExact) {
    EnvSpec spec;
    spec.mass = 2.0;
    spec.damping = 0.5;
    spec.dt = 0.1;
    PointMassEnv env(spec);
    env.set_state({0.3, -0.2, 1.0, -0.5});
    Rng rng(0);
    auto res = env.step({0.8, -0.6}, rng);
    // v' = v + dt*(f - damping*v)/mass, then x' = x + dt*v'.
    double vx = 1.0 + 0.1 * (0.8 - 0.5 * 1.0) / 2.0;
    double vy = -0.5 + 0.1 * (-0.6 - 0.5 * -0.5) / 2.0;
    EXPECT_DOUBLE_EQ(res.next_state[2], vx);
    EXPECT_DOUBLE_EQ(res.next_state[3], vy);
    EXPECT_DOUBLE_EQ(res.next_state[0], 0.3 + 0.1 * vx);
    EXPECT_DOUBLE_EQ(res.next_state[1], -0.2 + 0.1 * vy);
}

TEST(PointMass, RewardModes) {
    EnvSpec spec;
    spec.goal = {0.0, 0.0};
    spec.reward_scale = 2.0;
    PointMassEnv env(spec);
    Rng rng(0);

    env.set_state({0.6, 0.8, 0.0, 0.0});  // distance 1.0
    auto res = env.step({0.0, 0.0}, rng);
    double dist_after = env.distance_to_goal(res.next_state);
    EXPECT_DOUBLE_EQ(res.reward, -2.0 * dist_after);

    EnvSpec fws = spec;
    fws.reward_mode = RewardMode::ForwardProgress;
    PointMassEnv env2(fws);
    env2.set_state({0.6, 0.8, 0.0, 0.0});
    auto res2 = env2.step({-0.6, -0.8}, rng);
    double after2 = env2.distance_to_goal(res2.next_state);
    EXPECT_NEAR(res2.reward, 2.0 * (1.0 - after2), 1e-12);

    // Negative reward_scale flips the sign (the adversarial perturbation).
    EnvSpec adv = spec;
    adv.reward_scale = -1.0;
    PointMassEnv env3(adv);
    env3.set_state({0.6, 0.8, 0.0, 0.0});
    auto res3 = env3.step({0.0, 0.0}, rng);
    EXPECT_GT(res3.reward, 0.0);
}

TEST(PointMass, TerminatesInsideGoalBall) {
    EnvSpec spec;
    spec.goal = {0.0, 0.0};
    spec.goal_radius = 0.2;
    PointMassEnv env(spec);
    Rng rng(0);
    env.set_state({0.15, 0.0, 0.0, 0.0});
    auto res = env.step({0.0, 0.0}, rng);
    EXPECT_TRUE(res.terminal);
}

TEST(PointMass, RejectsOutOfBoundsAction) {
    PointMassEnv env(EnvSpec{});
    Rng rng(0);
    env.set_state({0.0, 0.0, 0.0, 0.0});
    try {
        env.step({1.5, 0.0}, rng);
        FAIL() << "expected throw";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ActionOutOfBounds);
    }
}

TEST(PointMass, PdControllerReachesGoal) {
    EnvSpec spec;
    PointMassEnv env(spec);
    Rng rng(0);
    env.set_state({1.0, -1.0, 0.0, 0.0});
    bool reached = false;
    for (std::size_t t = 0; t < spec.horizon; ++t) {
        auto res = env.step(pd_controller_action(spec, env.state()), rng);
        if (res.terminal) {
            reached = true;
            break;
        }
    }
    EXPECT_TRUE(reached);
}

TEST(PointMass, ProcessNoiseRespectsStream) {
    EnvSpec spec;
    spec.process_noise = 0.1;
    PointMassEnv a(spec), b(spec), c(spec);
    Rng ra(5), rb(5), rc(6);
    a.set_state({0.5, 0.5, 0.0, 0.0});
    b.set_state({0.5, 0.5, 0.0, 0.0});
    c.set_state({0.5, 0.5, 0.0, 0.0});
    auto sa = a.step({0.3, 0.3}, ra);
    auto sb = b.step({0.3, 0.3}, rb);
    auto sc = c.step({0.3, 0.3}, rc);
    EXPECT_EQ(sa.next_state, sb.next_state);
    EXPECT_NE(sa.next_state, sc.next_state);
}

TEST(Replay, RingBufferOverwritesOldest) {
    ReplayBuffer buf(2, 1, 1);
    buf.push({1.0}, {0.0}, {1.0}, 1.0, false);
    buf.push({2.0}, {0.0}, {2.0}, 2.0, false);
    buf.push({3.0}, {0.0}, {3.0}, 3.0, true);
    EXPECT_EQ(buf.size(), 2u);
    Rng rng(1);
    std::set<double> seen;
    for (int i = 0; i < 64; ++i) {
        auto b = buf.sample(1, rng);
        seen.insert(b.r[0]);
        if (b.r[0] == 3.0) EXPECT_EQ(b.done[0], 1);
    }
    EXPECT_EQ(seen, (std::set<double>{2.0, 3.0}));
}

TEST(Replay, BatchShapesAndDeterminism) {
    ReplayBuffer buf(100, 4, 2);
    Rng fill(2);
    for (int i = 0; i < 50; ++i)
        buf.push(fill.normal_vec(4), fill.normal_vec(2), fill.normal_vec(4), fill.normal(), false);
    Rng ra(3), rb(3);
    auto a = buf.sample(16, ra);
    auto b = buf.sample(16, rb);
    EXPECT_EQ(a.s.rows, 16u);
    EXPECT_EQ(a.s.cols, 4u);
    EXPECT_EQ(a.a.cols, 2u);
    EXPECT_EQ(a.s.data, b.s.data);
    EXPECT_EQ(a.r, b.r);
}

TEST(Replay, RejectsEmptySampleAndBadTransitions) {
    ReplayBuffer buf(8, 2, 1);
    Rng rng(1);
    EXPECT_THROW(buf.sample(1, rng), Error);
    EXPECT_THROW(buf.push({1.0}, {0.0}, {1.0, 2.0}, 0.0, false), Error);  // bad dims
    try {
        buf.push({1.0, 2.0}, {std::nan("")}, {1.0, 2.0}, 0.0, false);
        FAIL() << "expected throw";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NumericNan);
    }
}
