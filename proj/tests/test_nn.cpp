#include <gtest/gtest.h>

#include <cmath>

#include "testutil.hpp"
#include "xferlab/nn.hpp"

using namespace xferlab;

namespace {

MlpParams random_mlp(const std::vector<std::size_t>& sizes, Activation act, std::uint64_t seed) {
    Rng rng(seed);
    return mlp_init(sizes, act, rng);
}

Mat random_mat(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
    Mat m(r, c);
    for (double& v : m.data) v = scale * rng.normal();
    return m;
}

}  // namespace

TEST(Mlp, ForwardKnownValues) {
    // One linear layer, hand-checkable: y = x W + b.
    MlpParams p;
    p.layer_sizes = {2, 2};
    p.weights.push_back(Mat::from_rows({{1.0, 2.0}, {3.0, 4.0}}));
    p.biases.push_back(Mat::row({0.5, -0.5}));
    p.activations.push_back(Activation::Identity);

    Mat x = Mat::from_rows({{1.0, 1.0}, {2.0, -1.0}});
    Mat y = mlp_forward(p, x);
    EXPECT_DOUBLE_EQ(y.at(0, 0), 1.0 + 3.0 + 0.5);
    EXPECT_DOUBLE_EQ(y.at(0, 1), 2.0 + 4.0 - 0.5);
    EXPECT_DOUBLE_EQ(y.at(1, 0), 2.0 - 3.0 + 0.5);
    EXPECT_DOUBLE_EQ(y.at(1, 1), 4.0 - 4.0 - 0.5);
}

TEST(Mlp, ForwardWithHiddenActivation) {
    // relu(xW1 + b1) W2 + b2 with numbers small enough to verify by hand.
    MlpParams p;
    p.layer_sizes = {1, 2, 1};
    p.weights.push_back(Mat::from_rows({{1.0, -1.0}}));
    p.biases.push_back(Mat::row({0.0, 0.0}));
    p.weights.push_back(Mat::from_rows({{2.0}, {3.0}}));
    p.biases.push_back(Mat::row({0.25}));
    p.activations = {Activation::Relu, Activation::Identity};

    Mat x = Mat::from_rows({{1.5}, {-2.0}});
    Mat y = mlp_forward(p, x);
    // x=1.5: relu(1.5, -1.5) = (1.5, 0) -> 3.0 + 0.25
    EXPECT_DOUBLE_EQ(y.at(0, 0), 3.25);
    // x=-2: relu(-2, 2) = (0, 2) -> 6.0 + 0.25
    EXPECT_DOUBLE_EQ(y.at(1, 0), 6.25);
}

TEST(Mlp, TapeForwardMatchesPlainForward) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto p = random_mlp({3, 8, 8, 2}, Activation::Relu, seed);
        Rng rng(seed + 100);
        Mat x = random_mat(7, 3, rng);

        Mat plain = mlp_forward(p, x);
        Tape tape;
        int xi = tape.input(x);
        int out = mlp_on_tape(tape, p, xi, nullptr);
        const Mat& taped = tape.val(out);

        ASSERT_EQ(plain.rows, taped.rows);
        ASSERT_EQ(plain.cols, taped.cols);
        for (std::size_t i = 0; i < plain.size(); ++i)
            EXPECT_DOUBLE_EQ(plain.data[i], taped.data[i]);
    }
}

TEST(Mlp, ParameterGradientsMatchFiniteDifference) {
    // MSE loss through tanh and relu networks of several shapes.
    std::vector<std::vector<std::size_t>> shapes = {{2, 4, 1}, {3, 5, 5, 2}, {1, 7, 1}, {4, 3, 3, 3}};
    std::uint64_t seed = 11;
    for (const auto& shape : shapes) {
        for (Activation act : {Activation::Tanh, Activation::Relu}) {
            auto p = random_mlp(shape, act, seed);
            Rng rng(seed * 13 + 1);
            Mat x = random_mat(6, shape.front(), rng);
            Mat y = random_mat(6, shape.back(), rng);
            ++seed;

            auto loss_at = [&](const std::vector<double>& flat) {
                MlpParams q = p;
                mlp_unflatten(q, flat);
                Mat out = mlp_forward(q, x);
                double s = 0.0;
                for (std::size_t i = 0; i < out.size(); ++i) {
                    double d = out.data[i] - y.data[i];
                    s += d * d;
                }
                return s / double(out.size());
            };

            MlpGrads grads(p);
            Tape tape;
            int xi = tape.input(x);
            int yi = tape.input(y);
            int out = mlp_on_tape(tape, p, xi, &grads);
            int loss = tape.mean_all(tape.square(tape.sub(out, yi)));
            tape.backward(loss);

            auto analytic = grads_flatten(grads);
            auto numeric = testutil::fd_gradient(loss_at, mlp_flatten(p));
            double err = testutil::max_rel_err(analytic, numeric);
            EXPECT_LT(err, testutil::kGradRelTol)
                << "shape[0]=" << shape.front() << " act=" << activation_name(act);
        }
    }
}

TEST(Tape, InputGradientsMatchFiniteDifference) {
    // d loss / d input through the full op set used by the losses.
    Rng rng(77);
    Mat x0 = random_mat(4, 3, rng, 0.7);
    Mat x1 = random_mat(4, 3, rng, 0.7);

    auto build = [&](const Mat& a, const Mat& b, Tape& tape, int& ia, int& ib) {
        ia = tape.input(a);
        ib = tape.input(b);
        int t = tape.tanh_(ia);
        int e = tape.exp_(tape.scale(ib, 0.3));
        int m = tape.mul(t, e);
        int mn = tape.min_elem(m, ib);
        int cl = tape.clamp(mn, -0.8, 0.8);
        int tl = tape.tanh_log_det(ia);
        int cat = tape.concat_cols(cl, tl);
        int sl = tape.slice_cols(cat, 1, 5);
        int rs = tape.row_sum(tape.square(sl));
        int lg = tape.log_(tape.add_scalar(tape.square(tape.sub(ia, ib)), 1.0));
        int total = tape.add(rs, tape.row_sum(lg));
        return tape.mean_all(tape.add_scalar(total, 0.25));
    };

    Tape tape;
    int ia, ib;
    int loss = build(x0, x1, tape, ia, ib);
    tape.backward(loss);

    std::vector<double> flat;
    flat.insert(flat.end(), x0.data.begin(), x0.data.end());
    flat.insert(flat.end(), x1.data.begin(), x1.data.end());

    auto loss_at = [&](const std::vector<double>& v) {
        Mat a = x0, b = x1;
        std::copy(v.begin(), v.begin() + long(a.size()), a.data.begin());
        std::copy(v.begin() + long(a.size()), v.end(), b.data.begin());
        Tape t2;
        int ja, jb;
        int l = build(a, b, t2, ja, jb);
        return t2.scalar(l);
    };

    std::vector<double> analytic;
    const Mat& ga = tape.grad(ia);
    const Mat& gb = tape.grad(ib);
    analytic.insert(analytic.end(), ga.data.begin(), ga.data.end());
    analytic.insert(analytic.end(), gb.data.begin(), gb.data.end());

    auto numeric = testutil::fd_gradient(loss_at, flat);
    EXPECT_LT(testutil::max_rel_err(analytic, numeric), testutil::kGradRelTol);
}

TEST(Tape, MinElemTieRoutesGradientToFirstInput) {
    Mat a = Mat::row({1.0, 2.0});
    Mat b = Mat::row({1.0, 0.5});
    Tape tape;
    int ia = tape.input(a);
    int ib = tape.input(b);
    int loss = tape.sum_all(tape.min_elem(ia, ib));
    tape.backward(loss);
    EXPECT_DOUBLE_EQ(tape.grad(ia).at(0, 0), 1.0);  // tie at 1.0 -> first input
    EXPECT_DOUBLE_EQ(tape.grad(ib).at(0, 0), 0.0);
    EXPECT_DOUBLE_EQ(tape.grad(ia).at(0, 1), 0.0);
    EXPECT_DOUBLE_EQ(tape.grad(ib).at(0, 1), 1.0);
}

TEST(Tape, ClampZeroesGradientOutsideRange) {
    Mat x = Mat::row({-2.0, 0.0, 2.0});
    Tape tape;
    int xi = tape.input(x);
    int loss = tape.sum_all(tape.clamp(xi, -1.0, 1.0));
    tape.backward(loss);
    EXPECT_DOUBLE_EQ(tape.grad(xi).at(0, 0), 0.0);
    EXPECT_DOUBLE_EQ(tape.grad(xi).at(0, 1), 1.0);
    EXPECT_DOUBLE_EQ(tape.grad(xi).at(0, 2), 0.0);
}

TEST(Tape, TanhLogDetStableForLargeInputs) {
    // Naive log(1 - tanh(x)^2) underflows to -inf near |x| ~ 20; the stable
    // form stays finite and tracks the identity 2(log 2 - x - log1p(e^{-2x})).
    for (double x : {0.0, 1.0, 5.0, 20.0, 50.0, -35.0}) {
        double v = tanh_log_det_scalar(x);
        EXPECT_TRUE(std::isfinite(v));
        double ax = std::fabs(x);
        double expected = 2.0 * (std::log(2.0) - ax - std::log1p(std::exp(-2.0 * ax)));
        EXPECT_NEAR(v, expected, 1e-12);
    }
    EXPECT_NEAR(tanh_log_det_scalar(0.0), 0.0, 1e-15);
}

TEST(Adam, FirstStepMatchesClosedForm) {
    // After one step with fresh moments: m-hat = g, v-hat = g^2, so the
    // update is lr * g / (|g| + eps) regardless of gradient magnitude.
    auto p = random_mlp({2, 3, 1}, Activation::Tanh, 5);
    auto before = mlp_flatten(p);
    MlpGrads g(p);
    Rng rng(6);
    for (auto& m : g.dweights)
        for (double& v : m.data) v = rng.normal();
    for (auto& m : g.dbiases)
        for (double& v : m.data) v = rng.normal();

    AdamState st(p);
    double lr = 1e-3;
    adam_step(p, g, st, lr);

    auto after = mlp_flatten(p);
    auto gflat = grads_flatten(g);
    for (std::size_t i = 0; i < after.size(); ++i) {
        double expected = before[i] - lr * gflat[i] / (std::fabs(gflat[i]) + st.eps);
        EXPECT_NEAR(after[i], expected, 1e-12);
    }
    EXPECT_EQ(st.t, 1);
}

TEST(Adam, NonFiniteGradientThrows) {
    auto p = random_mlp({2, 2}, Activation::Identity, 1);
    MlpGrads g(p);
    g.dweights[0].at(0, 0) = std::nan("");
    AdamState st(p);
    try {
        adam_step(p, g, st, 1e-3);
        FAIL() << "expected throw";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NumericNan);
    }
}

TEST(Polyak, BlendAndEndpoints) {
    auto target = random_mlp({2, 3}, Activation::Identity, 1);
    auto online = random_mlp({2, 3}, Activation::Identity, 2);
    auto t0 = mlp_flatten(target);
    auto o0 = mlp_flatten(online);

    auto t = target;
    polyak_update(t, online, 0.005);
    auto blended = mlp_flatten(t);
    for (std::size_t i = 0; i < blended.size(); ++i)
        EXPECT_NEAR(blended[i], 0.995 * t0[i] + 0.005 * o0[i], 1e-15);

    t = target;
    polyak_update(t, online, 1.0);
    EXPECT_EQ(mlp_flatten(t), o0);

    t = target;
    polyak_update(t, online, 0.0);
    EXPECT_EQ(mlp_flatten(t), t0);
}

TEST(Init, DeterministicAcrossRuns) {
    auto a = random_mlp({4, 16, 16, 2}, Activation::Relu, 99);
    auto b = random_mlp({4, 16, 16, 2}, Activation::Relu, 99);
    EXPECT_EQ(mlp_flatten(a), mlp_flatten(b));
    auto c = random_mlp({4, 16, 16, 2}, Activation::Relu, 100);
    EXPECT_NE(mlp_flatten(a), mlp_flatten(c));
}

TEST(Rng, StreamsAreIndependent) {
    // Consuming draws on one named stream must not shift another stream
    // derived from the same root seed.
    Rng a = Rng::stream(42, "env");
    Rng b = Rng::stream(42, "actor");
    std::vector<double> first;
    for (int i = 0; i < 8; ++i) first.push_back(b.normal());

    Rng a2 = Rng::stream(42, "env");
    for (int i = 0; i < 100; ++i) a2.normal();  // extra consumption
    Rng b2 = Rng::stream(42, "actor");
    for (int i = 0; i < 8; ++i) EXPECT_DOUBLE_EQ(b2.normal(), first[std::size_t(i)]);

    (void)a;
}

TEST(Rng, NormalMomentsSane) {
    Rng rng(7);
    std::vector<double> xs(200000);
    for (auto& x : xs) x = rng.normal();
    EXPECT_NEAR(testutil::mean(xs), 0.0, 0.01);
    EXPECT_NEAR(testutil::sample_std(xs), 1.0, 0.01);
}
