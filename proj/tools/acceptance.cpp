// Acceptance suite: runs every shipped claim end to end against the frozen
// presets in configs/ and prints one pass/fail line per criterion. All
// tolerances and budgets are pinned here as constants. Exit code is the
// number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "xferlab/cli.hpp"

#ifndef XFERLAB_REPO_DIR
#define XFERLAB_REPO_DIR "."
#endif

using namespace xferlab;

namespace {

// ---- pinned tolerances and budgets ----------------------------------------
constexpr double kBoundSlackTol = 1e-9;       // criterion 1
constexpr double kBoundBudgetS = 60.0;        // criterion 1
constexpr double kToyNonnegFrac = 0.90;       // criterion 2
constexpr double kToyOrderFrac = 0.70;        // criterion 2
constexpr double kToyBudgetS = 120.0;         // criterion 2
constexpr double kGradRelTol = 1e-4;          // criterion 4
constexpr double kGradFloor = 1e-6;           // criterion 4 (abs floor in rel err)
constexpr std::size_t kGradConfigs = 10;      // criterion 4
constexpr std::size_t kBetaSamples = 100000;  // criterion 5
constexpr double kBetaLo = 0.9, kBetaHi = 1.1;  // criterion 5
constexpr double kShiftTol = 1e-9;            // criterion 5
constexpr std::size_t kSacMinSeeds = 8;       // criterion 6 (of 10)
constexpr double kSacBudgetS = 600.0;         // criterion 6
constexpr double kAucWinFrac = 0.80;          // criterion 7 (similar target)
constexpr double kAdversarialRatio = 0.90;    // criterion 7 (adversarial target)
constexpr std::size_t kLadderMinSeeds = 4;    // criterion 8 (of 5)
constexpr double kRewardXiPFactor = 2.0;      // criterion 8: xi_P <= 2x self floor
constexpr double kRewardXiRFactor = 5.0;      // criterion 8: xi_R > 5x self floor
constexpr double kAblationRatio = 0.95;       // criterion 10

const std::string kRepo = XFERLAB_REPO_DIR;

struct CriterionResult {
    int id = 0;
    std::string name;
    bool pass = false;
    std::string detail;
};

double now_minus(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt1(double x) {
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(1) << x;
    return ss.str();
}

std::string fmt3(double x) {
    std::ostringstream ss;
    ss << std::setprecision(3) << x;
    return ss.str();
}

std::string tmp_dir_for(const std::string& tag) {
    std::string d = (std::filesystem::temp_directory_path() / "xferlab_acceptance" / tag).string();
    std::filesystem::remove_all(d);
    ensure_dir(d);
    return d;
}

ExperimentConfig preset(const std::string& name) {
    return load_experiment_config(kRepo + "/configs/" + name);
}

// ---- criterion 1: value-gap bound sweep -----------------------------------
CriterionResult check_bound() {
    CriterionResult r{1, "value-gap bound sweep", false, ""};
    ExperimentConfig cfg = preset("bound_default.json");
    std::string dir = tmp_dir_for("bound");
    auto t0 = std::chrono::steady_clock::now();
    std::vector<std::string> files;
    Json summary = run_bound(cfg, dir, "acc", &files);
    double secs = now_minus(t0);
    std::size_t pairs = summary["pairs"].get<std::size_t>();
    std::size_t violations = summary["violations"].get<std::size_t>();
    double min_slack = summary["min_slack"].get<double>();
    r.pass = pairs == 1000 && violations == 0 && min_slack >= -kBoundSlackTol &&
             secs <= kBoundBudgetS;
    r.detail = std::to_string(pairs) + " pairs, " + std::to_string(violations) +
               " violations, min slack " + fmt3(min_slack) + ", " + fmt1(secs) + "s (budget " +
               fmt1(kBoundBudgetS) + "s)";
    return r;
}

// ---- criteria 2 and 3: four-room reproduction + exact-value consistency ---
void check_toy(CriterionResult* c2, CriterionResult* c3) {
    *c2 = {2, "four-room relative transfer", false, ""};
    *c3 = {3, "exact-value consistency on tabular runs", false, ""};
    ExperimentConfig cfg = preset("toy_default.json");
    std::string dir = tmp_dir_for("toy");
    auto t0 = std::chrono::steady_clock::now();
    std::vector<std::string> files;
    Json summary = run_toy(cfg, dir, "acc", &files);
    double secs = now_minus(t0);

    double f1 = summary["targets"][0]["tau_nonneg_fraction"].get<double>();
    double f2 = summary["targets"][1]["tau_nonneg_fraction"].get<double>();
    double order = summary["tau1_ge_tau2_fraction"].get<double>();
    c2->pass = f1 >= kToyNonnegFrac && f2 >= kToyNonnegFrac && order >= kToyOrderFrac &&
               secs <= kToyBudgetS;
    c2->detail = "tau>=0 on " + fmt3(f1) + "/" + fmt3(f2) + " of early window (need >= " +
                 fmt3(kToyNonnegFrac) + "), tau1>=tau2 on " + fmt3(order) + " (need >= " +
                 fmt3(kToyOrderFrac) + "), " + fmt1(secs) + "s (budget " + fmt1(kToyBudgetS) + "s)";

    std::size_t checked = 0, violations = 0;
    for (const auto& t : summary["targets"]) {
        checked += t["tau_soundness"]["checked"].get<std::size_t>();
        violations += t["tau_soundness"]["violations"].get<std::size_t>();
    }
    c3->pass = checked > 0 && violations == 0;
    c3->detail = std::to_string(violations) + " counterexamples in " + std::to_string(checked) +
                 " exact checks";
}

// ---- criterion 4: gradient suite vs central finite differences ------------

std::vector<double> fd_gradient(const std::function<double(const std::vector<double>&)>& f,
                                std::vector<double> x, double eps = 1e-5) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        double orig = x[i];
        x[i] = orig + eps;
        double fp = f(x);
        x[i] = orig - eps;
        double fm = f(x);
        x[i] = orig;
        g[i] = (fp - fm) / (2.0 * eps);
    }
    return g;
}

double max_rel_err(const std::vector<double>& a, const std::vector<double>& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double scale = std::max({kGradFloor, std::fabs(a[i]), std::fabs(b[i])});
        worst = std::max(worst, std::fabs(a[i] - b[i]) / scale);
    }
    return worst;
}

SacHyper grad_hyper(std::uint64_t k) {
    SacHyper hp;
    const std::vector<std::vector<std::size_t>> shapes = {{8}, {12}, {8, 8}, {16}};
    hp.hidden = shapes[k % shapes.size()];
    hp.activation = k % 2 == 0 ? Activation::Relu : Activation::Tanh;
    hp.buffer_capacity = 256;
    hp.batch_size = 8;
    return hp;
}

ReplayBuffer::Batch grad_batch(std::size_t n, std::uint64_t seed) {
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
        b.done[i] = i % 4 == 0 ? 1 : 0;
    }
    return b;
}

std::vector<double> grads_to_flat(const MlpGrads& g) {
    std::vector<double> out;
    for (std::size_t l = 0; l < g.dweights.size(); ++l) {
        out.insert(out.end(), g.dweights[l].data.begin(), g.dweights[l].data.end());
        out.insert(out.end(), g.dbiases[l].data.begin(), g.dbiases[l].data.end());
    }
    return out;
}

CriterionResult check_gradients() {
    CriterionResult r{4, "analytic gradients vs finite differences", false, ""};
    double worst = 0.0;
    std::string worst_loss = "-";
    auto record = [&](const char* loss, double err) {
        if (err > worst) {
            worst = err;
            worst_loss = loss;
        }
    };

    for (std::uint64_t k = 0; k < kGradConfigs; ++k) {
        EnvSpec spec;
        SacHyper hp = grad_hyper(k);
        SacLearner learner(spec, hp, 1000 + k);
        auto batch = grad_batch(hp.batch_size, 2000 + k);
        Rng xr(3000 + k);
        Mat xi(batch.s.rows, EnvSpec::action_dim);
        for (double& v : xi.data) v = xr.normal();

        // actor objective (entropy-regularized Q ascent)
        {
            MlpGrads grads(learner.policy().net);
            Tape tape;
            auto parts = learner.build_actor_loss(tape, learner.policy(), &grads, batch.s, xi);
            tape.backward(parts.loss);
            auto loss_at = [&](const std::vector<double>& flat) {
                SacLearner probe = learner;
                GaussianPolicy actor = probe.policy();
                mlp_unflatten(actor.net, flat);
                MlpGrads scratch(actor.net);
                Tape t2;
                auto p2 = probe.build_actor_loss(t2, actor, &scratch, batch.s, xi);
                return t2.scalar(p2.loss);
            };
            auto numeric = fd_gradient(loss_at, mlp_flatten(learner.policy().net));
            record("actor", max_rel_err(grads_to_flat(grads), numeric));
        }

        // cross-entropy term toward fixed source draws, isolated
        {
            Rng src_rng(4000 + k);
            auto source = make_gaussian_policy(EnvSpec::state_dim, EnvSpec::action_dim, {10},
                                               Activation::Relu, spec.action_low, spec.action_high,
                                               src_rng);
            Rng cr(5000 + k);
            Mat ce_raw = SacLearner::sample_raw(source, batch.s, cr);
            MlpGrads grads(learner.policy().net);
            Tape tape;
            auto parts =
                learner.build_actor_loss(tape, learner.policy(), &grads, batch.s, xi, 1.0, &ce_raw);
            tape.backward(parts.j2);
            auto loss_at = [&](const std::vector<double>& flat) {
                SacLearner probe = learner;
                GaussianPolicy actor = probe.policy();
                mlp_unflatten(actor.net, flat);
                MlpGrads scratch(actor.net);
                Tape t2;
                auto p2 = probe.build_actor_loss(t2, actor, &scratch, batch.s, xi, 1.0, &ce_raw);
                return t2.scalar(p2.j2);
            };
            auto numeric = fd_gradient(loss_at, mlp_flatten(learner.policy().net));
            record("cross-entropy", max_rel_err(grads_to_flat(grads), numeric));
        }

        // critic regression loss (both critics jointly)
        {
            Rng u = Rng::stream(6000 + k, "upd");
            auto targets = learner.critic_targets(batch, u);
            MlpGrads g1(learner.q1()), g2(learner.q2());
            Tape tape;
            int loss = learner.build_critic_loss(tape, batch, targets, &g1, &g2);
            tape.backward(loss);
            std::vector<double> analytic = grads_to_flat(g1);
            auto a2 = grads_to_flat(g2);
            analytic.insert(analytic.end(), a2.begin(), a2.end());
            std::size_t n1 = mlp_flatten(learner.q1()).size();
            auto loss_at = [&](const std::vector<double>& flat) {
                SacLearner probe = learner;
                std::vector<double> f1(flat.begin(), flat.begin() + long(n1));
                std::vector<double> f2(flat.begin() + long(n1), flat.end());
                mlp_unflatten(probe.q1(), f1);
                mlp_unflatten(probe.q2(), f2);
                MlpGrads s1(probe.q1()), s2(probe.q2());
                Tape t2;
                int l2 = probe.build_critic_loss(t2, batch, targets, &s1, &s2);
                return t2.scalar(l2);
            };
            std::vector<double> at = mlp_flatten(learner.q1());
            auto f2 = mlp_flatten(learner.q2());
            at.insert(at.end(), f2.begin(), f2.end());
            auto numeric = fd_gradient(loss_at, at);
            record("critic", max_rel_err(analytic, numeric));
        }

        // dynamics-model and reward-model regression losses
        for (int head = 0; head < 2; ++head) {
            std::size_t in_dim = EnvSpec::state_dim + EnvSpec::action_dim;
            std::size_t out_dim = head == 0 ? EnvSpec::state_dim : 1;
            Rng init(7000 + 2 * k + std::uint64_t(head));
            std::vector<std::size_t> sizes;
            sizes.push_back(in_dim);
            for (auto h : grad_hyper(k).hidden) sizes.push_back(h);
            sizes.push_back(out_dim);
            MlpParams net = mlp_init(sizes, grad_hyper(k).activation, init);
            Mat x(8, in_dim), y(8, out_dim);
            for (double& v : x.data) v = init.normal();
            for (double& v : y.data) v = init.normal();
            MlpGrads grads(net);
            Tape tape;
            int loss = mse_loss_on_tape(tape, net, x, y, &grads);
            tape.backward(loss);
            auto loss_at = [&](const std::vector<double>& flat) {
                MlpParams probe = net;
                mlp_unflatten(probe, flat);
                MlpGrads scratch(probe);
                Tape t2;
                int l2 = mse_loss_on_tape(t2, probe, x, y, &scratch);
                return t2.scalar(l2);
            };
            auto numeric = fd_gradient(loss_at, mlp_flatten(net));
            record(head == 0 ? "dynamics-model" : "reward-model",
                   max_rel_err(grads_to_flat(grads), numeric));
        }
    }

    r.pass = worst <= kGradRelTol;
    r.detail = "5 losses x " + std::to_string(kGradConfigs) + " configs, worst rel err " +
               fmt3(worst) + " (" + worst_loss + ", tol " + fmt3(kGradRelTol) + ")";
    return r;
}

// ---- criterion 5: regularizer-weight identities ---------------------------
CriterionResult check_beta() {
    CriterionResult r{5, "regularizer-weight identities", false, ""};

    // identical source and target policies: the advantage gap centers on zero
    EnvSpec spec;
    SacHyper hp;
    hp.hidden = {16, 16};
    hp.buffer_capacity = 256;
    hp.batch_size = 8;
    SacLearner learner(spec, hp, 77);
    GaussianPolicy source = learner.policy();

    Rng srng(78);
    Mat states(kBetaSamples, EnvSpec::state_dim);
    for (double& v : states.data) v = srng.normal();

    Rng grng(79);
    AdvantageGapEstimate est = advantage_gap(learner, source, states, grng, GapFormula::Soft);

    // per-sample terms with the exact same draw order, for the standard error
    Rng grng2(79);
    auto smp_mu = policy_sample(source, states, grng2);
    auto smp_pi = policy_sample(learner.policy(), states, grng2);
    double alpha = hp.alpha;
    std::vector<double> d(kBetaSamples);
    std::vector<double> s(EnvSpec::state_dim), a(EnvSpec::action_dim);
    for (std::size_t i = 0; i < kBetaSamples; ++i) {
        for (std::size_t k = 0; k < EnvSpec::state_dim; ++k) s[k] = states.at(i, k);
        for (std::size_t k = 0; k < EnvSpec::action_dim; ++k) a[k] = smp_mu.actions.at(i, k);
        double src = learner.q_min(s, a) - alpha * smp_mu.logps[i];
        for (std::size_t k = 0; k < EnvSpec::action_dim; ++k) a[k] = smp_pi.actions.at(i, k);
        double tgt = learner.q_min(s, a) - alpha * smp_pi.logps[i];
        d[i] = src - tgt;
    }
    double mean = 0.0;
    for (double x : d) mean += x;
    mean /= double(kBetaSamples);
    double var = 0.0;
    for (double x : d) var += (x - mean) * (x - mean);
    double se = std::sqrt(var / double(kBetaSamples - 1) / double(kBetaSamples));
    bool recompute_ok = std::fabs(mean - est.gap) <= 1e-9;
    bool centered = std::fabs(est.gap) <= 3.0 * se;
    double beta = beta_from_gap(est.gap);
    bool beta_window = beta >= kBetaLo && beta <= kBetaHi;

    bool exact_one = beta_from_gap(0.0) == 1.0;

    // uniform shift of the gap multiplies the weight by e^c
    bool shift_ok = true;
    Rng shift_rng(80);
    for (int i = 0; i < 1000; ++i) {
        double g = shift_rng.uniform(-4.0, 4.0);
        double c = shift_rng.uniform(-4.0, 4.0);
        double lhs = beta_from_gap(g + c);
        double rhs = std::exp(c) * beta_from_gap(g);
        if (std::fabs(lhs - rhs) / rhs > kShiftTol) shift_ok = false;
    }

    r.pass = recompute_ok && centered && beta_window && exact_one && shift_ok;
    r.detail = "gap " + fmt3(est.gap) + " (|gap| <= 3se = " + fmt3(3.0 * se) + "), beta " +
               fmt3(beta) + " in [" + fmt3(kBetaLo) + "," + fmt3(kBetaHi) + "], beta(0)=1 " +
               (exact_one ? "exact" : "BROKEN") + ", shift identity " +
               (shift_ok ? "holds" : "BROKEN") + " to " + fmt3(kShiftTol);
    return r;
}

// ---- criterion 6: scratch learner reaches the controller threshold --------
CriterionResult check_sac_baseline() {
    CriterionResult r{6, "scratch learner vs controller threshold", false, ""};
    ExperimentConfig cfg = preset("pointmass_source_train.json");
    std::string dir = tmp_dir_for("train");
    auto t0 = std::chrono::steady_clock::now();
    std::vector<std::string> files;
    Json summary = run_train(cfg, dir, "acc", &files);
    double secs = now_minus(t0);
    std::size_t reached = summary["reached_threshold_seeds"].get<std::size_t>();
    double threshold = summary["threshold"].get<double>();
    std::size_t n = cfg.seeds.size();
    r.pass = reached >= kSacMinSeeds && secs <= kSacBudgetS;
    r.detail = std::to_string(reached) + "/" + std::to_string(n) + " seeds reached " +
               fmt3(threshold) + " (need >= " + std::to_string(kSacMinSeeds) + "), " + fmt1(secs) +
               "s (budget " + fmt1(kSacBudgetS) + "s)";
    return r;
}

// ---- criterion 7: transfer vs scratch on similar and adversarial targets --
void check_transfer(CriterionResult* c7, std::string* similar_run_dir) {
    *c7 = {7, "transfer learner vs scratch baselines", false, ""};

    ExperimentConfig sim_cfg = preset("transfer_similar.json");
    std::string sim_dir = tmp_dir_for("transfer_similar");
    std::vector<std::string> sim_files;
    Json sim = run_transfer(sim_cfg, sim_dir, "acc", &sim_files);
    *similar_run_dir = sim_dir;
    double win_frac = sim["apt_vs_scratch"]["auc_win_fraction"].get<double>();

    ExperimentConfig adv_cfg = preset("transfer_adversarial.json");
    std::string adv_dir = tmp_dir_for("transfer_adversarial");
    std::vector<std::string> adv_files;
    Json adv = run_transfer(adv_cfg, adv_dir, "acc", &adv_files);
    double fin_apt = adv["apt_vs_scratch"]["final_return_apt"].get<double>();
    double fin_scr = adv["apt_vs_scratch"]["final_return_scratch"].get<double>();
    bool adv_ok = fin_scr > 0.0 && fin_apt >= kAdversarialRatio * fin_scr;

    c7->pass = win_frac >= kAucWinFrac && adv_ok;
    c7->detail = "similar: AUC wins " + fmt3(win_frac) + " (need >= " + fmt3(kAucWinFrac) +
                 "); adversarial: final " + fmt3(fin_apt) + " vs " + fmt3(fin_scr) + " (need >= " +
                 fmt3(kAdversarialRatio) + "x)";
}

// ---- criterion 8: task-similarity ladder ----------------------------------
CriterionResult check_similarity() {
    CriterionResult r{8, "task-similarity ladder", false, ""};
    ExperimentConfig cfg = preset("similarity_ladder.json");
    std::string dir = tmp_dir_for("similarity");
    std::vector<std::string> files;
    Json summary = run_similarity(cfg, dir, "acc", &files);

    // per-seed rows from the shipped artifact
    struct Row {
        std::string target;
        std::uint64_t seed;
        double xi_d, xi_r, self_d, self_r;
    };
    std::vector<Row> rows;
    {
        std::string csv = read_text_file(dir + "/similarity.csv");
        std::istringstream in(csv);
        std::string line;
        std::getline(in, line);  // header
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            auto f = detail::split_csv_line(line);
            require(f.size() == 6, ErrorCode::Precondition, "similarity.csv row shape");
            rows.push_back({f[0], detail::parse_csv_uint(f[1], "similarity.csv"),
                            detail::parse_csv_double(f[2], "similarity.csv"),
                            detail::parse_csv_double(f[3], "similarity.csv"),
                            detail::parse_csv_double(f[4], "similarity.csv"),
                            detail::parse_csv_double(f[5], "similarity.csv")});
        }
    }
    const std::vector<std::string> ladder = {"damp_1x", "damp_2x", "damp_3x", "damp_4x"};
    std::size_t increasing = 0;
    for (std::uint64_t seed : cfg.seeds) {
        std::vector<double> xi;
        for (const auto& name : ladder)
            for (const auto& row : rows)
                if (row.target == name && row.seed == seed) xi.push_back(row.xi_d);
        bool inc = xi.size() == ladder.size();
        for (std::size_t i = 1; i < xi.size(); ++i)
            if (xi[i] <= xi[i - 1]) inc = false;
        if (inc) ++increasing;
    }

    double rf_xi_d = 0, rf_xi_r = 0, rf_self_d = 0, rf_self_r = 0;
    std::size_t rf_n = 0;
    for (const auto& row : rows)
        if (row.target == "reward_flip") {
            rf_xi_d += row.xi_d;
            rf_xi_r += row.xi_r;
            rf_self_d += row.self_d;
            rf_self_r += row.self_r;
            ++rf_n;
        }
    rf_xi_d /= double(rf_n);
    rf_xi_r /= double(rf_n);
    rf_self_d /= double(rf_n);
    rf_self_r /= double(rf_n);
    bool reward_only_ok =
        rf_xi_d <= kRewardXiPFactor * rf_self_d && rf_xi_r > kRewardXiRFactor * rf_self_r;

    r.pass = increasing >= kLadderMinSeeds && reward_only_ok;
    r.detail = "dynamics ladder strictly increasing for " + std::to_string(increasing) + "/" +
               std::to_string(cfg.seeds.size()) + " seeds (need >= " +
               std::to_string(kLadderMinSeeds) + "); reward-only: xi_P/floor " +
               fmt3(rf_xi_d / rf_self_d) + " (need <= " + fmt3(kRewardXiPFactor) +
               "), xi_R/floor " + fmt3(rf_xi_r / rf_self_r) + " (need > " +
               fmt3(kRewardXiRFactor) + ")";
    return r;
}

// ---- criterion 9: byte-identical re-runs ----------------------------------
CriterionResult check_determinism() {
    CriterionResult r{9, "byte-identical re-runs", false, ""};

    auto write_cfg = [](const std::string& dir, const Json& j) {
        std::string p = dir + "/config.json";
        write_text_file(p, canonical_json(j));
        return p;
    };
    std::string base = tmp_dir_for("determinism");

    std::vector<std::pair<std::string, Json>> cases;
    {
        Json j;
        j["schema_version"] = 1;
        j["command"] = "toy";
        j["out_dir"] = base + "/toy_out";
        j["seeds"] = {0, 1};
        j["toy"] = {{"source_layout", kRepo + "/layouts/four_room_source.txt"},
                    {"targets", {{{"name", "t1"}, {"layout", kRepo + "/layouts/four_room_t1.txt"}}}},
                    {"qlearn", {{"alpha", 1.0}, {"epsilon", 0.2}, {"total_steps", 400}}}};
        cases.push_back({"toy", j});
    }
    {
        Json j;
        j["schema_version"] = 1;
        j["command"] = "bound";
        j["out_dir"] = base + "/bound_out";
        j["seeds"] = {0};
        j["bound"] = {{"n_pairs", 200}};
        cases.push_back({"bound", j});
    }
    {
        Json j;
        j["schema_version"] = 1;
        j["command"] = "train";
        j["out_dir"] = base + "/train_out";
        j["seeds"] = {0};
        j["train"] = {
            {"env",
             {{"horizon", 40}, {"reward_mode", "forward_progress"}, {"start_low", {0.5, 0.5}},
              {"start_high", {1.0, 1.0}}}},
            {"sac",
             {{"hidden", {8}}, {"start_steps", 100}, {"update_every", 50}, {"gradient_updates", 5},
              {"batch_size", 32}, {"buffer_capacity", 1000}, {"eval_every", 200},
              {"eval_episodes", 2}, {"total_steps", 600}}}};
        cases.push_back({"train", j});
    }

    std::size_t compared = 0;
    std::string mismatch;
    for (const auto& [tag, j] : cases) {
        std::string cfg_dir = base + "/" + tag;
        ensure_dir(cfg_dir);
        std::string cfg_path = write_cfg(cfg_dir, j);
        CliInvocation inv;
        inv.command = tag;
        inv.config_path = cfg_path;
        RunOutcome first = run_subcommand(inv);
        std::vector<std::pair<std::string, std::string>> before;
        for (const auto& e : std::filesystem::directory_iterator(first.run_dir)) {
            std::string p = e.path().string();
            if (p.ends_with(".csv")) before.push_back({p, read_text_file(p)});
        }
        RunOutcome second = run_subcommand(inv);
        require(second.run_dir == first.run_dir, ErrorCode::Precondition,
                "re-run landed in a different run directory");
        for (const auto& [p, bytes] : before) {
            ++compared;
            if (read_text_file(p) != bytes && mismatch.empty()) mismatch = p;
        }
        require(!before.empty(), ErrorCode::Precondition, "no CSVs produced by " + tag);
    }
    r.pass = mismatch.empty();
    r.detail = mismatch.empty()
                   ? std::to_string(compared) + " CSVs byte-identical across re-runs (toy, bound, train)"
                   : "mismatch at " + mismatch;
    return r;
}

// ---- criterion 10: adaptive weight vs fixed-weight ablation ---------------
CriterionResult check_ablation(const std::string& similar_run_dir) {
    CriterionResult r{10, "adaptive vs fixed regularizer weight", false, ""};
    ExperimentConfig cfg = preset("transfer_similar.json");
    const TransferBlock& tb = *cfg.transfer;

    // the transfer run for criterion 7 saved its source policy; reuse it so
    // fixed-weight runs regularize toward the identical source
    Checkpoint source_ck = load_checkpoint(similar_run_dir + "/source_checkpoint.json");

    std::vector<std::uint64_t> seeds(cfg.seeds.begin(),
                                     cfg.seeds.begin() + std::min<std::size_t>(5, cfg.seeds.size()));

    // adaptive AUCs from the criterion-7 artifacts, same seeds
    double adaptive_auc = 0.0;
    {
        auto traces = read_trace_csv(similar_run_dir + "/trace.csv");
        std::size_t found = 0;
        for (const auto& t : traces)
            if (t.algo_id == "apt")
                for (std::uint64_t s : seeds)
                    if (t.seed == s) {
                        adaptive_auc += trace_auc(t);
                        ++found;
                    }
        require(found == seeds.size(), ErrorCode::Precondition, "missing adaptive traces");
        adaptive_auc /= double(seeds.size());
    }

    double best_fixed = -std::numeric_limits<double>::infinity();
    double best_beta = 0.0;
    for (double beta : {0.1, 0.5, 1.0}) {
        double auc = 0.0;
        for (std::uint64_t seed : seeds) {
            SacLearner learner(tb.target_env, tb.sac.hyper, seed);
            TrainOptions opt;
            opt.total_steps = tb.sac.total_steps;
            opt.seed = seed;
            TransferOptions topt = tb.options;
            topt.beta_override = beta;
            TransferRunResult res =
                train_transfer(tb.target_env, learner, source_ck.actor, opt, topt);
            TransferTrace t;
            t.algo_id = "fixed";
            t.seed = seed;
            t.points = std::move(res.train.trace);
            auc += trace_auc(t);
        }
        auc /= double(seeds.size());
        if (auc > best_fixed) {
            best_fixed = auc;
            best_beta = beta;
        }
    }

    r.pass = adaptive_auc >= kAblationRatio * best_fixed;
    r.detail = "adaptive AUC " + fmt3(adaptive_auc) + " vs best fixed " + fmt3(best_fixed) +
               " (beta " + fmt3(best_beta) + "), need >= " + fmt3(kAblationRatio) + "x";
    return r;
}

void print_result(const CriterionResult& r) {
    std::printf("criterion %2d %-45s %s  %s\n", r.id, r.name.c_str(),
                r.pass ? "PASS" : "FAIL", r.detail.c_str());
    std::fflush(stdout);
}

}  // namespace

int main(int argc, char** argv) {
    if (argc > 1) {
        std::fprintf(stderr, "usage: %s   (no arguments; presets come from the repo configs)\n",
                     argv[0]);
        return 64;
    }
    std::vector<CriterionResult> results;
    auto run = [&](auto&& fn) {
        CriterionResult r;
        try {
            r = fn();
        } catch (const std::exception& e) {
            r.pass = false;
            r.detail = std::string("exception: ") + e.what();
        }
        results.push_back(r);
        print_result(r);
    };

    auto t0 = std::chrono::steady_clock::now();
    run([] { return check_bound(); });

    {
        CriterionResult c2, c3;
        try {
            check_toy(&c2, &c3);
        } catch (const std::exception& e) {
            c2 = {2, "four-room relative transfer", false, std::string("exception: ") + e.what()};
            c3 = {3, "exact-value consistency on tabular runs", false, "toy run failed"};
        }
        results.push_back(c2);
        print_result(c2);
        results.push_back(c3);
        print_result(c3);
    }

    run([] { return check_gradients(); });
    run([] { return check_beta(); });
    run([] { return check_sac_baseline(); });

    std::string similar_run_dir;
    {
        CriterionResult c7;
        try {
            check_transfer(&c7, &similar_run_dir);
        } catch (const std::exception& e) {
            c7 = {7, "transfer learner vs scratch baselines", false,
                  std::string("exception: ") + e.what()};
        }
        results.push_back(c7);
        print_result(c7);
    }

    run([] { return check_similarity(); });
    run([] { return check_determinism(); });
    run([&] {
        if (similar_run_dir.empty())
            return CriterionResult{10, "adaptive vs fixed regularizer weight", false,
                                   "skipped: criterion-7 run unavailable"};
        return check_ablation(similar_run_dir);
    });

    std::size_t failed = 0;
    for (const auto& r : results)
        if (!r.pass) ++failed;
    std::printf("%zu/%zu criteria passed in %ss\n", results.size() - failed, results.size(),
                fmt1(now_minus(t0)).c_str());
    return int(failed);
}
