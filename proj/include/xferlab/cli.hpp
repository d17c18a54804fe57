#pragma once

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "apt.hpp"
#include "checkpoint.hpp"
#include "config.hpp"
#include "csv.hpp"
#include "gridworld.hpp"
#include "report.hpp"
#include "svg.hpp"
#include "task_sim.hpp"
#include "transfer_eval.hpp"

namespace xferlab {

/// Worker cap from XFERLAB_THREADS (default 1 = fully serial).
inline std::size_t worker_cap() {
    const char* v = std::getenv("XFERLAB_THREADS");
    if (v == nullptr || *v == '\0') return 1;
    std::size_t n = 0;
    auto res = std::from_chars(v, v + std::string_view(v).size(), n);
    require(res.ec == std::errc() && *res.ptr == '\0' && n >= 1, ErrorCode::ConfigBadValue,
            "XFERLAB_THREADS must be a positive integer");
    return n;
}

/// Run fn(0..n_jobs-1), possibly on worker threads. Jobs must be independent
/// and write only to their own result slots; aggregation happens after the
/// implicit barrier (join). The first worker exception is rethrown.
template <class Fn>
inline void run_jobs(std::size_t n_jobs, Fn&& fn) {
    std::size_t workers = std::min(worker_cap(), n_jobs);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n_jobs; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex err_mutex;
    std::exception_ptr first_error;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            while (true) {
                std::size_t i = next.fetch_add(1);
                if (i >= n_jobs) break;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(err_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

// ---------------------------------------------------------------------------
// toy: four-room Q-transfer
// ---------------------------------------------------------------------------

struct ToyTargetResult {
    std::string name;
    std::vector<TransferTrace> traces;      // transfer + scratch, all seeds
    std::vector<TauSeries> taus;            // per seed
    TauSoundnessResult tau_soundness;       // accumulated over seeds
    Grid grid;
    GridMdp mdp;
};

inline Json run_toy(const ExperimentConfig& cfg, const std::string& run_dir,
                    const std::string& run_id, std::vector<std::string>* files) {
    const ToyBlock& toy = *cfg.toy;
    Grid src_grid = parse_grid(read_text_file(cfg.resolve(toy.source_layout)));
    GridMdp source = grid_to_mdp(src_grid, toy.grid);
    QTable q_source = value_iteration(source.mdp).q;
    auto greedy_source = greedy_policy(q_source);

    auto emit = [&](const std::string& name, const std::string& content) {
        write_text_file(run_dir + "/" + name, content);
        files->push_back(run_dir + "/" + name);
    };

    std::vector<ToyTargetResult> results(toy.targets.size());
    for (std::size_t ti = 0; ti < toy.targets.size(); ++ti) {
        ToyTargetResult& res = results[ti];
        res.name = toy.targets[ti].name;
        require_safe_id(res.name);
        res.grid = parse_grid(read_text_file(cfg.resolve(toy.targets[ti].layout)));
        res.mdp = grid_to_mdp(res.grid, toy.grid);
    }

    // Per (target, seed): scratch Q-learning vs Q-learning warm-started from
    // the source task's optimal Q-table, remapped by grid cell.
    struct SeedOut {
        TabularRun transfer, scratch;
    };
    for (auto& res : results) {
        QTable warm_q = remap_q_by_cell(source, q_source, res.mdp);
        std::vector<SeedOut> per_seed(cfg.seeds.size());
        run_jobs(cfg.seeds.size(), [&](std::size_t i) {
            QLearningParams pr = toy.qlearn;
            pr.seed = cfg.seeds[i];
            per_seed[i].scratch = tabular_run(q_learning(res.mdp.mdp, pr), "scratch", pr.seed);
            pr.init_q = warm_q;
            per_seed[i].transfer = tabular_run(q_learning(res.mdp.mdp, pr), "transfer", pr.seed);
        });
        for (auto& s : per_seed) {
            s.transfer.trace.config_hash = run_id;
            s.scratch.trace.config_hash = run_id;
            res.taus.push_back(relative_transfer(s.transfer.trace, s.scratch.trace));
            auto t1 = tau_soundness_check(s.transfer.trace, s.scratch.trace, res.mdp.mdp,
                                          s.transfer.policies, s.scratch.policies,
                                          toy.qlearn.eval_horizon);
            res.tau_soundness.checked += t1.checked;
            res.tau_soundness.violations += t1.violations;
            res.tau_soundness.held = res.tau_soundness.held && t1.held;
            res.traces.push_back(std::move(s.transfer.trace));
        }
        for (auto& s : per_seed) res.traces.push_back(std::move(s.scratch.trace));
        emit("trace_" + res.name + ".csv", trace_csv_string(res.traces));
        emit("tau_" + res.name + ".csv", tau_csv_string(aggregate_tau(res.taus)));
    }

    // Relative-transfer figure: one series per target.
    std::vector<CurveBand> tau_bands;
    {
        SvgChartOptions opt;
        opt.title = "relative transfer of the warm-started learner";
        opt.x_label = "evaluation episode";
        opt.y_label = "tau";
        std::vector<SvgSeries> series;
        for (auto& res : results) {
            CurveBand band = aggregate_tau(res.taus);
            SvgSeries s;
            s.label = "tau " + res.name;
            for (std::size_t i = 0; i < band.mean.size(); ++i) {
                s.x.push_back(double(band.eval_episodes[i]));
                s.y.push_back(band.mean[i]);
                s.half_band.push_back(band.stdev[i]);
            }
            series.push_back(std::move(s));
            tau_bands.push_back(std::move(band));
        }
        emit("tau_curves.svg", svg_line_chart(opt, series));
    }

    // Raw return figure: one series per (target, algorithm).
    {
        SvgChartOptions opt;
        opt.title = "greedy-policy return during learning";
        opt.x_label = "environment step";
        opt.y_label = "return";
        std::vector<SvgSeries> series;
        for (auto& res : results) {
            for (const char* algo : {"transfer", "scratch"}) {
                std::vector<TransferTrace> subset;
                for (const auto& t : res.traces)
                    if (t.algo_id == algo) subset.push_back(t);
                CurveBand band = aggregate_rho(subset);
                SvgSeries s;
                s.label = std::string(algo) + "@" + res.name;
                for (std::size_t i = 0; i < band.mean.size(); ++i) {
                    s.x.push_back(double(band.env_steps[i]));
                    s.y.push_back(band.mean[i]);
                    s.half_band.push_back(band.stdev[i]);
                }
                series.push_back(std::move(s));
            }
        }
        emit("reward_curves.svg", svg_line_chart(opt, series));
    }

    // Figures 3..(2+T): exp(advantage) heatmaps. Per target cell: the
    // advantage of the source-optimal action under the target's optimal
    // values, A = Q*_T(s, a_S) - V*_T(s), rendered as e^A in [0, 1]. Cells
    // that are walls in the source (new doorways) have no source action and
    // render dark.
    for (auto& res : results) {
        auto vi_t = value_iteration(res.mdp.mdp);
        std::vector<std::vector<double>> cells(res.grid.height,
                                               std::vector<double>(res.grid.width,
                                                                   std::numeric_limits<double>::quiet_NaN()));
        for (std::size_t s = 0; s < res.mdp.mdp.n_states; ++s) {
            auto [r, c] = res.mdp.cell_of_state[s];
            std::size_t src_state = std::numeric_limits<std::size_t>::max();
            if (r < source.state_of_cell.size() && c < source.state_of_cell[r].size())
                src_state = source.state_of_cell[r][c];
            if (src_state == std::numeric_limits<std::size_t>::max()) continue;
            double v_star = *std::max_element(vi_t.q[s].begin(), vi_t.q[s].end());
            double a_src = vi_t.q[s][greedy_source[src_state]];
            cells[r][c] = std::exp(a_src - v_star);
        }
        emit("heatmap_" + res.name + ".svg",
             svg_heatmap("exp(advantage) of source-greedy actions on " + res.name, res.grid.rows,
                         cells, 0.0, 1.0, "exp(A)"));
    }

    // Summary: early-window tau statistics and the target ordering flag.
    Json summary;
    summary["schema_version"] = 1;
    std::size_t window = 125;
    for (const auto& band : tau_bands) window = std::min(window, band.mean.size());
    Json targets = Json::array();
    for (std::size_t ti = 0; ti < results.size(); ++ti) {
        const auto& res = results[ti];
        const auto& band = tau_bands[ti];
        std::size_t nonneg = 0;
        double mean_tau = 0.0;
        for (std::size_t i = 0; i < window; ++i) {
            if (band.mean[i] >= 0.0) ++nonneg;
            mean_tau += band.mean[i];
        }
        Json t;
        t["name"] = res.name;
        t["seeds"] = cfg.seeds.size();
        t["shortest_path"] = grid_shortest_path(res.grid);
        t["tau_nonneg_fraction"] = double(nonneg) / double(window);
        t["tau_mean_early"] = mean_tau / double(window);
        Json th;
        th["checked"] = res.tau_soundness.checked;
        th["violations"] = res.tau_soundness.violations;
        t["tau_soundness"] = th;
        targets.push_back(t);
    }
    summary["targets"] = targets;
    summary["early_window"] = window;
    if (results.size() >= 2) {
        std::size_t dominated = 0;
        for (std::size_t i = 0; i < window; ++i)
            if (tau_bands[0].mean[i] >= tau_bands[1].mean[i] - 1e-12) ++dominated;
        summary["tau1_ge_tau2_fraction"] = double(dominated) / double(window);
        summary["tau1_ge_tau2"] = dominated * 10 >= window * 7;  // >= 70% of the early window
    }
    return summary;
}

// ---------------------------------------------------------------------------
// train: scratch soft actor-critic
// ---------------------------------------------------------------------------

inline Json run_train(const ExperimentConfig& cfg, const std::string& run_dir,
                      const std::string& run_id, std::vector<std::string>* files) {
    const TrainBlock& tr = *cfg.train;
    struct SeedOut {
        TransferTrace trace;
        Checkpoint checkpoint;
        std::size_t steps_run = 0;
        bool reached = false;
    };
    std::vector<SeedOut> per_seed(cfg.seeds.size());
    run_jobs(cfg.seeds.size(), [&](std::size_t i) {
        std::uint64_t seed = cfg.seeds[i];
        SacLearner learner(tr.env, tr.sac.hyper, seed);
        TrainOptions opt;
        opt.total_steps = tr.sac.total_steps;
        opt.seed = seed;
        if (tr.early_stop) opt.stop_at_rho = *tr.threshold;
        TrainResult res = train_sac(tr.env, learner, opt);
        per_seed[i].trace.algo_id = "sac_scratch";
        per_seed[i].trace.seed = seed;
        per_seed[i].trace.config_hash = run_id;
        per_seed[i].trace.points = std::move(res.trace);
        per_seed[i].checkpoint = make_checkpoint(learner, res.steps_run);
        per_seed[i].steps_run = res.steps_run;
        per_seed[i].reached = res.reached_stop;
    });

    std::vector<TransferTrace> traces;
    for (std::size_t i = 0; i < per_seed.size(); ++i) {
        std::string name = run_dir + "/checkpoint_seed" + std::to_string(cfg.seeds[i]) + ".json";
        save_checkpoint(name, per_seed[i].checkpoint);
        files->push_back(name);
        traces.push_back(per_seed[i].trace);
    }

    Json summary;
    if (tr.early_stop) {
        // Early-stopped seeds end on different schedules, so no curve
        // aggregation: raw rows plus per-seed outcomes only.
        write_trace_csv(run_dir + "/trace.csv", traces);
        files->push_back(run_dir + "/trace.csv");
        summary["schema_version"] = 1;
    } else {
        ReportInputs in;
        in.traces = traces;
        in.threshold = tr.threshold;
        ReportResult rep = aggregate_report(in, run_dir);
        for (auto& f : rep.files) files->push_back(f);
        summary = rep.summary;
    }
    std::size_t reached = 0;
    Json seeds_out = Json::array();
    for (const auto& s : per_seed) {
        Json row;
        row["seed"] = s.trace.seed;
        row["steps_run"] = s.steps_run;
        row["final_rho"] = s.trace.points.back().rho;
        if (tr.threshold) row["reached_threshold"] = s.reached || (!tr.early_stop &&
                              first_step_reaching(s.trace, *tr.threshold).has_value());
        if (s.reached || (tr.threshold && !tr.early_stop &&
                          first_step_reaching(s.trace, *tr.threshold).has_value()))
            ++reached;
        seeds_out.push_back(row);
    }
    summary["per_seed"] = seeds_out;
    if (tr.threshold) {
        summary["threshold"] = *tr.threshold;
        summary["reached_threshold_seeds"] = reached;
    }
    return summary;
}

// ---------------------------------------------------------------------------
// transfer: advantage-regularized transfer + baselines
// ---------------------------------------------------------------------------

/// Evaluate a fixed policy on the training evaluation schedule, with the
/// same evaluation streams a training run would use at each index.
inline TransferTrace zero_shot_trace(const EnvSpec& spec, const GaussianPolicy& actor,
                                     const SacHyper& hp, std::size_t total_steps,
                                     std::uint64_t seed) {
    TransferTrace t;
    t.algo_id = "zero_shot";
    t.seed = seed;
    std::size_t k = 0;
    for (std::size_t step = 0; step <= total_steps; step += hp.eval_every) {
        Rng eval_rng = Rng::stream(seed, "eval", k);
        EvalPoint p;
        p.env_step = step;
        p.eval_episode = k;
        p.rho = evaluate_policy(spec, actor, hp.eval_episodes, eval_rng);
        p.beta = 0.0;
        t.points.push_back(p);
        ++k;
    }
    return t;
}

inline Json run_transfer(const ExperimentConfig& cfg, const std::string& run_dir,
                         const std::string& run_id, std::vector<std::string>* files) {
    const TransferBlock& tb = *cfg.transfer;

    // Source policy: load, or train once ahead of the seed loop.
    Checkpoint source_ck;
    if (tb.source.checkpoint) {
        source_ck = load_checkpoint(cfg.resolve(*tb.source.checkpoint));
    } else {
        const TrainBlock& st = *tb.source.train;
        SacLearner learner(st.env, st.sac.hyper, tb.source.train_seed);
        TrainOptions opt;
        opt.total_steps = st.sac.total_steps;
        opt.seed = tb.source.train_seed;
        if (st.early_stop) opt.stop_at_rho = *st.threshold;
        TrainResult res = train_sac(st.env, learner, opt);
        source_ck = make_checkpoint(learner, res.steps_run);
        save_checkpoint(run_dir + "/source_checkpoint.json", source_ck);
        files->push_back(run_dir + "/source_checkpoint.json");
    }
    require(source_ck.env.same_domain(tb.target_env), ErrorCode::DomainMismatch,
            "source checkpoint domain does not match the target task");
    require(source_ck.actor.net.layer_sizes ==
                [&] {
                    std::vector<std::size_t> ls;
                    ls.push_back(EnvSpec::state_dim);
                    for (auto h : tb.sac.hyper.hidden) ls.push_back(h);
                    ls.push_back(2 * EnvSpec::action_dim);
                    return ls;
                }(),
            ErrorCode::DomainMismatch,
            "source actor architecture does not match the transfer sac block");

    struct SeedOut {
        std::vector<TransferTrace> traces;
    };
    std::vector<SeedOut> per_seed(cfg.seeds.size());
    const GaussianPolicy& source_actor = source_ck.actor;
    run_jobs(cfg.seeds.size(), [&](std::size_t i) {
        std::uint64_t seed = cfg.seeds[i];
        TrainOptions opt;
        opt.total_steps = tb.sac.total_steps;
        opt.seed = seed;
        {
            SacLearner learner(tb.target_env, tb.sac.hyper, seed);
            TransferRunResult res =
                train_transfer(tb.target_env, learner, source_actor, opt, tb.options);
            TransferTrace t;
            t.algo_id = "apt";
            t.seed = seed;
            t.points = std::move(res.train.trace);
            per_seed[i].traces.push_back(std::move(t));
        }
        if (tb.run_scratch) {
            SacLearner learner(tb.target_env, tb.sac.hyper, seed);
            TrainResult res = train_sac(tb.target_env, learner, opt);
            TransferTrace t;
            t.algo_id = "sac_scratch";
            t.seed = seed;
            t.points = std::move(res.trace);
            per_seed[i].traces.push_back(std::move(t));
        }
        if (tb.run_finetune) {
            SacLearner learner(tb.target_env, tb.sac.hyper, seed);
            TrainOptions fopt = opt;
            fopt.init_policy = &source_actor;
            TrainResult res = train_sac(tb.target_env, learner, fopt);
            TransferTrace t;
            t.algo_id = "finetune";
            t.seed = seed;
            t.points = std::move(res.trace);
            per_seed[i].traces.push_back(std::move(t));
        }
        if (tb.run_zero_shot)
            per_seed[i].traces.push_back(
                zero_shot_trace(tb.target_env, source_actor, tb.sac.hyper, tb.sac.total_steps, seed));
    });

    std::vector<TransferTrace> traces;
    for (auto& s : per_seed)
        for (auto& t : s.traces) {
            t.config_hash = run_id;
            traces.push_back(std::move(t));
        }

    ReportInputs in;
    in.traces = traces;
    in.baseline_algo = "sac_scratch";
    ReportResult rep = aggregate_report(in, run_dir);
    for (auto& f : rep.files) files->push_back(f);
    Json summary = rep.summary;

    // Paired per-seed comparison of the transfer learner vs the scratch
    // baseline: curve-area wins and final returns.
    std::size_t wins = 0;
    double final_apt = 0.0, final_scratch = 0.0;
    for (std::size_t i = 0; i < per_seed.size(); ++i) {
        const TransferTrace* apt = nullptr;
        const TransferTrace* scratch = nullptr;
        for (const auto& t : traces)
            if (t.seed == cfg.seeds[i]) {
                if (t.algo_id == "apt") apt = &t;
                if (t.algo_id == "sac_scratch") scratch = &t;
            }
        require(apt && scratch, ErrorCode::Precondition, "missing paired traces");
        if (trace_auc(*apt) >= trace_auc(*scratch)) ++wins;
        final_apt += apt->points.back().rho;
        final_scratch += scratch->points.back().rho;
    }
    final_apt /= double(per_seed.size());
    final_scratch /= double(per_seed.size());
    Json cmp;
    cmp["auc_win_fraction"] = double(wins) / double(per_seed.size());
    cmp["final_return_apt"] = final_apt;
    cmp["final_return_scratch"] = final_scratch;
    if (final_scratch != 0.0) cmp["final_return_ratio"] = final_apt / final_scratch;
    summary["apt_vs_scratch"] = cmp;
    return summary;
}

// ---------------------------------------------------------------------------
// similarity: model-based task dissimilarity
// ---------------------------------------------------------------------------

inline Json run_similarity(const ExperimentConfig& cfg, const std::string& run_dir,
                           [[maybe_unused]] const std::string& run_id,
                           std::vector<std::string>* files) {
    const SimilarityBlock& sb = *cfg.similarity;
    for (const auto& [name, env] : sb.targets) require_safe_id(name);

    struct SeedOut {
        std::vector<SimilarityReport> reports;  // one per target
    };
    std::vector<SeedOut> per_seed(cfg.seeds.size());
    run_jobs(cfg.seeds.size(), [&](std::size_t i) {
        SimilarityConfig model = sb.model;
        model.seed = cfg.seeds[i];
        TaskModels src = fit_task_models(sb.source, model, "src");
        for (const auto& [name, env] : sb.targets) {
            TaskModels tgt = fit_task_models(env, model, "tgt/" + name);
            require(sb.source.same_domain(env), ErrorCode::DomainMismatch,
                    "similarity targets must share the source domain");
            per_seed[i].reports.push_back(
                compare_task_models(src, tgt, model.literal_self_model));
        }
    });

    // CSV: one row per (target, seed).
    std::string csv = "target,seed,xi_dynamics,xi_reward,self_dynamics,self_reward\n";
    for (std::size_t ti = 0; ti < sb.targets.size(); ++ti) {
        for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
            const SimilarityReport& r = per_seed[i].reports[ti];
            csv += sb.targets[ti].first + "," + std::to_string(cfg.seeds[i]) + "," +
                   format_double(r.xi_dynamics) + "," + format_double(r.xi_reward) + "," +
                   format_double(r.self_dynamics) + "," + format_double(r.self_reward) + "\n";
        }
    }
    write_text_file(run_dir + "/similarity.csv", csv);
    files->push_back(run_dir + "/similarity.csv");

    // Bar chart of seed-mean dissimilarities.
    std::vector<SvgBarGroup> groups;
    Json targets_out = Json::array();
    std::size_t increasing_seeds = 0;
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
        bool increasing = sb.targets.size() >= 2;
        for (std::size_t ti = 1; ti < sb.targets.size(); ++ti)
            if (per_seed[i].reports[ti].xi_dynamics <= per_seed[i].reports[ti - 1].xi_dynamics)
                increasing = false;
        if (increasing) ++increasing_seeds;
    }
    for (std::size_t ti = 0; ti < sb.targets.size(); ++ti) {
        double xd = 0.0, xr = 0.0, sd = 0.0, sr = 0.0;
        for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
            xd += per_seed[i].reports[ti].xi_dynamics;
            xr += per_seed[i].reports[ti].xi_reward;
            sd += per_seed[i].reports[ti].self_dynamics;
            sr += per_seed[i].reports[ti].self_reward;
        }
        double n = double(cfg.seeds.size());
        xd /= n;
        xr /= n;
        sd /= n;
        sr /= n;
        groups.push_back({sb.targets[ti].first, {xd, xr}});
        Json t;
        t["name"] = sb.targets[ti].first;
        t["xi_dynamics_mean"] = xd;
        t["xi_reward_mean"] = xr;
        t["self_dynamics_mean"] = sd;
        t["self_reward_mean"] = sr;
        targets_out.push_back(t);
    }
    SvgChartOptions opt;
    opt.title = "task dissimilarity vs the source (mean over seeds)";
    opt.x_label = "target task";
    opt.y_label = "mean prediction error";
    write_text_file(run_dir + "/similarity.svg",
                    svg_bar_chart(opt, {"dynamics", "reward"}, groups));
    files->push_back(run_dir + "/similarity.svg");

    Json summary;
    summary["schema_version"] = 1;
    summary["targets"] = targets_out;
    summary["seeds"] = cfg.seeds.size();
    summary["xi_dynamics_strictly_increasing_seeds"] = increasing_seeds;
    return summary;
}

// ---------------------------------------------------------------------------
// bound: random-pair sweep of the optimal-value transfer bound
// ---------------------------------------------------------------------------

inline Json run_bound(const ExperimentConfig& cfg, const std::string& run_dir,
                      [[maybe_unused]] const std::string& run_id,
                      std::vector<std::string>* files) {
    const BoundBlock& bb = *cfg.bound;
    Rng rng = Rng::stream(cfg.seeds[0], "bound");
    std::string csv = "pair,gamma,n_states,n_actions,delta_r,delta_tv,lhs,rhs,slack\n";
    std::size_t violations = 0;
    double min_slack = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < bb.n_pairs; ++i) {
        double gamma = bb.gammas[i % bb.gammas.size()];
        std::size_t n_states = 2 + rng.index(bb.max_states - 1);
        std::size_t n_actions = 1 + rng.index(bb.max_actions);
        TabularMdp source = random_mdp(n_states, n_actions, gamma, rng);
        TabularMdp target = perturb_mdp(source, bb.reward_noise * rng.uniform(),
                                        bb.transition_noise * rng.uniform(), rng);
        ValueGapBound b = value_gap_bound(source, target);
        if (b.slack < -1e-9) ++violations;
        min_slack = std::min(min_slack, b.slack);
        csv += std::to_string(i) + "," + format_double(gamma) + "," + std::to_string(n_states) +
               "," + std::to_string(n_actions) + "," + format_double(b.delta_r) + "," +
               format_double(b.delta_tv) + "," + format_double(b.lhs) + "," +
               format_double(b.rhs) + "," + format_double(b.slack) + "\n";
    }
    write_text_file(run_dir + "/pairs.csv", csv);
    files->push_back(run_dir + "/pairs.csv");
    Json summary;
    summary["schema_version"] = 1;
    summary["pairs"] = bb.n_pairs;
    summary["violations"] = violations;
    summary["min_slack"] = min_slack;
    return summary;
}

// ---------------------------------------------------------------------------
// report: offline aggregation over written traces
// ---------------------------------------------------------------------------

inline Json run_report(const ExperimentConfig& cfg, const std::string& run_dir,
                       [[maybe_unused]] const std::string& run_id,
                       std::vector<std::string>* files) {
    const ReportBlock& rb = *cfg.report;
    ReportInputs in;
    for (const auto& f : rb.trace_files)
        for (auto& t : read_trace_csv(cfg.resolve(f))) in.traces.push_back(std::move(t));
    in.baseline_algo = rb.baseline_algo;
    in.threshold = rb.threshold;
    ReportResult rep = aggregate_report(in, run_dir);
    for (auto& f : rep.files) files->push_back(f);
    return rep.summary;
}

// ---------------------------------------------------------------------------
// dispatch
// ---------------------------------------------------------------------------

struct CliInvocation {
    std::string command;
    std::string config_path;
    std::optional<std::uint64_t> seed_override;
    std::string out_override;
};

inline void print_usage(std::FILE* to) {
    std::fputs(
        "usage: xferlab <toy|train|transfer|similarity|bound|report>"
        " --config <path> [--seed-override N] [--out DIR]\n",
        to);
}

inline CliInvocation parse_cli_args(int argc, const char* const* argv) {
    require(argc >= 2, ErrorCode::Precondition, "missing subcommand");
    CliInvocation inv;
    inv.command = argv[1];
    bool known = false;
    for (const auto& k : known_commands()) known = known || k == inv.command;
    require(known, ErrorCode::Precondition, "unknown subcommand '" + inv.command + "'");
    for (int i = 2; i < argc; ++i) {
        std::string flag = argv[i];
        auto value = [&]() -> std::string {
            require(i + 1 < argc, ErrorCode::Precondition, flag + " needs a value");
            return argv[++i];
        };
        if (flag == "--config") {
            inv.config_path = value();
        } else if (flag == "--seed-override") {
            std::string v = value();
            std::uint64_t n = 0;
            auto res = std::from_chars(v.data(), v.data() + v.size(), n);
            require(res.ec == std::errc() && res.ptr == v.data() + v.size(),
                    ErrorCode::Precondition, "--seed-override needs an unsigned integer");
            inv.seed_override = n;
        } else if (flag == "--out") {
            inv.out_override = value();
        } else {
            throw Error(ErrorCode::Precondition, "unknown flag '" + flag + "'");
        }
    }
    require(!inv.config_path.empty(), ErrorCode::Precondition, "--config is required");
    return inv;
}

struct RunOutcome {
    std::string run_id;
    std::string run_dir;
    Json summary;
    std::vector<std::string> files;
};

/// Load config, apply CLI overrides, run the subcommand, write the summary.
inline RunOutcome run_subcommand(const CliInvocation& inv) {
    auto t0 = std::chrono::steady_clock::now();
    ExperimentConfig cfg = load_experiment_config(inv.config_path);
    require(cfg.command == inv.command, ErrorCode::ConfigBadValue,
            "config is for command '" + cfg.command + "' but '" + inv.command + "' was invoked");
    if (inv.seed_override) cfg.seeds = {*inv.seed_override};
    if (!inv.out_override.empty()) cfg.out_dir = inv.out_override;

    RunOutcome out;
    out.run_id = run_id_for(cfg);
    out.run_dir = cfg.resolve(cfg.out_dir) + "/" + out.run_id;
    ensure_dir(out.run_dir);

    Json summary;
    if (cfg.command == "toy")
        summary = run_toy(cfg, out.run_dir, out.run_id, &out.files);
    else if (cfg.command == "train")
        summary = run_train(cfg, out.run_dir, out.run_id, &out.files);
    else if (cfg.command == "transfer")
        summary = run_transfer(cfg, out.run_dir, out.run_id, &out.files);
    else if (cfg.command == "similarity")
        summary = run_similarity(cfg, out.run_dir, out.run_id, &out.files);
    else if (cfg.command == "bound")
        summary = run_bound(cfg, out.run_dir, out.run_id, &out.files);
    else
        summary = run_report(cfg, out.run_dir, out.run_id, &out.files);

    Json run;
    run["command"] = cfg.command;
    run["run_id"] = out.run_id;
    run["seeds"] = cfg.seeds;
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    run["wall_time_s"] = std::round(secs * 1000.0) / 1000.0;
    summary["run"] = run;
    out.summary = summary;
    write_text_file(out.run_dir + "/summary.json", canonical_json(summary));
    out.files.push_back(out.run_dir + "/summary.json");
    return out;
}

/// Entry point shared by the binary and the tests. Exit codes: 0 success,
/// 1 library error (line: "error: <CODE>: <detail>"), 2 usage, 3 unexpected.
inline int cli_main(int argc, const char* const* argv) {
    if (argc >= 2 && (std::string(argv[1]) == "--help" || std::string(argv[1]) == "help")) {
        print_usage(stdout);
        return 0;
    }
    CliInvocation inv;
    try {
        inv = parse_cli_args(argc, argv);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        print_usage(stderr);
        return 2;
    }
    try {
        RunOutcome out = run_subcommand(inv);
        std::printf("%s %s: %zu files under %s\n", inv.command.c_str(), out.run_id.c_str(),
                    out.files.size(), out.run_dir.c_str());
        return 0;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: INTERNAL: %s\n", e.what());
        return 3;
    }
}

}  // namespace xferlab
