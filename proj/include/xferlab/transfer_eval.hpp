#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "common.hpp"
#include "mdp.hpp"
#include "sac.hpp"

namespace xferlab {

/// One algorithm's evaluation history over a run: the return measure rho at
/// scheduled environment steps, plus the regularizer weight in force (0 when
/// the algorithm has no transfer term).
struct TransferTrace {
    std::string algo_id;
    std::uint64_t seed = 0;
    std::string config_hash;
    std::vector<EvalPoint> points;

    void validate() const {
        require(!points.empty(), ErrorCode::Precondition, "empty trace");
        for (std::size_t i = 0; i < points.size(); ++i) {
            require(std::isfinite(points[i].rho), ErrorCode::NumericNan, "non-finite rho");
            if (i > 0)
                require(points[i].env_step > points[i - 1].env_step, ErrorCode::Precondition,
                        "env_step must be strictly increasing");
        }
    }
};

/// Pointwise difference of two return curves on the same schedule.
struct TauSeries {
    struct Point {
        std::size_t eval_episode = 0;
        std::size_t env_step = 0;
        double tau = 0.0;
    };
    std::vector<Point> points;
};

inline void require_same_schedule(const std::vector<EvalPoint>& a, const std::vector<EvalPoint>& b) {
    require(a.size() == b.size(), ErrorCode::ScheduleMismatch,
            "traces have different numbers of evaluation points");
    for (std::size_t i = 0; i < a.size(); ++i) {
        require(a[i].env_step == b[i].env_step && a[i].eval_episode == b[i].eval_episode,
                ErrorCode::ScheduleMismatch,
                "evaluation schedules differ at point " + std::to_string(i));
    }
}

/// tau_t = rho(algo)_t - rho(base)_t. Schedules must match exactly; there is
/// no interpolation.
inline TauSeries relative_transfer(const TransferTrace& algo, const TransferTrace& base) {
    algo.validate();
    base.validate();
    require_same_schedule(algo.points, base.points);
    TauSeries out;
    out.points.reserve(algo.points.size());
    for (std::size_t i = 0; i < algo.points.size(); ++i)
        out.points.push_back({algo.points[i].eval_episode, algo.points[i].env_step,
                              algo.points[i].rho - base.points[i].rho});
    return out;
}

/// Area under the return curve by the trapezoid rule over env_step.
inline double trace_auc(const TransferTrace& t) {
    t.validate();
    double auc = 0.0;
    for (std::size_t i = 1; i < t.points.size(); ++i) {
        double w = double(t.points[i].env_step - t.points[i - 1].env_step);
        auc += 0.5 * w * (t.points[i].rho + t.points[i - 1].rho);
    }
    return auc;
}

/// First environment step at which the return reaches the threshold.
inline std::optional<std::size_t> first_step_reaching(const TransferTrace& t, double threshold) {
    for (const auto& p : t.points)
        if (p.rho >= threshold) return p.env_step;
    return std::nullopt;
}

/// Per-evaluation-point mean and sample standard deviation across seeds.
struct CurveBand {
    std::vector<std::size_t> env_steps;
    std::vector<std::size_t> eval_episodes;
    std::vector<double> mean;
    std::vector<double> stdev;  // 0 for a single seed
};

namespace detail {
inline CurveBand aggregate_points(const std::vector<const std::vector<EvalPoint>*>& runs,
                                  double EvalPoint::*field) {
    require(!runs.empty(), ErrorCode::Precondition, "no runs to aggregate");
    for (std::size_t r = 1; r < runs.size(); ++r) require_same_schedule(*runs[0], *runs[r]);
    std::size_t n_points = runs[0]->size();
    CurveBand band;
    band.env_steps.reserve(n_points);
    band.eval_episodes.reserve(n_points);
    for (std::size_t i = 0; i < n_points; ++i) {
        band.env_steps.push_back((*runs[0])[i].env_step);
        band.eval_episodes.push_back((*runs[0])[i].eval_episode);
        double m = 0.0;
        for (const auto* run : runs) m += (*run)[i].*field;
        m /= double(runs.size());
        double v = 0.0;
        for (const auto* run : runs) {
            double d = (*run)[i].*field - m;
            v += d * d;
        }
        band.mean.push_back(m);
        band.stdev.push_back(runs.size() > 1 ? std::sqrt(v / double(runs.size() - 1)) : 0.0);
    }
    return band;
}
}  // namespace detail

inline CurveBand aggregate_rho(const std::vector<TransferTrace>& traces) {
    std::vector<const std::vector<EvalPoint>*> runs;
    for (const auto& t : traces) {
        t.validate();
        runs.push_back(&t.points);
    }
    return detail::aggregate_points(runs, &EvalPoint::rho);
}

inline CurveBand aggregate_beta(const std::vector<TransferTrace>& traces) {
    std::vector<const std::vector<EvalPoint>*> runs;
    for (const auto& t : traces) {
        t.validate();
        runs.push_back(&t.points);
    }
    return detail::aggregate_points(runs, &EvalPoint::beta);
}

/// Mean and standard deviation of per-seed tau series. By linearity the mean
/// tau equals the difference of mean return curves.
inline CurveBand aggregate_tau(const std::vector<TauSeries>& series) {
    require(!series.empty(), ErrorCode::Precondition, "no tau series to aggregate");
    std::size_t n_points = series[0].points.size();
    for (const auto& s : series) {
        require(s.points.size() == n_points, ErrorCode::ScheduleMismatch,
                "tau series have different lengths");
        for (std::size_t i = 0; i < n_points; ++i)
            require(s.points[i].eval_episode == series[0].points[i].eval_episode &&
                        s.points[i].env_step == series[0].points[i].env_step,
                    ErrorCode::ScheduleMismatch, "tau series schedules differ");
    }
    CurveBand band;
    for (std::size_t i = 0; i < n_points; ++i) {
        band.env_steps.push_back(series[0].points[i].env_step);
        band.eval_episodes.push_back(series[0].points[i].eval_episode);
        double m = 0.0;
        for (const auto& s : series) m += s.points[i].tau;
        m /= double(series.size());
        double v = 0.0;
        for (const auto& s : series) {
            double d = s.points[i].tau - m;
            v += d * d;
        }
        band.mean.push_back(m);
        band.stdev.push_back(series.size() > 1 ? std::sqrt(v / double(series.size() - 1)) : 0.0);
    }
    return band;
}

/// Checks, on a tabular task with exact evaluation, that non-negative tau at
/// an evaluation point implies the compared policy is at least as good from
/// the start state. Returns true when the implication held at every point.
///
/// rho values in the traces must be exact expected returns of the recorded
/// greedy policies (undiscounted, fixed horizon from the start state); the
/// check recomputes them and rejects traces that disagree, because with
/// sampled returns the implication can fail for noise reasons alone.
struct TauSoundnessResult {
    bool held = true;
    std::size_t checked = 0;
    std::size_t violations = 0;
    double max_recompute_gap = 0.0;  // trace rho vs recomputed exact value
};

/// A tabular run repackaged for evaluation: the trace plus the greedy policy
/// recorded at each evaluation point (needed for exact value recomputation).
struct TabularRun {
    TransferTrace trace;
    std::vector<std::vector<std::size_t>> policies;
};

inline TabularRun tabular_run(const QLearningResult& r, const std::string& algo_id,
                              std::uint64_t seed) {
    TabularRun run;
    run.trace.algo_id = algo_id;
    run.trace.seed = seed;
    for (const auto& e : r.evals) {
        EvalPoint p;
        p.env_step = e.env_step;
        p.eval_episode = e.eval_episode;
        p.rho = e.rho;
        p.beta = 0.0;
        run.trace.points.push_back(p);
        run.policies.push_back(e.greedy);
    }
    return run;
}

inline TauSoundnessResult tau_soundness_check(
    const TransferTrace& algo, const TransferTrace& base, const TabularMdp& m,
    const std::vector<std::vector<std::size_t>>& algo_policies,
    const std::vector<std::vector<std::size_t>>& base_policies, std::size_t eval_horizon) {
    algo.validate();
    base.validate();
    require_same_schedule(algo.points, base.points);
    require(algo_policies.size() == algo.points.size() && base_policies.size() == base.points.size(),
            ErrorCode::Precondition, "one recorded policy per evaluation point required");
    TauSoundnessResult res;
    for (std::size_t i = 0; i < algo.points.size(); ++i) {
        double v_algo = finite_horizon_value(m, algo_policies[i], m.start_state, eval_horizon);
        double v_base = finite_horizon_value(m, base_policies[i], m.start_state, eval_horizon);
        res.max_recompute_gap = std::max(
            {res.max_recompute_gap, std::abs(v_algo - algo.points[i].rho),
             std::abs(v_base - base.points[i].rho)});
        require(res.max_recompute_gap <= 1e-9, ErrorCode::Precondition,
                "trace rho is not the exact expected return of the recorded policy");
        double tau = algo.points[i].rho - base.points[i].rho;
        ++res.checked;
        if (tau >= 0.0 && v_algo < v_base - 1e-12) {
            ++res.violations;
            res.held = false;
        }
    }
    return res;
}

}  // namespace xferlab
