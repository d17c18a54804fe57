#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "common.hpp"
#include "rng.hpp"

namespace xferlab {

/// Finite MDP with expected rewards. Terminal states are absorbing and give
/// no further reward; their value is identically zero.
struct TabularMdp {
    std::size_t n_states = 0;
    std::size_t n_actions = 0;
    std::vector<std::vector<std::vector<double>>> p;  // [s][a][s']
    std::vector<std::vector<double>> r;               // [s][a]
    std::vector<bool> terminal;
    double gamma = 0.99;
    std::size_t start_state = 0;

    void validate() const {
        require(n_states > 0 && n_actions > 0, ErrorCode::Precondition, "empty MDP");
        require(gamma >= 0.0 && gamma < 1.0, ErrorCode::Precondition, "gamma must be in [0,1)");
        require(p.size() == n_states && r.size() == n_states && terminal.size() == n_states,
                ErrorCode::ShapeMismatch, "MDP table sizes");
        require(start_state < n_states, ErrorCode::Precondition, "start state out of range");
        for (std::size_t s = 0; s < n_states; ++s) {
            require(p[s].size() == n_actions && r[s].size() == n_actions, ErrorCode::ShapeMismatch,
                    "MDP row sizes");
            for (std::size_t a = 0; a < n_actions; ++a) {
                require(p[s][a].size() == n_states, ErrorCode::ShapeMismatch, "transition row size");
                double sum = 0.0;
                for (double q : p[s][a]) {
                    require(q >= 0.0, ErrorCode::Precondition, "negative transition probability");
                    sum += q;
                }
                require(std::fabs(sum - 1.0) <= 1e-9, ErrorCode::Precondition,
                        "transition row does not sum to 1");
            }
        }
    }
};

using QTable = std::vector<std::vector<double>>;  // [s][a]

/// Argmax with ties broken toward the lowest action index (deterministic).
inline std::size_t argmax_action(const std::vector<double>& qrow) {
    std::size_t best = 0;
    for (std::size_t a = 1; a < qrow.size(); ++a)
        if (qrow[a] > qrow[best]) best = a;
    return best;
}

inline std::vector<std::size_t> greedy_policy(const QTable& q) {
    std::vector<std::size_t> pi(q.size());
    for (std::size_t s = 0; s < q.size(); ++s) pi[s] = argmax_action(q[s]);
    return pi;
}

struct ValueIterationResult {
    QTable q;
    std::vector<double> v;
    std::size_t iterations = 0;
    double residual = 0.0;
};

/// Q-value iteration to a sup-norm residual. With the default tolerance the
/// remaining error is far below the 1e-9 slack used by the bound checks.
inline ValueIterationResult value_iteration(const TabularMdp& m, double tol = 1e-13,
                                            std::size_t max_iter = 2000000) {
    std::vector<double> v(m.n_states, 0.0);
    QTable q(m.n_states, std::vector<double>(m.n_actions, 0.0));
    double residual = 0.0;
    std::size_t it = 0;
    for (; it < max_iter; ++it) {
        residual = 0.0;
        for (std::size_t s = 0; s < m.n_states; ++s) {
            if (m.terminal[s]) continue;
            double best = -std::numeric_limits<double>::infinity();
            for (std::size_t a = 0; a < m.n_actions; ++a) {
                double acc = m.r[s][a];
                const auto& row = m.p[s][a];
                for (std::size_t s2 = 0; s2 < m.n_states; ++s2)
                    if (row[s2] != 0.0) acc += m.gamma * row[s2] * v[s2];
                q[s][a] = acc;
                best = std::max(best, acc);
            }
            residual = std::max(residual, std::fabs(best - v[s]));
            v[s] = best;
        }
        if (residual < tol) break;
    }
    return {std::move(q), std::move(v), it + 1, residual};
}

/// Exact V^pi by solving (I - gamma P_pi) v = r_pi with partial-pivot
/// Gaussian elimination. Terminal rows pin v = 0.
inline std::vector<double> policy_evaluation_exact(const TabularMdp& m,
                                                   const std::vector<std::size_t>& pi) {
    require(pi.size() == m.n_states, ErrorCode::ShapeMismatch, "policy size");
    std::size_t n = m.n_states;
    std::vector<std::vector<double>> aug(n, std::vector<double>(n + 1, 0.0));
    for (std::size_t s = 0; s < n; ++s) {
        if (m.terminal[s]) {
            aug[s][s] = 1.0;
            aug[s][n] = 0.0;
            continue;
        }
        std::size_t a = pi[s];
        require(a < m.n_actions, ErrorCode::Precondition, "policy action out of range");
        for (std::size_t s2 = 0; s2 < n; ++s2) aug[s][s2] = -m.gamma * m.p[s][a][s2];
        aug[s][s] += 1.0;
        aug[s][n] = m.r[s][a];
    }
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t row = col + 1; row < n; ++row)
            if (std::fabs(aug[row][col]) > std::fabs(aug[piv][col])) piv = row;
        require(std::fabs(aug[piv][col]) > 1e-14, ErrorCode::Precondition,
                "singular system in policy evaluation");
        std::swap(aug[col], aug[piv]);
        for (std::size_t row = 0; row < n; ++row) {
            if (row == col) continue;
            double f = aug[row][col] / aug[col][col];
            if (f == 0.0) continue;
            for (std::size_t k = col; k <= n; ++k) aug[row][k] -= f * aug[col][k];
        }
    }
    std::vector<double> v(n);
    for (std::size_t s = 0; s < n; ++s) v[s] = aug[s][n] / aug[s][s];
    return v;
}

/// Q^pi(s,a) = r(s,a) + gamma sum_s' P(s'|s,a) V^pi(s').
inline QTable policy_q_values(const TabularMdp& m, const std::vector<double>& v_pi) {
    QTable q(m.n_states, std::vector<double>(m.n_actions, 0.0));
    for (std::size_t s = 0; s < m.n_states; ++s) {
        if (m.terminal[s]) continue;
        for (std::size_t a = 0; a < m.n_actions; ++a) {
            double acc = m.r[s][a];
            for (std::size_t s2 = 0; s2 < m.n_states; ++s2)
                if (m.p[s][a][s2] != 0.0) acc += m.gamma * m.p[s][a][s2] * v_pi[s2];
            q[s][a] = acc;
        }
    }
    return q;
}

/// Exact undiscounted H-step value of a stationary policy from s0 via
/// backward induction. Terminal states contribute nothing once reached.
inline double finite_horizon_value(const TabularMdp& m, const std::vector<std::size_t>& pi,
                                   std::size_t s0, std::size_t horizon) {
    require(pi.size() == m.n_states, ErrorCode::ShapeMismatch, "policy size");
    std::vector<double> v(m.n_states, 0.0), next(m.n_states, 0.0);
    for (std::size_t k = 0; k < horizon; ++k) {
        for (std::size_t s = 0; s < m.n_states; ++s) {
            if (m.terminal[s]) {
                next[s] = 0.0;
                continue;
            }
            std::size_t a = pi[s];
            double acc = m.r[s][a];
            for (std::size_t s2 = 0; s2 < m.n_states; ++s2)
                if (m.p[s][a][s2] != 0.0) acc += m.p[s][a][s2] * v[s2];
            next[s] = acc;
        }
        std::swap(v, next);
    }
    return v[s0];
}

/// Same quantity by forward state-occupancy propagation. Serves as an
/// independent route for cross-checking finite_horizon_value.
inline double occupancy_value(const TabularMdp& m, const std::vector<std::size_t>& pi,
                              std::size_t s0, std::size_t horizon) {
    require(pi.size() == m.n_states, ErrorCode::ShapeMismatch, "policy size");
    std::vector<double> d(m.n_states, 0.0), next(m.n_states, 0.0);
    d[s0] = 1.0;
    double total = 0.0;
    for (std::size_t k = 0; k < horizon; ++k) {
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t s = 0; s < m.n_states; ++s) {
            if (d[s] == 0.0 || m.terminal[s]) continue;
            std::size_t a = pi[s];
            total += d[s] * m.r[s][a];
            for (std::size_t s2 = 0; s2 < m.n_states; ++s2)
                if (m.p[s][a][s2] != 0.0) next[s2] += d[s] * m.p[s][a][s2];
        }
        std::swap(d, next);
    }
    return total;
}

/// Largest total-variation distance between corresponding transition rows:
/// max over (s,a) of 1/2 * sum_s' |P_a(s'|s,a) - P_b(s'|s,a)|, in [0,1].
inline double tv_distance(const TabularMdp& a, const TabularMdp& b) {
    require(a.n_states == b.n_states && a.n_actions == b.n_actions, ErrorCode::ShapeMismatch,
            "tv_distance requires matching state/action counts");
    double worst = 0.0;
    for (std::size_t s = 0; s < a.n_states; ++s)
        for (std::size_t act = 0; act < a.n_actions; ++act) {
            double l1 = 0.0;
            for (std::size_t s2 = 0; s2 < a.n_states; ++s2)
                l1 += std::fabs(a.p[s][act][s2] - b.p[s][act][s2]);
            worst = std::max(worst, 0.5 * l1);
        }
    return worst;
}

/// Quantities entering the optimal-value transfer bound between two MDPs
/// that share a state/action space and discount.
struct ValueGapBound {
    double lhs = 0.0;      // || Q_T^{pi_T*} - Q_T^{pi_S*} ||_inf
    double rhs = 0.0;      // bound value
    double delta_r = 0.0;  // max |R_S - R_T|
    double delta_tv = 0.0; // max total-variation distance between transition rows
    double r_max_source = 0.0;
    double r_max_target = 0.0;
    double slack = 0.0;    // rhs - lhs
};

inline ValueGapBound value_gap_bound(const TabularMdp& source, const TabularMdp& target) {
    require(source.n_states == target.n_states && source.n_actions == target.n_actions,
            ErrorCode::DomainMismatch, "bound requires matching state/action spaces");
    require(source.gamma == target.gamma, ErrorCode::DomainMismatch,
            "bound requires matching discount");
    ValueGapBound b;
    b.delta_tv = tv_distance(source, target);
    for (std::size_t s = 0; s < source.n_states; ++s) {
        for (std::size_t a = 0; a < source.n_actions; ++a) {
            b.delta_r = std::max(b.delta_r, std::fabs(source.r[s][a] - target.r[s][a]));
            b.r_max_source = std::max(b.r_max_source, std::fabs(source.r[s][a]));
            b.r_max_target = std::max(b.r_max_target, std::fabs(target.r[s][a]));
        }
    }
    double gamma = target.gamma;
    b.rhs = 2.0 * b.delta_r / (1.0 - gamma) +
            2.0 * gamma * b.delta_tv * (b.r_max_source + b.r_max_target) /
                ((1.0 - gamma) * (1.0 - gamma));

    auto vi_s = value_iteration(source);
    auto vi_t = value_iteration(target);
    auto pi_s = greedy_policy(vi_s.q);
    auto q_t_under_pi_s = policy_q_values(target, policy_evaluation_exact(target, pi_s));
    for (std::size_t s = 0; s < target.n_states; ++s)
        for (std::size_t a = 0; a < target.n_actions; ++a)
            b.lhs = std::max(b.lhs, std::fabs(vi_t.q[s][a] - q_t_under_pi_s[s][a]));
    b.slack = b.rhs - b.lhs;
    return b;
}

/// Random dense MDP with Dirichlet(1) transition rows and rewards in [-1,1].
inline TabularMdp random_mdp(std::size_t n_states, std::size_t n_actions, double gamma, Rng& rng) {
    TabularMdp m;
    m.n_states = n_states;
    m.n_actions = n_actions;
    m.gamma = gamma;
    m.terminal.assign(n_states, false);
    m.p.assign(n_states, std::vector<std::vector<double>>(n_actions, std::vector<double>(n_states)));
    m.r.assign(n_states, std::vector<double>(n_actions));
    for (std::size_t s = 0; s < n_states; ++s) {
        for (std::size_t a = 0; a < n_actions; ++a) {
            double sum = 0.0;
            for (std::size_t s2 = 0; s2 < n_states; ++s2) {
                double e = -std::log(1.0 - rng.uniform());  // Exp(1) draws normalize to Dirichlet(1)
                m.p[s][a][s2] = e;
                sum += e;
            }
            for (std::size_t s2 = 0; s2 < n_states; ++s2) m.p[s][a][s2] /= sum;
            m.r[s][a] = rng.uniform(-1.0, 1.0);
        }
    }
    return m;
}

/// Perturb an MDP's rewards and transitions by bounded noise; used to build
/// source/target pairs whose gap the transfer bound must dominate.
inline TabularMdp perturb_mdp(const TabularMdp& base, double reward_noise, double transition_noise,
                              Rng& rng) {
    TabularMdp m = base;
    for (std::size_t s = 0; s < m.n_states; ++s) {
        for (std::size_t a = 0; a < m.n_actions; ++a) {
            m.r[s][a] += rng.uniform(-reward_noise, reward_noise);
            if (transition_noise > 0.0) {
                double sum = 0.0;
                for (std::size_t s2 = 0; s2 < m.n_states; ++s2) {
                    double v = m.p[s][a][s2] + rng.uniform(0.0, transition_noise);
                    m.p[s][a][s2] = v;
                    sum += v;
                }
                for (std::size_t s2 = 0; s2 < m.n_states; ++s2) m.p[s][a][s2] /= sum;
            }
        }
    }
    return m;
}

struct QLearningParams {
    std::size_t total_steps = 5000;
    std::size_t episode_horizon = 100;
    double alpha = 0.1;
    double epsilon = 0.1;
    std::size_t eval_every = 10;       // environment steps between evaluations
    std::size_t eval_horizon = 100;    // horizon of the exact greedy evaluation
    std::uint64_t seed = 0;
    QTable init_q;                     // empty = start from zeros
};

struct QLearningEvalPoint {
    std::size_t env_step = 0;
    std::size_t eval_episode = 0;  // running evaluation index
    double rho = 0.0;              // exact undiscounted return of the greedy policy
    std::vector<std::size_t> greedy;
};

struct QLearningResult {
    QTable q;
    std::vector<QLearningEvalPoint> evals;
};

/// Tabular Q-learning with epsilon-greedy behavior. Evaluation is exact:
/// rho is the undiscounted finite-horizon value of the current greedy policy
/// from the start state, so traces carry no Monte-Carlo noise.
inline QLearningResult q_learning(const TabularMdp& m, const QLearningParams& pr) {
    m.validate();
    Rng rng = Rng::stream(pr.seed, "qlearn");
    QTable q(m.n_states, std::vector<double>(m.n_actions, 0.0));
    if (!pr.init_q.empty()) {
        require(pr.init_q.size() == m.n_states && pr.init_q[0].size() == m.n_actions,
                ErrorCode::ShapeMismatch, "init_q shape does not match the task");
        q = pr.init_q;
    }
    QLearningResult out;

    auto evaluate = [&](std::size_t step) {
        QLearningEvalPoint e;
        e.env_step = step;
        e.eval_episode = out.evals.size();
        e.greedy = greedy_policy(q);
        e.rho = finite_horizon_value(m, e.greedy, m.start_state, pr.eval_horizon);
        out.evals.push_back(std::move(e));
    };

    std::size_t s = m.start_state;
    std::size_t steps_in_episode = 0;
    evaluate(0);
    for (std::size_t step = 1; step <= pr.total_steps; ++step) {
        std::size_t a;
        if (rng.uniform() < pr.epsilon)
            a = rng.index(m.n_actions);
        else
            a = argmax_action(q[s]);

        // Sample s' from the transition row.
        double u = rng.uniform();
        std::size_t s2 = m.n_states - 1;
        double acc = 0.0;
        for (std::size_t k = 0; k < m.n_states; ++k) {
            acc += m.p[s][a][k];
            if (u < acc) {
                s2 = k;
                break;
            }
        }

        double target = m.r[s][a];
        if (!m.terminal[s2]) target += m.gamma * *std::max_element(q[s2].begin(), q[s2].end());
        q[s][a] += pr.alpha * (target - q[s][a]);

        ++steps_in_episode;
        if (m.terminal[s2] || steps_in_episode >= pr.episode_horizon) {
            s = m.start_state;
            steps_in_episode = 0;
        } else {
            s = s2;
        }

        if (step % pr.eval_every == 0) evaluate(step);
    }
    out.q = std::move(q);
    return out;
}

}  // namespace xferlab
