#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "common.hpp"
#include "json_util.hpp"
#include "rng.hpp"

namespace xferlab {

enum class RewardMode { NegDistance, ForwardProgress };

inline const char* reward_mode_name(RewardMode m) {
    return m == RewardMode::NegDistance ? "neg_distance" : "forward_progress";
}

inline RewardMode reward_mode_from_name(const std::string& s) {
    if (s == "neg_distance") return RewardMode::NegDistance;
    if (s == "forward_progress") return RewardMode::ForwardProgress;
    throw Error(ErrorCode::ConfigBadValue, "unknown reward_mode: " + s);
}

/// Parameters of the planar point-mass task. State is [x, y, vx, vy], the
/// action is a force. Source/target task pairs differ along the physics or
/// reward fields (damping, mass, reward_scale, goal).
struct EnvSpec {
    std::string name = "point_mass";
    double mass = 1.0;
    double damping = 1.0;
    double dt = 0.05;
    std::size_t horizon = 200;
    std::vector<double> action_low = {-1.0, -1.0};
    std::vector<double> action_high = {1.0, 1.0};
    std::vector<double> goal = {0.0, 0.0};
    double goal_radius = 0.1;
    RewardMode reward_mode = RewardMode::NegDistance;
    double reward_scale = 1.0;
    double process_noise = 0.0;
    std::vector<double> start_low = {-1.0, -1.0};
    std::vector<double> start_high = {1.0, 1.0};

    static constexpr std::size_t state_dim = 4;
    static constexpr std::size_t action_dim = 2;

    void validate() const {
        require(name == "point_mass", ErrorCode::ConfigBadValue, "unknown env name: " + name);
        require(mass > 0.0, ErrorCode::ConfigBadValue, "mass must be positive");
        require(damping >= 0.0, ErrorCode::ConfigBadValue, "damping must be non-negative");
        require(dt > 0.0, ErrorCode::ConfigBadValue, "dt must be positive");
        require(horizon > 0, ErrorCode::ConfigBadValue, "horizon must be positive");
        require(goal_radius > 0.0, ErrorCode::ConfigBadValue, "goal_radius must be positive");
        require(process_noise >= 0.0, ErrorCode::ConfigBadValue, "process_noise must be >= 0");
        auto dim2 = [&](const std::vector<double>& v, const char* what) {
            require(v.size() == 2, ErrorCode::ConfigBadValue, std::string(what) + " must have 2 entries");
        };
        dim2(action_low, "action_low");
        dim2(action_high, "action_high");
        dim2(goal, "goal");
        dim2(start_low, "start_low");
        dim2(start_high, "start_high");
        for (int d = 0; d < 2; ++d) {
            require(action_low[std::size_t(d)] < action_high[std::size_t(d)],
                    ErrorCode::ConfigBadValue, "action bounds must be ordered");
            require(start_low[std::size_t(d)] <= start_high[std::size_t(d)],
                    ErrorCode::ConfigBadValue, "start box must be ordered");
        }
        require(reward_scale != 0.0, ErrorCode::ConfigBadValue, "reward_scale must be non-zero");
    }

    static EnvSpec from_json(const Json& j, const std::string& context) {
        reject_unknown_keys(j,
                            {"name", "mass", "damping", "dt", "horizon", "action_low",
                             "action_high", "goal", "goal_radius", "reward_mode", "reward_scale",
                             "process_noise", "start_low", "start_high"},
                            context);
        EnvSpec s;
        s.name = json_optional<std::string>(j, "name", s.name, context);
        s.mass = json_optional<double>(j, "mass", s.mass, context);
        s.damping = json_optional<double>(j, "damping", s.damping, context);
        s.dt = json_optional<double>(j, "dt", s.dt, context);
        s.horizon = json_optional<std::size_t>(j, "horizon", s.horizon, context);
        s.action_low = json_optional<std::vector<double>>(j, "action_low", s.action_low, context);
        s.action_high = json_optional<std::vector<double>>(j, "action_high", s.action_high, context);
        s.goal = json_optional<std::vector<double>>(j, "goal", s.goal, context);
        s.goal_radius = json_optional<double>(j, "goal_radius", s.goal_radius, context);
        s.reward_mode = reward_mode_from_name(
            json_optional<std::string>(j, "reward_mode", reward_mode_name(s.reward_mode), context));
        s.reward_scale = json_optional<double>(j, "reward_scale", s.reward_scale, context);
        s.process_noise = json_optional<double>(j, "process_noise", s.process_noise, context);
        s.start_low = json_optional<std::vector<double>>(j, "start_low", s.start_low, context);
        s.start_high = json_optional<std::vector<double>>(j, "start_high", s.start_high, context);
        s.validate();
        return s;
    }

    Json to_json() const {
        Json j;
        j["name"] = name;
        j["mass"] = mass;
        j["damping"] = damping;
        j["dt"] = dt;
        j["horizon"] = horizon;
        j["action_low"] = action_low;
        j["action_high"] = action_high;
        j["goal"] = goal;
        j["goal_radius"] = goal_radius;
        j["reward_mode"] = reward_mode_name(reward_mode);
        j["reward_scale"] = reward_scale;
        j["process_noise"] = process_noise;
        j["start_low"] = start_low;
        j["start_high"] = start_high;
        return j;
    }

    /// True when two specs describe the same state/action interface (the
    /// requirement for transferring policies or comparing traces).
    bool same_domain(const EnvSpec& other) const {
        return name == other.name && action_low == other.action_low &&
               action_high == other.action_high;
    }
};

/// Planar point mass with linear drag, stepped by semi-implicit Euler:
///   v' = v + dt * (a - damping * v) / mass   (+ optional noise)
///   x' = x + dt * v'
/// The episode terminates when the position enters the goal ball.
class PointMassEnv {
  public:
    explicit PointMassEnv(EnvSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

    const EnvSpec& spec() const { return spec_; }

    std::vector<double> reset(Rng& rng) {
        state_ = {rng.uniform(spec_.start_low[0], spec_.start_high[0]),
                  rng.uniform(spec_.start_low[1], spec_.start_high[1]), 0.0, 0.0};
        return state_;
    }

    void set_state(const std::vector<double>& s) {
        require(s.size() == EnvSpec::state_dim, ErrorCode::ShapeMismatch, "state size");
        state_ = s;
    }

    const std::vector<double>& state() const { return state_; }

    struct StepResult {
        std::vector<double> next_state;
        double reward = 0.0;
        bool terminal = false;  // goal reached (distinct from horizon truncation)
    };

    StepResult step(const std::vector<double>& action, Rng& rng) {
        require(action.size() == EnvSpec::action_dim, ErrorCode::ShapeMismatch, "action size");
        for (std::size_t d = 0; d < EnvSpec::action_dim; ++d)
            require(action[d] >= spec_.action_low[d] - 1e-12 &&
                        action[d] <= spec_.action_high[d] + 1e-12,
                    ErrorCode::ActionOutOfBounds, "action outside the declared bounds");

        double dist_before = distance_to_goal(state_);
        StepResult out;
        out.next_state = state_;
        for (std::size_t d = 0; d < 2; ++d) {
            double v = state_[2 + d];
            double acc = (action[d] - spec_.damping * v) / spec_.mass;
            double v2 = v + spec_.dt * acc;
            if (spec_.process_noise > 0.0)
                v2 += spec_.process_noise * std::sqrt(spec_.dt) * rng.normal();
            out.next_state[2 + d] = v2;
            out.next_state[d] = state_[d] + spec_.dt * v2;
        }
        double dist_after = distance_to_goal(out.next_state);
        switch (spec_.reward_mode) {
            case RewardMode::NegDistance:
                out.reward = -dist_after * spec_.reward_scale;
                break;
            case RewardMode::ForwardProgress:
                out.reward = (dist_before - dist_after) * spec_.reward_scale;
                break;
        }
        out.terminal = dist_after <= spec_.goal_radius;
        state_ = out.next_state;
        return out;
    }

    double distance_to_goal(const std::vector<double>& s) const {
        double dx = s[0] - spec_.goal[0];
        double dy = s[1] - spec_.goal[1];
        return std::sqrt(dx * dx + dy * dy);
    }

  private:
    EnvSpec spec_;
    std::vector<double> state_;
};

/// Hand-tuned PD controller; an oracle baseline independent of any learning
/// code, used to calibrate "solved" thresholds.
inline std::vector<double> pd_controller_action(const EnvSpec& spec, const std::vector<double>& s,
                                                double kp = 4.0, double kd = 3.0) {
    std::vector<double> a(2);
    for (std::size_t d = 0; d < 2; ++d) {
        double raw = -kp * (s[d] - spec.goal[d]) - kd * s[2 + d];
        a[d] = std::min(std::max(raw, spec.action_low[d]), spec.action_high[d]);
    }
    return a;
}

/// One full episode driven by an arbitrary action function; returns the
/// undiscounted return. Used by evaluation and the oracle calibration.
template <class ActionFn>
double run_episode(PointMassEnv& env, ActionFn&& act, Rng& rng) {
    env.reset(rng);
    double total = 0.0;
    for (std::size_t t = 0; t < env.spec().horizon; ++t) {
        auto a = act(env.state());
        auto res = env.step(a, rng);
        total += res.reward;
        if (res.terminal) break;
    }
    return total;
}

}  // namespace xferlab
