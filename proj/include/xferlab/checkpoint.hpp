#pragma once

#include <string>
#include <vector>

#include "env.hpp"
#include "json_util.hpp"
#include "nn.hpp"
#include "policy.hpp"
#include "sac.hpp"

namespace xferlab {

// JSON checkpoints for trained learners. Weights are stored as row-major
// number arrays per layer; doubles survive a save/load/save cycle bit for bit
// because both the JSON writer and format_double emit shortest round-trip
// decimals.

inline Json mlp_to_json(const MlpParams& p) {
    Json j;
    j["layer_sizes"] = p.layer_sizes;
    Json acts = Json::array();
    for (Activation a : p.activations) acts.push_back(activation_name(a));
    j["activations"] = acts;
    Json ws = Json::array(), bs = Json::array();
    for (std::size_t l = 0; l < p.n_layers(); ++l) {
        ws.push_back(p.weights[l].data);  // row-major (in_dim x out_dim)
        bs.push_back(p.biases[l].data);
    }
    j["weights"] = ws;
    j["biases"] = bs;
    return j;
}

inline MlpParams mlp_from_json(const Json& j, const std::string& context) {
    reject_unknown_keys(j, {"layer_sizes", "activations", "weights", "biases"}, context);
    MlpParams p;
    p.layer_sizes = json_require<std::vector<std::size_t>>(j, "layer_sizes", context);
    require(p.layer_sizes.size() >= 2, ErrorCode::ConfigBadValue,
            context + ": need at least input and output layer sizes");
    auto act_names = json_require<std::vector<std::string>>(j, "activations", context);
    for (const auto& s : act_names) p.activations.push_back(activation_from_name(s));
    auto ws = json_require<std::vector<std::vector<double>>>(j, "weights", context);
    auto bs = json_require<std::vector<std::vector<double>>>(j, "biases", context);
    std::size_t n_layers = p.layer_sizes.size() - 1;
    require(p.activations.size() == n_layers && ws.size() == n_layers && bs.size() == n_layers,
            ErrorCode::ConfigBadValue, context + ": one weight/bias/activation set per layer");
    for (std::size_t l = 0; l < n_layers; ++l) {
        std::size_t in = p.layer_sizes[l], out = p.layer_sizes[l + 1];
        require(ws[l].size() == in * out, ErrorCode::ShapeMismatch,
                context + ": weight matrix " + std::to_string(l) + " has wrong size");
        require(bs[l].size() == out, ErrorCode::ShapeMismatch,
                context + ": bias vector " + std::to_string(l) + " has wrong size");
        Mat w(in, out), b(1, out);
        w.data = ws[l];
        b.data = bs[l];
        require(all_finite(w.data) && all_finite(b.data), ErrorCode::NumericNan,
                context + ": non-finite weight");
        p.weights.push_back(std::move(w));
        p.biases.push_back(std::move(b));
    }
    return p;
}

inline Json policy_to_json(const GaussianPolicy& p) {
    Json j;
    j["net"] = mlp_to_json(p.net);
    j["state_dim"] = p.state_dim;
    j["action_dim"] = p.action_dim;
    j["action_low"] = p.low;
    j["action_high"] = p.high;
    j["squash"] = p.squash;
    j["log_std_min"] = p.log_std_min;
    j["log_std_max"] = p.log_std_max;
    return j;
}

inline GaussianPolicy policy_from_json(const Json& j, const std::string& context) {
    reject_unknown_keys(j,
                        {"net", "state_dim", "action_dim", "action_low", "action_high", "squash",
                         "log_std_min", "log_std_max"},
                        context);
    GaussianPolicy p;
    p.net = mlp_from_json(json_require<Json>(j, "net", context), context + ".net");
    p.state_dim = json_require<std::size_t>(j, "state_dim", context);
    p.action_dim = json_require<std::size_t>(j, "action_dim", context);
    p.low = json_require<std::vector<double>>(j, "action_low", context);
    p.high = json_require<std::vector<double>>(j, "action_high", context);
    p.squash = json_require<bool>(j, "squash", context);
    p.log_std_min = json_require<double>(j, "log_std_min", context);
    p.log_std_max = json_require<double>(j, "log_std_max", context);
    p.validate();
    return p;
}

/// Everything needed to resume evaluation or warm-start training: the task
/// the learner saw, the actor, both critics with their targets, and the
/// scalar hyperparameters that shaped the values.
struct Checkpoint {
    EnvSpec env;
    GaussianPolicy actor;
    MlpParams q1, q2, q1_target, q2_target;
    double alpha = 0.2;
    double gamma = 0.99;
    double polyak_tau = 0.005;
    std::size_t env_steps = 0;

    static constexpr int schema_version = 1;
};

inline Checkpoint make_checkpoint(const SacLearner& learner, std::size_t env_steps) {
    Checkpoint ck;
    ck.env = learner.env_spec();
    ck.actor = learner.policy();
    ck.q1 = learner.q1();
    ck.q2 = learner.q2();
    ck.q1_target = learner.q1_target();
    ck.q2_target = learner.q2_target();
    ck.alpha = learner.hyper().alpha;
    ck.gamma = learner.hyper().gamma;
    ck.polyak_tau = learner.hyper().polyak_tau;
    ck.env_steps = env_steps;
    return ck;
}

inline Json checkpoint_to_json(const Checkpoint& ck) {
    Json j;
    j["schema_version"] = Checkpoint::schema_version;
    j["kind"] = "sac_checkpoint";
    j["env"] = ck.env.to_json();
    j["actor"] = policy_to_json(ck.actor);
    Json critics;
    critics["q1"] = mlp_to_json(ck.q1);
    critics["q2"] = mlp_to_json(ck.q2);
    critics["q1_target"] = mlp_to_json(ck.q1_target);
    critics["q2_target"] = mlp_to_json(ck.q2_target);
    j["critics"] = critics;
    Json learner;
    learner["alpha"] = ck.alpha;
    learner["gamma"] = ck.gamma;
    learner["polyak_tau"] = ck.polyak_tau;
    learner["env_steps"] = ck.env_steps;
    j["learner"] = learner;
    return j;
}

inline Checkpoint checkpoint_from_json(const Json& j, const std::string& context) {
    reject_unknown_keys(j, {"schema_version", "kind", "env", "actor", "critics", "learner"},
                        context);
    require(json_require<int>(j, "schema_version", context) == Checkpoint::schema_version,
            ErrorCode::ConfigBadValue, context + ": unsupported schema_version");
    require(json_require<std::string>(j, "kind", context) == "sac_checkpoint",
            ErrorCode::ConfigBadValue, context + ": not a sac_checkpoint document");
    Checkpoint ck;
    ck.env = EnvSpec::from_json(json_require<Json>(j, "env", context), context + ".env");
    ck.actor = policy_from_json(json_require<Json>(j, "actor", context), context + ".actor");
    Json critics = json_require<Json>(j, "critics", context);
    reject_unknown_keys(critics, {"q1", "q2", "q1_target", "q2_target"}, context + ".critics");
    ck.q1 = mlp_from_json(json_require<Json>(critics, "q1", context), context + ".critics.q1");
    ck.q2 = mlp_from_json(json_require<Json>(critics, "q2", context), context + ".critics.q2");
    ck.q1_target = mlp_from_json(json_require<Json>(critics, "q1_target", context),
                                 context + ".critics.q1_target");
    ck.q2_target = mlp_from_json(json_require<Json>(critics, "q2_target", context),
                                 context + ".critics.q2_target");
    Json learner = json_require<Json>(j, "learner", context);
    reject_unknown_keys(learner, {"alpha", "gamma", "polyak_tau", "env_steps"},
                        context + ".learner");
    ck.alpha = json_require<double>(learner, "alpha", context);
    ck.gamma = json_require<double>(learner, "gamma", context);
    ck.polyak_tau = json_require<double>(learner, "polyak_tau", context);
    ck.env_steps = json_require<std::size_t>(learner, "env_steps", context);
    return ck;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    write_text_file(path, canonical_json(checkpoint_to_json(ck)));
}

inline Checkpoint load_checkpoint(const std::string& path) {
    return checkpoint_from_json(parse_json(read_text_file(path), path), path);
}

}  // namespace xferlab
