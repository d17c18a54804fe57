#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "apt.hpp"
#include "env.hpp"
#include "gridworld.hpp"
#include "json_util.hpp"
#include "mdp.hpp"
#include "sac.hpp"
#include "task_sim.hpp"

namespace xferlab {

// Experiment configuration: strict JSON, unknown keys rejected, referenced
// files checked at parse time. A config names one subcommand and carries that
// subcommand's block under a key of the same name.

/// Soft actor-critic training block shared by `train` and `transfer`.
struct SacBlock {
    SacHyper hyper;
    std::size_t total_steps = 30000;

    static SacBlock from_json(const Json& j, const std::string& context) {
        reject_unknown_keys(j,
                            {"hidden", "activation", "lr", "gamma", "alpha", "polyak_tau",
                             "buffer_capacity", "batch_size", "start_steps", "update_every",
                             "gradient_updates", "eval_every", "eval_episodes", "total_steps"},
                            context);
        SacBlock b;
        b.hyper.hidden =
            json_optional<std::vector<std::size_t>>(j, "hidden", b.hyper.hidden, context);
        b.hyper.activation = activation_from_name(
            json_optional<std::string>(j, "activation", activation_name(b.hyper.activation), context));
        b.hyper.lr = json_optional<double>(j, "lr", b.hyper.lr, context);
        b.hyper.gamma = json_optional<double>(j, "gamma", b.hyper.gamma, context);
        b.hyper.alpha = json_optional<double>(j, "alpha", b.hyper.alpha, context);
        b.hyper.polyak_tau = json_optional<double>(j, "polyak_tau", b.hyper.polyak_tau, context);
        b.hyper.buffer_capacity =
            json_optional<std::size_t>(j, "buffer_capacity", b.hyper.buffer_capacity, context);
        b.hyper.batch_size = json_optional<std::size_t>(j, "batch_size", b.hyper.batch_size, context);
        b.hyper.start_steps = json_optional<std::size_t>(j, "start_steps", b.hyper.start_steps, context);
        b.hyper.update_every =
            json_optional<std::size_t>(j, "update_every", b.hyper.update_every, context);
        b.hyper.gradient_updates =
            json_optional<std::size_t>(j, "gradient_updates", b.hyper.gradient_updates, context);
        b.hyper.eval_every = json_optional<std::size_t>(j, "eval_every", b.hyper.eval_every, context);
        b.hyper.eval_episodes =
            json_optional<std::size_t>(j, "eval_episodes", b.hyper.eval_episodes, context);
        b.total_steps = json_optional<std::size_t>(j, "total_steps", b.total_steps, context);
        b.hyper.validate();
        require(b.total_steps > 0, ErrorCode::ConfigBadValue, context + ": total_steps must be > 0");
        return b;
    }
};

struct ToyTarget {
    std::string name;
    std::string layout;
};

/// Four-room Q-transfer experiment.
struct ToyBlock {
    std::string source_layout;
    std::vector<ToyTarget> targets;
    GridMdpParams grid;
    QLearningParams qlearn;  // seed filled per run

    static ToyBlock from_json(const Json& j, const std::string& context) {
        reject_unknown_keys(j, {"source_layout", "targets", "grid", "qlearn"}, context);
        ToyBlock b;
        b.source_layout = json_require<std::string>(j, "source_layout", context);
        Json targets = json_require<Json>(j, "targets", context);
        require(targets.is_array() && !targets.empty(), ErrorCode::ConfigBadValue,
                context + ": targets must be a non-empty array");
        for (std::size_t i = 0; i < targets.size(); ++i) {
            std::string tctx = context + ".targets[" + std::to_string(i) + "]";
            reject_unknown_keys(targets[i], {"name", "layout"}, tctx);
            ToyTarget t;
            t.name = json_require<std::string>(targets[i], "name", tctx);
            t.layout = json_require<std::string>(targets[i], "layout", tctx);
            b.targets.push_back(std::move(t));
        }
        if (j.contains("grid")) {
            Json g = j.at("grid");
            std::string gctx = context + ".grid";
            reject_unknown_keys(g, {"gamma", "step_reward", "goal_reward", "slip"}, gctx);
            b.grid.gamma = json_optional<double>(g, "gamma", b.grid.gamma, gctx);
            b.grid.step_reward = json_optional<double>(g, "step_reward", b.grid.step_reward, gctx);
            b.grid.goal_reward = json_optional<double>(g, "goal_reward", b.grid.goal_reward, gctx);
            b.grid.slip = json_optional<double>(g, "slip", b.grid.slip, gctx);
        }
        if (j.contains("qlearn")) {
            Json q = j.at("qlearn");
            std::string qctx = context + ".qlearn";
            reject_unknown_keys(q,
                                {"alpha", "epsilon", "total_steps", "episode_horizon", "eval_every",
                                 "eval_horizon"},
                                qctx);
            b.qlearn.alpha = json_optional<double>(q, "alpha", b.qlearn.alpha, qctx);
            b.qlearn.epsilon = json_optional<double>(q, "epsilon", b.qlearn.epsilon, qctx);
            b.qlearn.total_steps =
                json_optional<std::size_t>(q, "total_steps", b.qlearn.total_steps, qctx);
            b.qlearn.episode_horizon =
                json_optional<std::size_t>(q, "episode_horizon", b.qlearn.episode_horizon, qctx);
            b.qlearn.eval_every =
                json_optional<std::size_t>(q, "eval_every", b.qlearn.eval_every, qctx);
            b.qlearn.eval_horizon =
                json_optional<std::size_t>(q, "eval_horizon", b.qlearn.eval_horizon, qctx);
        }
        return b;
    }
};

/// Scratch soft actor-critic baseline on one task.
struct TrainBlock {
    EnvSpec env;
    SacBlock sac;
    std::optional<double> threshold;  // calibrated "solved" return level
    bool early_stop = false;          // stop a seed once the threshold is reached

    static TrainBlock from_json(const Json& j, const std::string& context) {
        reject_unknown_keys(j, {"env", "sac", "threshold", "early_stop"}, context);
        TrainBlock b;
        b.env = EnvSpec::from_json(json_require<Json>(j, "env", context), context + ".env");
        if (j.contains("sac")) b.sac = SacBlock::from_json(j.at("sac"), context + ".sac");
        if (j.contains("threshold"))
            b.threshold = json_require<double>(j, "threshold", context);
        b.early_stop = json_optional<bool>(j, "early_stop", b.early_stop, context);
        require(!b.early_stop || b.threshold.has_value(), ErrorCode::ConfigBadValue,
                context + ": early_stop needs a threshold");
        return b;
    }
};

/// Where the source policy for a transfer run comes from: a saved checkpoint,
/// or an inline source-training block run once before the seeds.
struct TransferSource {
    std::optional<std::string> checkpoint;
    std::optional<TrainBlock> train;
    std::uint64_t train_seed = 0;

    static TransferSource from_json(const Json& j, const std::string& context) {
        reject_unknown_keys(j, {"checkpoint", "train", "train_seed"}, context);
        TransferSource s;
        if (j.contains("checkpoint"))
            s.checkpoint = json_require<std::string>(j, "checkpoint", context);
        if (j.contains("train"))
            s.train = TrainBlock::from_json(j.at("train"), context + ".train");
        s.train_seed = json_optional<std::uint64_t>(j, "train_seed", s.train_seed, context);
        require(s.checkpoint.has_value() != s.train.has_value(), ErrorCode::ConfigBadValue,
                context + ": give exactly one of 'checkpoint' or 'train'");
        return s;
    }
};

/// Advantage-regularized transfer plus its baselines on a target task.
struct TransferBlock {
    TransferSource source;
    EnvSpec target_env;
    SacBlock sac;
    TransferOptions options;
    bool run_scratch = true;
    bool run_finetune = true;
    bool run_zero_shot = true;

    static TransferBlock from_json(const Json& j, const std::string& context) {
        reject_unknown_keys(j, {"source", "target_env", "sac", "gap_formula", "beta_override",
                                "beta_clip", "source_lr", "baselines"},
                            context);
        TransferBlock b;
        b.source = TransferSource::from_json(json_require<Json>(j, "source", context),
                                             context + ".source");
        b.target_env = EnvSpec::from_json(json_require<Json>(j, "target_env", context),
                                          context + ".target_env");
        if (j.contains("sac")) b.sac = SacBlock::from_json(j.at("sac"), context + ".sac");
        b.options.gap_formula = gap_formula_from_name(
            json_optional<std::string>(j, "gap_formula", "soft", context));
        if (j.contains("beta_override"))
            b.options.beta_override = json_require<double>(j, "beta_override", context);
        b.options.beta_clip = json_optional<double>(j, "beta_clip", b.options.beta_clip, context);
        b.options.source_lr = json_optional<double>(j, "source_lr", b.options.source_lr, context);
        if (j.contains("baselines")) {
            auto names = json_require<std::vector<std::string>>(j, "baselines", context);
            b.run_scratch = b.run_finetune = b.run_zero_shot = false;
            for (const auto& n : names) {
                if (n == "scratch")
                    b.run_scratch = true;
                else if (n == "finetune")
                    b.run_finetune = true;
                else if (n == "zero_shot")
                    b.run_zero_shot = true;
                else
                    throw Error(ErrorCode::ConfigBadValue, context + ": unknown baseline '" + n +
                                                               "' (scratch|finetune|zero_shot)");
            }
        }
        require(b.run_scratch, ErrorCode::ConfigBadValue,
                context + ": the scratch baseline is required (relative transfer needs it)");
        return b;
    }
};

/// Model-based task-similarity measurement over a list of targets.
struct SimilarityBlock {
    EnvSpec source;
    std::vector<std::pair<std::string, EnvSpec>> targets;
    SimilarityConfig model;  // seed filled per run

    static SimilarityBlock from_json(const Json& j, const std::string& context) {
        reject_unknown_keys(j, {"source", "targets", "model"}, context);
        SimilarityBlock b;
        b.source =
            EnvSpec::from_json(json_require<Json>(j, "source", context), context + ".source");
        Json targets = json_require<Json>(j, "targets", context);
        require(targets.is_array() && !targets.empty(), ErrorCode::ConfigBadValue,
                context + ": targets must be a non-empty array");
        for (std::size_t i = 0; i < targets.size(); ++i) {
            std::string tctx = context + ".targets[" + std::to_string(i) + "]";
            reject_unknown_keys(targets[i], {"name", "env"}, tctx);
            std::string name = json_require<std::string>(targets[i], "name", tctx);
            EnvSpec env =
                EnvSpec::from_json(json_require<Json>(targets[i], "env", tctx), tctx + ".env");
            b.targets.push_back({name, env});
        }
        if (j.contains("model")) {
            Json m = j.at("model");
            std::string mctx = context + ".model";
            reject_unknown_keys(m,
                                {"n_samples", "epochs", "batch_size", "lr", "encoder_hidden",
                                 "latent_dim", "decoder_hidden", "holdout_fraction",
                                 "literal_self_model"},
                                mctx);
            b.model.n_samples = json_optional<std::size_t>(m, "n_samples", b.model.n_samples, mctx);
            b.model.epochs = json_optional<std::size_t>(m, "epochs", b.model.epochs, mctx);
            b.model.batch_size =
                json_optional<std::size_t>(m, "batch_size", b.model.batch_size, mctx);
            b.model.lr = json_optional<double>(m, "lr", b.model.lr, mctx);
            b.model.encoder_hidden = json_optional<std::vector<std::size_t>>(
                m, "encoder_hidden", b.model.encoder_hidden, mctx);
            b.model.latent_dim = json_optional<std::size_t>(m, "latent_dim", b.model.latent_dim, mctx);
            b.model.decoder_hidden = json_optional<std::vector<std::size_t>>(
                m, "decoder_hidden", b.model.decoder_hidden, mctx);
            b.model.holdout_fraction =
                json_optional<double>(m, "holdout_fraction", b.model.holdout_fraction, mctx);
            b.model.literal_self_model =
                json_optional<bool>(m, "literal_self_model", b.model.literal_self_model, mctx);
        }
        return b;
    }
};

/// Random-pair sweep of the optimal-value transfer bound.
struct BoundBlock {
    std::size_t n_pairs = 1000;
    std::size_t max_states = 6;
    std::size_t max_actions = 3;
    std::vector<double> gammas = {0.5, 0.9, 0.95};
    double reward_noise = 0.5;
    double transition_noise = 0.3;

    static BoundBlock from_json(const Json& j, const std::string& context) {
        reject_unknown_keys(j,
                            {"n_pairs", "max_states", "max_actions", "gammas", "reward_noise",
                             "transition_noise"},
                            context);
        BoundBlock b;
        b.n_pairs = json_optional<std::size_t>(j, "n_pairs", b.n_pairs, context);
        b.max_states = json_optional<std::size_t>(j, "max_states", b.max_states, context);
        b.max_actions = json_optional<std::size_t>(j, "max_actions", b.max_actions, context);
        b.gammas = json_optional<std::vector<double>>(j, "gammas", b.gammas, context);
        b.reward_noise = json_optional<double>(j, "reward_noise", b.reward_noise, context);
        b.transition_noise =
            json_optional<double>(j, "transition_noise", b.transition_noise, context);
        require(b.n_pairs > 0 && b.max_states >= 2 && b.max_actions >= 1, ErrorCode::ConfigBadValue,
                context + ": need n_pairs > 0, max_states >= 2, max_actions >= 1");
        require(!b.gammas.empty(), ErrorCode::ConfigBadValue, context + ": gammas must be non-empty");
        for (double g : b.gammas)
            require(g >= 0.0 && g < 1.0, ErrorCode::ConfigBadValue,
                    context + ": gamma must be in [0,1)");
        return b;
    }
};

/// Offline aggregation over previously written trace files.
struct ReportBlock {
    std::vector<std::string> trace_files;
    std::string baseline_algo;
    std::optional<double> threshold;

    static ReportBlock from_json(const Json& j, const std::string& context) {
        reject_unknown_keys(j, {"trace_files", "baseline_algo", "threshold"}, context);
        ReportBlock b;
        b.trace_files = json_require<std::vector<std::string>>(j, "trace_files", context);
        require(!b.trace_files.empty(), ErrorCode::ConfigBadValue,
                context + ": trace_files must be non-empty");
        b.baseline_algo = json_optional<std::string>(j, "baseline_algo", "", context);
        if (j.contains("threshold"))
            b.threshold = json_require<double>(j, "threshold", context);
        return b;
    }
};

struct ExperimentConfig {
    int schema_version = 1;
    std::string command;
    std::string out_dir = "runs";
    std::vector<std::uint64_t> seeds;
    std::string config_dir;  // directory of the config file; relative paths resolve here
    Json raw;                // parsed document (for run-id hashing)

    std::optional<ToyBlock> toy;
    std::optional<TrainBlock> train;
    std::optional<TransferBlock> transfer;
    std::optional<SimilarityBlock> similarity;
    std::optional<BoundBlock> bound;
    std::optional<ReportBlock> report;

    /// Resolve a path from the config relative to the config file location.
    std::string resolve(const std::string& path) const {
        if (path.empty() || std::filesystem::path(path).is_absolute() || config_dir.empty())
            return path;
        return (std::filesystem::path(config_dir) / path).string();
    }

    void require_file(const std::string& path, const std::string& what) const {
        require(std::filesystem::exists(resolve(path)), ErrorCode::ConfigIo,
                what + " does not exist: " + resolve(path));
    }
};

inline const std::vector<std::string>& known_commands() {
    static const std::vector<std::string> cmds = {"toy",        "train", "transfer",
                                                  "similarity", "bound", "report"};
    return cmds;
}

inline ExperimentConfig parse_experiment_config(const Json& j, const std::string& context,
                                                const std::string& config_dir) {
    ExperimentConfig c;
    c.raw = j;
    c.config_dir = config_dir;
    c.command = json_require<std::string>(j, "command", context);
    bool known = false;
    for (const auto& k : known_commands()) known = known || k == c.command;
    require(known, ErrorCode::ConfigBadValue, context + ": unknown command '" + c.command + "'");
    reject_unknown_keys(j, {"schema_version", "command", "out_dir", "seeds", c.command}, context);
    c.schema_version = json_require<int>(j, "schema_version", context);
    require(c.schema_version == 1, ErrorCode::ConfigBadValue,
            context + ": unsupported schema_version");
    c.out_dir = json_optional<std::string>(j, "out_dir", c.out_dir, context);
    c.seeds = json_require<std::vector<std::uint64_t>>(j, "seeds", context);
    require(!c.seeds.empty(), ErrorCode::ConfigBadValue, context + ": seeds must be non-empty");
    Json block = json_require<Json>(j, c.command, context);
    std::string bctx = context + "." + c.command;
    if (c.command == "toy") {
        c.toy = ToyBlock::from_json(block, bctx);
        c.require_file(c.toy->source_layout, "source layout");
        for (const auto& t : c.toy->targets) c.require_file(t.layout, "target layout");
    } else if (c.command == "train") {
        c.train = TrainBlock::from_json(block, bctx);
    } else if (c.command == "transfer") {
        c.transfer = TransferBlock::from_json(block, bctx);
        if (c.transfer->source.checkpoint)
            c.require_file(*c.transfer->source.checkpoint, "source checkpoint");
    } else if (c.command == "similarity") {
        c.similarity = SimilarityBlock::from_json(block, bctx);
    } else if (c.command == "bound") {
        c.bound = BoundBlock::from_json(block, bctx);
    } else if (c.command == "report") {
        c.report = ReportBlock::from_json(block, bctx);
        for (const auto& f : c.report->trace_files) c.require_file(f, "trace file");
    }
    return c;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::string dir = std::filesystem::path(path).parent_path().string();
    return parse_experiment_config(parse_json(read_text_file(path), path), path, dir);
}

/// Stable run identifier: hash of the canonical config document (minus the
/// output location) and the effective seed list.
inline std::string run_id_for(const ExperimentConfig& c) {
    Json j = c.raw;
    j.erase("out_dir");
    j["seeds"] = c.seeds;
    return hex64(fnv1a64(canonical_json(j)));
}

}  // namespace xferlab
