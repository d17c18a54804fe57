#pragma once

#include <cctype>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "csv.hpp"
#include "json_util.hpp"
#include "svg.hpp"
#include "transfer_eval.hpp"

namespace xferlab {

inline void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    require(!ec, ErrorCode::IoError, "cannot create directory " + dir + ": " + ec.message());
}

/// Algorithm ids double as filename fragments, so keep them path- and
/// CSV-safe.
inline void require_safe_id(const std::string& id) {
    require(!id.empty(), ErrorCode::Precondition, "empty algorithm id");
    for (char c : id)
        require(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.' ||
                    c == '@',
                ErrorCode::Precondition, "algorithm id has unsafe character: " + id);
}

/// Traces regrouped by algorithm in order of first appearance.
inline std::vector<std::pair<std::string, std::vector<TransferTrace>>> group_by_algo(
    const std::vector<TransferTrace>& traces) {
    std::vector<std::pair<std::string, std::vector<TransferTrace>>> groups;
    for (const auto& t : traces) {
        require_safe_id(t.algo_id);
        bool found = false;
        for (auto& [id, list] : groups)
            if (id == t.algo_id) {
                list.push_back(t);
                found = true;
            }
        if (!found) groups.push_back({t.algo_id, {t}});
    }
    return groups;
}

struct ReportInputs {
    std::vector<TransferTrace> traces;
    /// Baseline algorithm for relative-transfer curves; empty skips the tau
    /// figures (e.g. a plain training report with nothing to compare).
    std::string baseline_algo;
    /// Free-form annotations shown in the tau legend, e.g. "Xi_P=0.031".
    std::map<std::string, std::string> tau_annotations;  // algo_id -> note
    std::optional<double> threshold;  // return level for time-to-threshold stats
};

struct ReportResult {
    std::vector<std::string> files;  // everything written, in order
    Json summary;
};

/// Writes the full report bundle for a set of runs: raw trace rows, seed
/// averaged return / relative-transfer / regularizer-weight curves as CSV and
/// SVG, and a JSON summary with final returns, curve areas and seed counts.
inline ReportResult aggregate_report(const ReportInputs& in, const std::string& out_dir) {
    require(!in.traces.empty(), ErrorCode::Precondition, "no traces to report");
    ensure_dir(out_dir);
    ReportResult res;
    auto emit = [&](const std::string& name, const std::string& content) {
        std::string path = out_dir + "/" + name;
        write_text_file(path, content);
        res.files.push_back(path);
    };

    auto groups = group_by_algo(in.traces);
    emit("trace.csv", trace_csv_string(in.traces));

    // --- seed-averaged return curves ---
    std::vector<std::pair<std::string, CurveBand>> rho_curves, beta_curves;
    for (const auto& [id, list] : groups) {
        rho_curves.push_back({id, aggregate_rho(list)});
        beta_curves.push_back({id, aggregate_beta(list)});
    }
    emit("reward_curves.csv", curves_csv_string(rho_curves, "rho"));
    {
        SvgChartOptions opt;
        opt.title = "return vs environment steps (mean +/- 1 std)";
        opt.x_label = "environment step";
        opt.y_label = "return";
        std::vector<SvgSeries> series;
        for (const auto& [id, band] : rho_curves) {
            SvgSeries s;
            s.label = id;
            for (std::size_t i = 0; i < band.mean.size(); ++i) {
                s.x.push_back(double(band.env_steps[i]));
                s.y.push_back(band.mean[i]);
                s.half_band.push_back(band.stdev[i]);
            }
            series.push_back(std::move(s));
        }
        emit("reward_curves.svg", svg_line_chart(opt, series));
    }

    // --- relative transfer against the baseline ---
    if (!in.baseline_algo.empty()) {
        const std::vector<TransferTrace>* base = nullptr;
        for (const auto& [id, list] : groups)
            if (id == in.baseline_algo) base = &list;
        require(base != nullptr, ErrorCode::Precondition,
                "baseline algorithm not present in traces: " + in.baseline_algo);
        std::vector<SvgSeries> tau_series;
        for (const auto& [id, list] : groups) {
            if (id == in.baseline_algo) continue;
            std::vector<TauSeries> per_seed;
            for (const auto& t : list)
                for (const auto& b : *base)
                    if (b.seed == t.seed) per_seed.push_back(relative_transfer(t, b));
            require(!per_seed.empty(), ErrorCode::Precondition,
                    "no seed paired with the baseline for " + id);
            CurveBand band = aggregate_tau(per_seed);
            emit("tau_" + id + ".csv", tau_csv_string(band));
            SvgSeries s;
            s.label = id;
            auto note = in.tau_annotations.find(id);
            if (note != in.tau_annotations.end()) s.annotation = note->second;
            for (std::size_t i = 0; i < band.mean.size(); ++i) {
                s.x.push_back(double(band.eval_episodes[i]));
                s.y.push_back(band.mean[i]);
                s.half_band.push_back(band.stdev[i]);
            }
            tau_series.push_back(std::move(s));
        }
        if (!tau_series.empty()) {
            SvgChartOptions opt;
            opt.title = "relative transfer vs " + in.baseline_algo;
            opt.x_label = "evaluation episode";
            opt.y_label = "tau";
            emit("tau_curves.svg", svg_line_chart(opt, tau_series));
        }
    }

    // --- regularizer weight curves ---
    emit("beta_curves.csv", curves_csv_string(beta_curves, "beta"));
    {
        SvgChartOptions opt;
        opt.title = "regularizer weight (mean +/- 1 std)";
        opt.x_label = "environment step";
        opt.y_label = "beta";
        std::vector<SvgSeries> series;
        for (const auto& [id, band] : beta_curves) {
            SvgSeries s;
            s.label = id;
            for (std::size_t i = 0; i < band.mean.size(); ++i) {
                s.x.push_back(double(band.env_steps[i]));
                s.y.push_back(band.mean[i]);
                s.half_band.push_back(band.stdev[i]);
            }
            series.push_back(std::move(s));
        }
        emit("beta_curves.svg", svg_line_chart(opt, series));
    }

    // --- summary ---
    Json summary;
    summary["schema_version"] = 1;
    Json algos;
    for (const auto& [id, list] : groups) {
        Json a;
        a["seeds"] = list.size();
        double fin_m = 0.0, fin_v = 0.0, auc_m = 0.0, auc_v = 0.0;
        std::vector<double> finals, aucs;
        for (const auto& t : list) {
            finals.push_back(t.points.back().rho);
            aucs.push_back(trace_auc(t));
        }
        for (double v : finals) fin_m += v;
        for (double v : aucs) auc_m += v;
        fin_m /= double(finals.size());
        auc_m /= double(aucs.size());
        for (double v : finals) fin_v += (v - fin_m) * (v - fin_m);
        for (double v : aucs) auc_v += (v - auc_m) * (v - auc_m);
        std::size_t n = finals.size();
        a["final_return_mean"] = fin_m;
        a["final_return_std"] = n > 1 ? std::sqrt(fin_v / double(n - 1)) : 0.0;
        a["auc_mean"] = auc_m;
        a["auc_std"] = n > 1 ? std::sqrt(auc_v / double(n - 1)) : 0.0;
        if (in.threshold) {
            std::size_t reached = 0;
            double step_sum = 0.0;
            for (const auto& t : list)
                if (auto s = first_step_reaching(t, *in.threshold)) {
                    ++reached;
                    step_sum += double(*s);
                }
            a["threshold"] = *in.threshold;
            a["reached_threshold"] = reached;
            if (reached > 0) a["steps_to_threshold_mean"] = step_sum / double(reached);
        }
        algos[id] = a;
    }
    summary["algorithms"] = algos;
    res.summary = summary;
    emit("summary.json", canonical_json(summary));
    return res;
}

}  // namespace xferlab
