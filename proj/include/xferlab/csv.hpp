#pragma once

#include <charconv>
#include <cstdint>
#include <string>
#include <vector>

#include "common.hpp"
#include "transfer_eval.hpp"

namespace xferlab {

// CSV emission keeps every number in shortest round-trip form (format_double)
// so a re-run with the same inputs reproduces the file byte for byte.

inline void require_csv_safe(const std::string& field) {
    for (char c : field)
        require(c != ',' && c != '"' && c != '\n' && c != '\r', ErrorCode::Precondition,
                "CSV field contains a delimiter or quote: " + field);
}

/// Rows: one line per evaluation point per trace, traces in input order.
inline std::string trace_csv_string(const std::vector<TransferTrace>& traces) {
    std::string out = "algo_id,seed,env_step,eval_episode,rho,beta\n";
    for (const auto& t : traces) {
        t.validate();
        require_csv_safe(t.algo_id);
        for (const auto& p : t.points) {
            out += t.algo_id;
            out += ',';
            out += std::to_string(t.seed);
            out += ',';
            out += std::to_string(p.env_step);
            out += ',';
            out += std::to_string(p.eval_episode);
            out += ',';
            out += format_double(p.rho);
            out += ',';
            out += format_double(p.beta);
            out += '\n';
        }
    }
    return out;
}

inline void write_trace_csv(const std::string& path, const std::vector<TransferTrace>& traces) {
    write_text_file(path, trace_csv_string(traces));
}

/// Seed-aggregated relative-transfer curve.
inline std::string tau_csv_string(const CurveBand& band) {
    require(band.eval_episodes.size() == band.mean.size() &&
                band.mean.size() == band.stdev.size(),
            ErrorCode::ShapeMismatch, "band columns must have equal length");
    std::string out = "eval_episode,tau_mean,tau_std\n";
    for (std::size_t i = 0; i < band.mean.size(); ++i) {
        out += std::to_string(band.eval_episodes[i]);
        out += ',';
        out += format_double(band.mean[i]);
        out += ',';
        out += format_double(band.stdev[i]);
        out += '\n';
    }
    return out;
}

inline void write_tau_csv(const std::string& path, const CurveBand& band) {
    write_text_file(path, tau_csv_string(band));
}

/// Long-format seed-aggregated curves for several algorithms sharing one
/// metric (rho or beta): algo_id,eval_episode,env_step,<metric>_mean,<metric>_std.
inline std::string curves_csv_string(const std::vector<std::pair<std::string, CurveBand>>& curves,
                                     const std::string& metric) {
    std::string out = "algo_id,eval_episode,env_step," + metric + "_mean," + metric + "_std\n";
    for (const auto& [algo_id, band] : curves) {
        require_csv_safe(algo_id);
        require(band.env_steps.size() == band.mean.size() &&
                    band.eval_episodes.size() == band.mean.size() &&
                    band.stdev.size() == band.mean.size(),
                ErrorCode::ShapeMismatch, "band columns must have equal length");
        for (std::size_t i = 0; i < band.mean.size(); ++i) {
            out += algo_id;
            out += ',';
            out += std::to_string(band.eval_episodes[i]);
            out += ',';
            out += std::to_string(band.env_steps[i]);
            out += ',';
            out += format_double(band.mean[i]);
            out += ',';
            out += format_double(band.stdev[i]);
            out += '\n';
        }
    }
    return out;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

inline double parse_csv_double(const std::string& s, const std::string& context) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    require(res.ec == std::errc() && res.ptr == s.data() + s.size(), ErrorCode::ConfigBadValue,
            context + ": bad number '" + s + "'");
    return v;
}

inline std::uint64_t parse_csv_uint(const std::string& s, const std::string& context) {
    std::uint64_t v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    require(res.ec == std::errc() && res.ptr == s.data() + s.size(), ErrorCode::ConfigBadValue,
            context + ": bad integer '" + s + "'");
    return v;
}

}  // namespace detail

/// Inverse of trace_csv_string: rows regrouped into traces keyed by
/// (algo_id, seed) in order of first appearance.
inline std::vector<TransferTrace> parse_trace_csv(const std::string& text,
                                                  const std::string& context) {
    std::vector<TransferTrace> traces;
    std::size_t pos = 0, line_no = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        std::string line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
        auto fields = detail::split_csv_line(line);
        std::string where = context + " line " + std::to_string(line_no);
        if (line_no == 1) {
            require(line == "algo_id,seed,env_step,eval_episode,rho,beta" ||
                        line == "algo_id,seed,env_step,eval_episode,rho,beta\r",
                    ErrorCode::ConfigBadValue, where + ": unexpected trace CSV header");
            continue;
        }
        require(fields.size() == 6, ErrorCode::ConfigBadValue,
                where + ": expected 6 fields, got " + std::to_string(fields.size()));
        std::string algo_id = fields[0];
        std::uint64_t seed = detail::parse_csv_uint(fields[1], where);
        EvalPoint p;
        p.env_step = detail::parse_csv_uint(fields[2], where);
        p.eval_episode = detail::parse_csv_uint(fields[3], where);
        p.rho = detail::parse_csv_double(fields[4], where);
        p.beta = detail::parse_csv_double(fields[5], where);

        TransferTrace* dest = nullptr;
        for (auto& t : traces)
            if (t.algo_id == algo_id && t.seed == seed) dest = &t;
        if (dest == nullptr) {
            TransferTrace t;
            t.algo_id = algo_id;
            t.seed = seed;
            traces.push_back(std::move(t));
            dest = &traces.back();
        }
        dest->points.push_back(p);
    }
    require(!traces.empty(), ErrorCode::ConfigBadValue, context + ": no data rows");
    for (auto& t : traces) t.validate();
    return traces;
}

inline std::vector<TransferTrace> read_trace_csv(const std::string& path) {
    return parse_trace_csv(read_text_file(path), path);
}

}  // namespace xferlab
