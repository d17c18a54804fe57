#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace xferlab {

/// Machine-readable error codes surfaced by the CLI (one token, stable names).
enum class ErrorCode {
    ConfigUnknownKey,
    ConfigMissingKey,
    ConfigBadValue,
    ConfigIo,
    ShapeMismatch,
    DomainMismatch,
    ScheduleMismatch,
    Precondition,
    NumericNan,
    GridInvalid,
    GridUnreachable,
    ActionOutOfBounds,
    UnsupportedOp,
    IoError,
};

inline const char* error_code_name(ErrorCode c) {
    switch (c) {
        case ErrorCode::ConfigUnknownKey: return "CONFIG_UNKNOWN_KEY";
        case ErrorCode::ConfigMissingKey: return "CONFIG_MISSING_KEY";
        case ErrorCode::ConfigBadValue: return "CONFIG_BAD_VALUE";
        case ErrorCode::ConfigIo: return "CONFIG_IO";
        case ErrorCode::ShapeMismatch: return "SHAPE_MISMATCH";
        case ErrorCode::DomainMismatch: return "DOMAIN_MISMATCH";
        case ErrorCode::ScheduleMismatch: return "SCHEDULE_MISMATCH";
        case ErrorCode::Precondition: return "PRECONDITION";
        case ErrorCode::NumericNan: return "NUMERIC_NAN";
        case ErrorCode::GridInvalid: return "GRID_INVALID";
        case ErrorCode::GridUnreachable: return "GRID_UNREACHABLE";
        case ErrorCode::ActionOutOfBounds: return "ACTION_OUT_OF_BOUNDS";
        case ErrorCode::UnsupportedOp: return "UNSUPPORTED_OP";
        case ErrorCode::IoError: return "IO_ERROR";
    }
    return "UNKNOWN";
}

/// Library-wide exception carrying a stable error code.
class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& detail)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + detail), code_(code) {}

    ErrorCode code() const { return code_; }

  private:
    ErrorCode code_;
};

inline void require(bool cond, ErrorCode code, const std::string& detail) {
    if (!cond) throw Error(code, detail);
}

inline bool all_finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

/// Shortest round-trip decimal for a double; the one formatter used for all
/// CSV/JSON-adjacent text we emit ourselves, so identical inputs give
/// identical bytes.
inline std::string format_double(double x) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

/// FNV-1a 64-bit, used for run ids and dataset fingerprints.
inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 14695981039346656037ull) {
    std::uint64_t h = seed;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open for reading: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot open for writing: " + path);
    out << content;
    if (!out) throw Error(ErrorCode::IoError, "write failed: " + path);
}

inline std::string hex64(std::uint64_t h) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[i] = digits[h & 0xf];
        h >>= 4;
    }
    return s;
}

}  // namespace xferlab
