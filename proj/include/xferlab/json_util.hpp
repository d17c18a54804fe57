#pragma once

#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "common.hpp"

namespace xferlab {

using Json = nlohmann::json;

inline Json parse_json(const std::string& text, const std::string& context) {
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw Error(ErrorCode::ConfigBadValue, context + ": invalid JSON: " + e.what());
    }
}

/// Strict-object check: every key present must be in the allowed set.
/// Unknown keys are configuration mistakes and fail loudly.
inline void reject_unknown_keys(const Json& j, const std::set<std::string>& allowed,
                                const std::string& context) {
    require(j.is_object(), ErrorCode::ConfigBadValue, context + ": expected a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw Error(ErrorCode::ConfigUnknownKey, context + ": unknown key '" + it.key() + "'");
}

template <class T>
T json_require(const Json& j, const std::string& key, const std::string& context) {
    if (!j.contains(key))
        throw Error(ErrorCode::ConfigMissingKey, context + ": missing key '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const Json::exception&) {
        throw Error(ErrorCode::ConfigBadValue, context + ": bad value for key '" + key + "'");
    }
}

template <class T>
T json_optional(const Json& j, const std::string& key, const T& fallback,
                const std::string& context) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const Json::exception&) {
        throw Error(ErrorCode::ConfigBadValue, context + ": bad value for key '" + key + "'");
    }
}

/// Canonical serialization: sorted keys (nlohmann objects are sorted by
/// default), fixed indentation, one trailing newline. Used everywhere a JSON
/// artifact must be byte-stable.
inline std::string canonical_json(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace xferlab
