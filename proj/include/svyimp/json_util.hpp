#pragma once

#include <initializer_list>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "svyimp/error.hpp"

namespace svyimp::json_util {

/// Rejects non-object sections and keys outside `allowed`.
inline void require_keys(const nlohmann::json& j, std::string_view section,
                         std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw ConfigError(std::string(section) + ": expected an object");
  for (const auto& item : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || item.key() == a;
    if (!ok) throw ConfigError(std::string(section) + ": unknown key '" + item.key() + "'");
  }
}

/// Reads `key` into `out` when present; type mismatches become ConfigError.
template <class T>
void get_to(const nlohmann::json& j, std::string_view section, const char* key, T& out) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  try {
    it->get_to(out);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string(section) + "." + key + ": " + e.what());
  }
}

}  // namespace svyimp::json_util
