#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "netscan/error.hpp"

namespace netscan::detail {

using Json = nlohmann::ordered_json;

Json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& json);
void write_text_file(const std::filesystem::path& path, const std::string& text);

// Typed member access that names the file and key on failure.
template <typename T>
T required(const Json& json, const char* key, const std::filesystem::path& source) {
  const auto it = json.find(key);
  if (it == json.end()) {
    throw Error(source.string() + ": missing field '" + key + "'");
  }
  try {
    return it->template get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(source.string() + ": field '" + key + "': " + e.what());
  }
}

template <typename T>
T optional_field(const Json& json, const char* key, T fallback,
                 const std::filesystem::path& source) {
  if (!json.contains(key)) return fallback;
  return required<T>(json, key, source);
}

}  // namespace netscan::detail
