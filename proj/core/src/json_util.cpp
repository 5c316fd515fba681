#include "json_util.hpp"

#include <fstream>
#include <sstream>

namespace netscan::detail {

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": invalid JSON: " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot create " + path.string());
  out << text;
  out.flush();
  if (!out) throw Error("write failed: " + path.string());
}

void write_json_file(const std::filesystem::path& path, const Json& json) {
  write_text_file(path, json.dump(2) + "\n");
}

}  // namespace netscan::detail
