#include "bodyreg/manifest.hpp"

#include <fstream>

#include <json.hpp>

#include "bodyreg/types.hpp"

namespace bodyreg {

void write_manifest(const Manifest& m, const std::filesystem::path& path) {
  nlohmann::json j;
  j["train"] = m.train;
  j["support"] = m.support;
  j["test"] = m.test;
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f << j.dump(2) << "\n";
  if (!f.good()) throw IoError("write failed for " + path.string());
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("missing manifest " + path.string());
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("corrupt manifest " + path.string() + ": " + e.what());
  }
  Manifest m;
  try {
    m.train = j.at("train").get<std::vector<std::string>>();
    m.support = j.at("support").get<std::vector<std::string>>();
    m.test = j.at("test").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("corrupt manifest " + path.string() + ": " + e.what());
  }
  return m;
}

std::filesystem::path resolve_stem(const std::filesystem::path& manifest_path,
                                   const std::string& stem) {
  const std::filesystem::path p(stem);
  if (p.is_absolute()) return p;
  return manifest_path.parent_path() / p;
}

}  // namespace bodyreg
