#pragma once
// Benchmark corpus manifest: three role groups of volume path stems, stored
// relative to the manifest file.

#include <filesystem>
#include <string>
#include <vector>

namespace bodyreg {

struct Manifest {
  std::vector<std::string> train;    // labeled, limited field of view
  std::vector<std::string> support;  // unlabeled, wide field of view
  std::vector<std::string> test;     // wide field of view with ground truth
};

void write_manifest(const Manifest& m, const std::filesystem::path& path);
Manifest read_manifest(const std::filesystem::path& path);

// Stems are stored relative to the manifest's directory.
std::filesystem::path resolve_stem(const std::filesystem::path& manifest_path,
                                   const std::string& stem);

}  // namespace bodyreg
