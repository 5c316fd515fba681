#pragma once

#include <filesystem>
#include <vector>

namespace netscan::cli {

// Collects a command's outputs in a hidden scratch directory under the
// output directory and moves them into place only on commit(). Destroying an
// uncommitted instance deletes everything staged.
class StagedOutputs {
 public:
  explicit StagedOutputs(std::filesystem::path out_dir);
  ~StagedOutputs();
  StagedOutputs(const StagedOutputs&) = delete;
  StagedOutputs& operator=(const StagedOutputs&) = delete;

  // Scratch location for `relative`; parent directories are created.
  std::filesystem::path stage(const std::filesystem::path& relative);
  void commit();

 private:
  std::filesystem::path out_dir_;
  std::filesystem::path scratch_;
  bool committed_ = false;
};

}  // namespace netscan::cli
