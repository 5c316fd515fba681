#include "netscan/staging.hpp"

#include <unistd.h>

#include <atomic>
#include <string>
#include <system_error>

#include "netscan/error.hpp"

namespace netscan::cli {

namespace fs = std::filesystem;

StagedOutputs::StagedOutputs(fs::path out_dir) : out_dir_(std::move(out_dir)) {
  static std::atomic<unsigned> counter{0};
  std::error_code ec;
  fs::create_directories(out_dir_, ec);
  if (ec || !fs::is_directory(out_dir_)) {
    throw Error("cannot create output directory " + out_dir_.string());
  }
  scratch_ = out_dir_ / (".netscan-staging-" + std::to_string(::getpid()) + "-" +
                         std::to_string(counter++));
  fs::remove_all(scratch_, ec);
  fs::create_directory(scratch_, ec);
  if (ec) throw Error("cannot create staging directory in " + out_dir_.string());
}

StagedOutputs::~StagedOutputs() {
  std::error_code ec;
  fs::remove_all(scratch_, ec);
}

fs::path StagedOutputs::stage(const fs::path& relative) {
  const fs::path target = scratch_ / relative;
  fs::create_directories(target.parent_path());
  return target;
}

void StagedOutputs::commit() {
  if (committed_) return;
  // Includes sidecars that writers placed next to staged files.
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(scratch_)) {
    if (entry.is_regular_file()) files.push_back(fs::relative(entry.path(), scratch_));
  }
  for (const auto& rel : files) {
    const fs::path dest = out_dir_ / rel;
    fs::create_directories(dest.parent_path());
    fs::rename(scratch_ / rel, dest);
  }
  committed_ = true;
}

}  // namespace netscan::cli
