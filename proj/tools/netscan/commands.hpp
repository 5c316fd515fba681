#pragma once

// Subcommand implementations behind the `netscan` executable. Each command
// either writes all of its outputs or none of them, and throws netscan::Error
// on failure.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "netscan/glm.hpp"
#include "netscan/networks.hpp"

namespace netscan::cli {

namespace fs = std::filesystem;

struct FitOptions {
  fs::path trace;
  std::optional<fs::path> design;  // default: the trace's .design.json sidecar
  fs::path out_dir;
  FitConfig config;
  std::size_t threads = 0;
};

// Writes stats.csv, active.json and fit_summary.json.
FitSummary cmd_fit(const FitOptions& options);

struct OverlapOptions {
  std::vector<fs::path> inputs;
  fs::path out_dir;
  bool svg = false;
};

// Writes overlap.json, plus overlap.svg with --svg (a Venn figure for two or
// three sets, a heatmap otherwise).
OverlapReport cmd_overlap(const OverlapOptions& options);

struct TemplateOptions {
  std::vector<fs::path> inputs;
  std::optional<std::size_t> k_min;  // default: default_k_min(#inputs)
  fs::path out_dir;
};

// Writes <task_id>.template.json.
TemplateNetwork cmd_template(const TemplateOptions& options);

struct ClassifyOptions {
  std::vector<fs::path> actives;
  std::vector<fs::path> templates;
  fs::path out_dir;
};

// Writes classification.json and classification.csv.
std::vector<ClassificationResult> cmd_classify(const ClassifyOptions& options);

struct SynthOptions {
  fs::path spec;
  fs::path design;
  fs::path out_dir;
  std::optional<std::uint64_t> seed;
  std::size_t threads = 0;
};

// Writes run<r>/<task_id>.actr with sidecars for every run and task, and
// plant.json recording the planted ground truth. Returns the number of traces.
std::size_t cmd_synth(const SynthOptions& options);

struct SeriesOptions {
  fs::path trace;
  std::uint64_t element = 0;
  std::optional<fs::path> design;
  fs::path out_dir;
  bool svg = false;
};

// Writes series.csv (token,value,fitted) and optionally series.svg.
void cmd_series(const SeriesOptions& options);

// The five-run, seven-experiment plan as JSON.
std::string cmd_plan();

}  // namespace netscan::cli
