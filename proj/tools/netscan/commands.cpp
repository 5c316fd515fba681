#include "netscan/commands.hpp"

#include <charconv>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "netscan/design.hpp"
#include "netscan/error.hpp"
#include "netscan/staging.hpp"
#include "netscan/svg.hpp"
#include "netscan/synth.hpp"
#include "netscan/trace.hpp"

namespace netscan::cli {

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot create " + path.string());
  out << text;
  if (!out.flush()) throw Error("write failed: " + path.string());
}

DesignSidecar load_checked_design(const fs::path& trace_path,
                                  const std::optional<fs::path>& design_path,
                                  std::uint64_t n_tokens) {
  const fs::path path = design_path.value_or(design_path_for(trace_path));
  if (!fs::exists(path)) throw Error("design sidecar not found: " + path.string());
  DesignSidecar design = load_design(path);
  try {
    design.validate(n_tokens);
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
  return design;
}

// Accepts a design sidecar or the shorthand {"n_on_blocks": N, "tokens_per_block": T}.
Regressor load_synth_regressor(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open design " + path.string());
  nlohmann::json json;
  try {
    json = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": invalid JSON: " + e.what());
  }
  if (json.contains("per_token_regressor")) return regressor_from_design(load_design(path));
  if (json.contains("n_on_blocks")) {
    return block_regressor(json.at("n_on_blocks").get<std::size_t>(),
                           json.value("tokens_per_block", std::uint32_t{10}));
  }
  throw Error(path.string() + ": expected a design sidecar or {n_on_blocks, tokens_per_block}");
}

// Shortest round-trip text for the value's own type.
template <typename T>
std::string format_number(T v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

FitSummary cmd_fit(const FitOptions& options) {
  const TraceReader reader(options.trace);
  const DesignSidecar design = load_checked_design(options.trace, options.design, reader.n_tokens());
  const FitConfig config = options.config.resolved(reader.n_elements());

  const GlmStatsTable stats =
      mass_fit(reader, design.per_token_regressor, config, options.threads);
  ActiveSet active = threshold_active(stats, bonferroni_threshold(config));
  active.experiment_id =
      reader.header().experiment_id.empty() ? design.experiment_id : reader.header().experiment_id;
  active.run_id = reader.header().run_id;
  const FitSummary summary = summarize_fit(stats, config, active.size());

  StagedOutputs out(options.out_dir);
  {
    std::ofstream csv(out.stage("stats.csv"), std::ios::binary);
    write_stats_csv(csv, stats);
    if (!csv.flush()) throw Error("failed to write stats.csv");
  }
  save_active_set(out.stage("active.json"), active);
  save_fit_summary(out.stage("fit_summary.json"), summary);
  out.commit();
  return summary;
}

OverlapReport cmd_overlap(const OverlapOptions& options) {
  if (options.inputs.size() < 2) throw Error("overlap needs at least two active-set files");
  std::vector<ActiveSet> sets;
  for (const auto& p : options.inputs) sets.push_back(load_active_set(p));

  bool same_experiment = true;
  for (const auto& s : sets) same_experiment &= s.experiment_id == sets.front().experiment_id;
  const OverlapReport report = same_experiment ? cross_run_overlap(sets) : overlap(sets);

  StagedOutputs out(options.out_dir);
  save_overlap_report(out.stage("overlap.json"), report);
  if (options.svg) {
    write_text(out.stage("overlap.svg"),
               sets.size() <= 3 ? venn_svg(report) : heatmap_svg(report));
  }
  out.commit();
  return report;
}

TemplateNetwork cmd_template(const TemplateOptions& options) {
  if (options.inputs.empty()) throw Error("template needs at least one active-set file");
  std::vector<ActiveSet> sets;
  for (const auto& p : options.inputs) sets.push_back(load_active_set(p));
  const std::size_t k_min = options.k_min.value_or(default_k_min(sets.size()));
  TemplateNetwork network = build_template(sets, k_min);
  if (network.empty()) {
    std::cerr << "warning: template for '" << network.task_id << "' is empty (no element active in "
              << k_min << " of " << sets.size() << " runs)\n";
  }
  StagedOutputs out(options.out_dir);
  save_template(out.stage(network.task_id + ".template.json"), network);
  out.commit();
  return network;
}

std::vector<ClassificationResult> cmd_classify(const ClassifyOptions& options) {
  if (options.actives.empty()) throw Error("classify needs at least one active-set file");
  if (options.templates.empty()) throw Error("classify needs at least one template file");
  std::vector<TemplateNetwork> templates;
  for (const auto& p : options.templates) templates.push_back(load_template(p));
  std::vector<ClassificationResult> results;
  for (const auto& p : options.actives) results.push_back(classify(load_active_set(p), templates));

  StagedOutputs out(options.out_dir);
  save_classification(out.stage("classification.json"), results);
  {
    std::ofstream csv(out.stage("classification.csv"), std::ios::binary);
    write_classification_csv(csv, results);
    if (!csv.flush()) throw Error("failed to write classification.csv");
  }
  out.commit();
  return results;
}

std::size_t cmd_synth(const SynthOptions& options) {
  const SynthSpec spec = load_synth_spec(options.spec, options.seed);
  const Regressor regressor = load_synth_regressor(options.design);
  if (!regressor.fittable()) throw Error("synthetic design needs both Off and On tokens");

  StagedOutputs out(options.out_dir);
  std::size_t written = 0;
  for (std::uint32_t run = 1; run <= spec.runs; ++run) {
    for (const auto& task : spec.tasks) {
      const fs::path rel = fs::path("run" + std::to_string(run)) / (task.task_id + ".actr");
      write_synthetic_trace(out.stage(rel), spec, regressor, task.task_id, run, options.threads);
      ++written;
    }
  }
  save_synth_spec(out.stage("plant.json"), spec);
  out.commit();
  return written;
}

void cmd_series(const SeriesOptions& options) {
  const TraceReader reader(options.trace);
  const std::vector<float> series = reader.read_element_series(options.element);
  const DesignSidecar design = load_checked_design(options.trace, options.design, reader.n_tokens());

  Accumulators acc(1);
  for (std::size_t t = 0; t < series.size(); ++t) {
    acc.update(std::span<const float>(&series[t], 1), design.per_token_regressor[t]);
  }
  const GlmStatsTable fit = finalize(acc);
  std::vector<double> fitted(series.size());
  for (std::size_t t = 0; t < series.size(); ++t) {
    fitted[t] = fit.beta0[0] + fit.beta1[0] * design.per_token_regressor[t];
  }

  std::string csv = "token,value,fitted\n";
  for (std::size_t t = 0; t < series.size(); ++t) {
    csv += std::to_string(t) + "," + format_number(series[t]) + "," + format_number(fitted[t]) + "\n";
  }
  StagedOutputs out(options.out_dir);
  write_text(out.stage("series.csv"), csv);
  if (options.svg) {
    write_text(out.stage("series.svg"),
               series_svg(series, fitted,
                          "element " + std::to_string(options.element) + " (t = " +
                              format_number(fit.t[0]) + ", p = " + format_number(fit.p[0]) + ")"));
  }
  out.commit();
}

std::string cmd_plan() { return plan_to_json(reference_plan()); }

}  // namespace netscan::cli
