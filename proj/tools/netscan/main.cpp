#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "netscan/commands.hpp"
#include "netscan/error.hpp"

namespace {

using namespace netscan;
using namespace netscan::cli;

struct Args {
  // fit
  fs::path trace;
  std::string design;
  double alpha = 1e-4;
  std::uint64_t comparisons = 0;
  bool one_sided = false;
  // overlap / template / classify
  std::vector<fs::path> inputs;
  std::size_t k_min = 0;
  std::vector<fs::path> actives;
  std::vector<fs::path> templates;
  // synth
  fs::path spec;
  std::uint64_t seed = 0;
  // series
  std::uint64_t element = 0;
  // shared
  fs::path out_dir = ".";
  bool svg = false;
  std::size_t threads = 0;
};

std::optional<fs::path> optional_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return fs::path(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mass-univariate block-design analysis of activation traces"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "netscan 0.1.0");
  Args a;

  auto add_threads = [&](CLI::App* cmd) {
    cmd->add_option("--threads", a.threads, "worker threads (0 = NETSCAN_THREADS or all cores)")
        ->check(CLI::NonNegativeNumber);
  };
  auto add_out = [&](CLI::App* cmd) {
    cmd->add_option("--out,-o", a.out_dir, "output directory")->capture_default_str();
  };

  auto* fit = app.add_subcommand("fit", "fit the block regressor to every element of a trace");
  fit->add_option("trace", a.trace, "ACTR trace")->required()->check(CLI::ExistingFile);
  fit->add_option("--design", a.design, "design sidecar (default: <trace>.design.json)");
  fit->add_option("--alpha", a.alpha, "family-wise significance level")->capture_default_str();
  auto* comparisons_opt =
      fit->add_option("--comparisons", a.comparisons, "Bonferroni divisor (default: n_elements)");
  fit->add_flag("--one-sided{true},--two-sided{false}", a.one_sided,
                "test beta1 > 0 only, or both directions (default)");
  add_out(fit);
  add_threads(fit);

  auto* ov = app.add_subcommand("overlap", "intersect two or more active sets");
  ov->add_option("inputs", a.inputs, "active-set JSON files")->required()->check(CLI::ExistingFile);
  ov->add_flag("--svg", a.svg, "also write overlap.svg");
  add_out(ov);

  auto* tmpl = app.add_subcommand("template", "build a cross-run template network for one task");
  tmpl->add_option("inputs", a.inputs, "active-set JSON files, one per run")
      ->required()
      ->check(CLI::ExistingFile);
  auto* k_min_opt = tmpl->add_option("--k-min", a.k_min, "minimum runs an element must be active in")
                        ->check(CLI::PositiveNumber);
  add_out(tmpl);

  auto* cls = app.add_subcommand("classify", "score active sets against template networks");
  cls->add_option("--active", a.actives, "active-set JSON (repeatable)")
      ->required()
      ->check(CLI::ExistingFile);
  cls->add_option("--template", a.templates, "template JSON (repeatable)")
      ->required()
      ->check(CLI::ExistingFile);
  add_out(cls);

  auto* syn = app.add_subcommand("synth", "write synthetic traces with planted networks");
  syn->add_option("spec", a.spec, "synthetic spec JSON")->required()->check(CLI::ExistingFile);
  syn->add_option("--design", a.design, "design sidecar or {n_on_blocks, tokens_per_block}")
      ->required()
      ->check(CLI::ExistingFile);
  auto* seed_opt = syn->add_option("--seed", a.seed, "override the seed in the spec file");
  add_out(syn);
  add_threads(syn);

  auto* ser = app.add_subcommand("series", "export one element's time series with its fit");
  ser->add_option("trace", a.trace, "ACTR trace")->required()->check(CLI::ExistingFile);
  ser->add_option("element", a.element, "flat element index")->required();
  ser->add_option("--design", a.design, "design sidecar (default: <trace>.design.json)");
  ser->add_flag("--svg", a.svg, "also write series.svg");
  add_out(ser);

  auto* plan = app.add_subcommand("plan", "print the five-run experiment plan as JSON");

  CLI11_PARSE(app, argc, argv);

  try {
    if (fit->parsed()) {
      FitOptions o{a.trace, optional_path(a.design), a.out_dir, {}, a.threads};
      o.config.alpha_family = a.alpha;
      if (*comparisons_opt) o.config.n_comparisons = a.comparisons;
      o.config.sidedness = a.one_sided ? Sidedness::OneSided : Sidedness::TwoSided;
      const FitSummary s = cmd_fit(o);
      std::cout << s.n_active << " active of " << s.n_elements << " elements (per-test alpha "
                << s.per_test_alpha << ")\n";
    } else if (ov->parsed()) {
      const OverlapReport r = cmd_overlap({a.inputs, a.out_dir, a.svg});
      std::cout << "union " << r.union_size << " over " << r.set_labels.size() << " sets\n";
    } else if (tmpl->parsed()) {
      TemplateOptions o{a.inputs, std::nullopt, a.out_dir};
      if (*k_min_opt) o.k_min = a.k_min;
      const TemplateNetwork t = cmd_template(o);
      std::cout << t.task_id << ": " << t.elements.size() << " elements (k_min " << t.k_min
                << ")\n";
    } else if (cls->parsed()) {
      const auto results = cmd_classify({a.actives, a.templates, a.out_dir});
      for (const auto& r : results) {
        std::cout << r.experiment_id << " run " << r.run_id << " -> "
                  << r.argmax_task.value_or(r.tie ? "(tie)" : "(none)") << "\n";
      }
    } else if (syn->parsed()) {
      SynthOptions o{a.spec, a.design, a.out_dir, std::nullopt, a.threads};
      if (*seed_opt) o.seed = a.seed;
      std::cout << cmd_synth(o) << " traces written\n";
    } else if (ser->parsed()) {
      cmd_series({a.trace, a.element, optional_path(a.design), a.out_dir, a.svg});
    } else if (plan->parsed()) {
      std::cout << cmd_plan();
    }
  } catch (const Error& e) {
    std::cerr << "netscan: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "netscan: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
