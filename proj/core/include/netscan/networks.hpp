#pragma once

// Set algebra over active elements: Venn-style overlap reports, cross-run
// template networks and the percentage-of-network-active classifier.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace netscan {

using ElementIndex = std::uint64_t;

// Sorted, duplicate-free element indices for one experiment in one run.
struct ActiveSet {
  std::vector<ElementIndex> elements;
  std::string experiment_id;
  std::uint32_t run_id = 0;

  std::size_t size() const noexcept { return elements.size(); }
  bool contains(ElementIndex e) const noexcept;
  // Throws unless sorted, unique and (when n_elements > 0) in range.
  void validate(std::uint64_t n_elements = 0) const;

  bool operator==(const ActiveSet&) const = default;
};

// Sorts and de-duplicates `elements`.
ActiveSet make_active_set(std::vector<ElementIndex> elements, std::string experiment_id = {},
                          std::uint32_t run_id = 0);

struct TemplateNetwork {
  std::string task_id;
  std::vector<ElementIndex> elements;
  std::size_t k_min = 1;
  std::vector<std::uint32_t> source_runs;

  bool empty() const noexcept { return elements.empty(); }
  bool operator==(const TemplateNetwork&) const = default;
};

// Exclusive Venn regions are keyed by a bitmask over set_labels: bit i set
// means "in set i". region_counts is filled for 2..kMaxVennSets sets and
// holds every non-empty subset, zero counts included.
inline constexpr std::size_t kMaxVennSets = 5;

struct OverlapReport {
  std::vector<std::string> set_labels;
  std::vector<std::uint64_t> set_sizes;
  std::map<std::uint32_t, std::uint64_t> region_counts;
  std::vector<std::vector<std::uint64_t>> pairwise_intersections;
  std::uint64_t union_size = 0;

  bool has_regions() const noexcept { return !region_counts.empty(); }
  std::uint64_t region(std::uint32_t mask) const;
  // "A&B" style name for a region mask.
  std::string region_name(std::uint32_t mask) const;
};

// Labels default to experiment ids; if any id repeats, all get "/run<r>".
OverlapReport overlap(std::span<const ActiveSet> sets,
                      std::span<const std::string> labels = {});

// Same experiment across runs, labeled "run<r>".
OverlapReport cross_run_overlap(std::span<const ActiveSet> sets_by_run);

// Elements active in at least k_min of the given runs of one task.
TemplateNetwork build_template(std::span<const ActiveSet> sets, std::size_t k_min);

// Default k_min: three of every four runs, rounded up.
std::size_t default_k_min(std::size_t n_runs) noexcept;

// |active ∩ template| / |template|; nullopt (undefined) for an empty template.
std::optional<double> network_active_fraction(const ActiveSet& active,
                                              const TemplateNetwork& network);

inline constexpr double kReportThreshold = 0.70;

struct TaskFraction {
  std::string task_id;
  std::optional<double> fraction;
};

struct ClassificationResult {
  std::string experiment_id;
  std::uint32_t run_id = 0;
  std::vector<TaskFraction> fractions;  // template order
  std::optional<std::string> argmax_task;
  bool tie = false;
  std::vector<std::string> above_70pct;
};

// Argmax over defined fractions; a shared maximum yields no argmax and sets
// `tie`. above_70pct is an annotation only.
ClassificationResult classify(const ActiveSet& active, std::span<const TemplateNetwork> templates);

// --- file formats ---------------------------------------------------------

void save_active_set(const std::filesystem::path& path, const ActiveSet& set);
ActiveSet load_active_set(const std::filesystem::path& path);
void save_template(const std::filesystem::path& path, const TemplateNetwork& network);
TemplateNetwork load_template(const std::filesystem::path& path);
void save_overlap_report(const std::filesystem::path& path, const OverlapReport& report);
void save_classification(const std::filesystem::path& path,
                         std::span<const ClassificationResult> results);
// Rows are held-out experiments, columns are templates; empty templates give
// the literal `undefined`.
void write_classification_csv(std::ostream& out, std::span<const ClassificationResult> results);

}  // namespace netscan
