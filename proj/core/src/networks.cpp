#include "netscan/networks.hpp"

#include <algorithm>
#include <charconv>
#include <set>
#include <utility>

#include "json_util.hpp"
#include "netscan/error.hpp"

namespace netscan {

namespace {

std::uint64_t intersection_size(const std::vector<ElementIndex>& a,
                                const std::vector<ElementIndex>& b) {
  std::uint64_t count = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++count;
      ++ia;
      ++ib;
    }
  }
  return count;
}

// Calls visit(element, membership_bits) once per element of the union, in
// ascending element order. membership_bits has one bit per input set.
template <typename Visit>
void for_each_membership(std::span<const ActiveSet> sets, Visit&& visit) {
  std::vector<std::size_t> cursor(sets.size(), 0);
  for (;;) {
    bool any = false;
    ElementIndex lowest = 0;
    for (std::size_t i = 0; i < sets.size(); ++i) {
      if (cursor[i] < sets[i].elements.size()) {
        const ElementIndex e = sets[i].elements[cursor[i]];
        if (!any || e < lowest) lowest = e;
        any = true;
      }
    }
    if (!any) return;
    std::uint64_t bits = 0;
    std::size_t members = 0;
    for (std::size_t i = 0; i < sets.size(); ++i) {
      if (cursor[i] < sets[i].elements.size() && sets[i].elements[cursor[i]] == lowest) {
        if (i < 64) bits |= std::uint64_t{1} << i;
        ++members;
        ++cursor[i];
      }
    }
    visit(lowest, bits, members);
  }
}

std::vector<std::string> default_labels(std::span<const ActiveSet> sets) {
  std::vector<std::string> labels;
  std::set<std::string> ids;
  bool unique = true;
  for (const auto& s : sets) unique = ids.insert(s.experiment_id).second && unique;
  std::set<std::string> used;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    std::string label = sets[i].experiment_id;
    if (!unique) label += "/run" + std::to_string(sets[i].run_id);
    if (label.empty() || !used.insert(label).second) {
      label += "#" + std::to_string(i);
      used.insert(label);
    }
    labels.push_back(std::move(label));
  }
  return labels;
}

std::string format_fraction(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

bool ActiveSet::contains(ElementIndex e) const noexcept {
  return std::binary_search(elements.begin(), elements.end(), e);
}

void ActiveSet::validate(std::uint64_t n_elements) const {
  for (std::size_t i = 1; i < elements.size(); ++i) {
    if (elements[i] <= elements[i - 1]) {
      throw Error("active set '" + experiment_id + "' is not sorted and duplicate-free");
    }
  }
  if (n_elements > 0 && !elements.empty() && elements.back() >= n_elements) {
    throw Error("active set '" + experiment_id + "' has element " +
                std::to_string(elements.back()) + " beyond " + std::to_string(n_elements));
  }
}

ActiveSet make_active_set(std::vector<ElementIndex> elements, std::string experiment_id,
                          std::uint32_t run_id) {
  std::sort(elements.begin(), elements.end());
  elements.erase(std::unique(elements.begin(), elements.end()), elements.end());
  return ActiveSet{std::move(elements), std::move(experiment_id), run_id};
}

std::uint64_t OverlapReport::region(std::uint32_t mask) const {
  const auto it = region_counts.find(mask);
  if (it == region_counts.end()) throw Error("no region " + std::to_string(mask) + " in report");
  return it->second;
}

std::string OverlapReport::region_name(std::uint32_t mask) const {
  std::string name;
  for (std::size_t i = 0; i < set_labels.size(); ++i) {
    if (mask & (1u << i)) {
      if (!name.empty()) name += '&';
      name += set_labels[i];
    }
  }
  return name;
}

OverlapReport overlap(std::span<const ActiveSet> sets, std::span<const std::string> labels) {
  if (sets.size() < 2) throw Error("overlap needs at least two active sets");
  if (!labels.empty() && labels.size() != sets.size()) {
    throw Error("overlap: label count does not match set count");
  }
  for (const auto& s : sets) s.validate();

  OverlapReport report;
  report.set_labels = labels.empty() ? default_labels(sets)
                                     : std::vector<std::string>(labels.begin(), labels.end());
  const std::size_t k = sets.size();
  for (const auto& s : sets) report.set_sizes.push_back(s.size());

  report.pairwise_intersections.assign(k, std::vector<std::uint64_t>(k, 0));
  for (std::size_t i = 0; i < k; ++i) {
    report.pairwise_intersections[i][i] = sets[i].size();
    for (std::size_t j = i + 1; j < k; ++j) {
      const auto n = intersection_size(sets[i].elements, sets[j].elements);
      report.pairwise_intersections[i][j] = n;
      report.pairwise_intersections[j][i] = n;
    }
  }

  const bool regions = k <= kMaxVennSets;
  if (regions) {
    for (std::uint32_t mask = 1; mask < (1u << k); ++mask) report.region_counts[mask] = 0;
  }
  for_each_membership(sets, [&](ElementIndex, std::uint64_t bits, std::size_t) {
    ++report.union_size;
    if (regions) ++report.region_counts[static_cast<std::uint32_t>(bits)];
  });
  return report;
}

OverlapReport cross_run_overlap(std::span<const ActiveSet> sets_by_run) {
  if (sets_by_run.size() < 2) throw Error("cross-run overlap needs at least two runs");
  std::vector<std::string> labels;
  for (const auto& s : sets_by_run) {
    if (s.experiment_id != sets_by_run.front().experiment_id) {
      throw Error("cross-run overlap mixes experiments '" + sets_by_run.front().experiment_id +
                  "' and '" + s.experiment_id + "'");
    }
    labels.push_back("run" + std::to_string(s.run_id));
  }
  if (std::set<std::string>(labels.begin(), labels.end()).size() != labels.size()) {
    labels.clear();  // repeated run ids; fall back to positional labels
    for (std::size_t i = 0; i < sets_by_run.size(); ++i) labels.push_back("set" + std::to_string(i));
  }
  return overlap(sets_by_run, labels);
}

std::size_t default_k_min(std::size_t n_runs) noexcept { return (3 * n_runs + 3) / 4; }

TemplateNetwork build_template(std::span<const ActiveSet> sets, std::size_t k_min) {
  if (sets.empty()) throw Error("template needs at least one run");
  if (k_min < 1) throw Error("k_min must be >= 1");
  if (k_min > sets.size()) {
    throw Error("k_min " + std::to_string(k_min) + " exceeds the " +
                std::to_string(sets.size()) + " runs supplied");
  }
  TemplateNetwork network;
  network.task_id = sets.front().experiment_id;
  network.k_min = k_min;
  for (const auto& s : sets) {
    if (s.experiment_id != network.task_id) {
      throw Error("template inputs mix experiments '" + network.task_id + "' and '" +
                  s.experiment_id + "'");
    }
    s.validate();
    network.source_runs.push_back(s.run_id);
  }
  for_each_membership(sets, [&](ElementIndex e, std::uint64_t, std::size_t members) {
    if (members >= k_min) network.elements.push_back(e);
  });
  return network;
}

std::optional<double> network_active_fraction(const ActiveSet& active,
                                              const TemplateNetwork& network) {
  if (network.elements.empty()) return std::nullopt;
  return static_cast<double>(intersection_size(active.elements, network.elements)) /
         static_cast<double>(network.elements.size());
}

ClassificationResult classify(const ActiveSet& active,
                              std::span<const TemplateNetwork> templates) {
  std::set<std::string_view> ids;
  for (const auto& t : templates) {
    if (!ids.insert(t.task_id).second) throw Error("duplicate template task id '" + t.task_id + "'");
  }
  ClassificationResult result;
  result.experiment_id = active.experiment_id;
  result.run_id = active.run_id;
  std::optional<double> best;
  std::size_t best_count = 0;
  std::string best_task;
  for (const auto& t : templates) {
    const auto f = network_active_fraction(active, t);
    result.fractions.push_back({t.task_id, f});
    if (!f) continue;
    if (*f >= kReportThreshold) result.above_70pct.push_back(t.task_id);
    if (!best || *f > *best) {
      best = f;
      best_count = 1;
      best_task = t.task_id;
    } else if (*f == *best) {
      ++best_count;
    }
  }
  if (best_count == 1) {
    result.argmax_task = best_task;
  } else if (best_count > 1) {
    result.tie = true;
  }
  return result;
}

// ---------------------------------------------------------------------------
// File formats

void save_active_set(const std::filesystem::path& path, const ActiveSet& set) {
  detail::write_json_file(path, detail::Json{{"experiment_id", set.experiment_id},
                                             {"run_id", set.run_id},
                                             {"elements", set.elements}});
}

ActiveSet load_active_set(const std::filesystem::path& path) {
  const auto json = detail::read_json_file(path);
  ActiveSet set{detail::required<std::vector<ElementIndex>>(json, "elements", path),
                detail::required<std::string>(json, "experiment_id", path),
                detail::optional_field<std::uint32_t>(json, "run_id", 0, path)};
  try {
    set.validate();
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
  return set;
}

void save_template(const std::filesystem::path& path, const TemplateNetwork& network) {
  detail::write_json_file(path, detail::Json{{"task_id", network.task_id},
                                             {"k_min", network.k_min},
                                             {"source_runs", network.source_runs},
                                             {"elements", network.elements}});
}

TemplateNetwork load_template(const std::filesystem::path& path) {
  const auto json = detail::read_json_file(path);
  TemplateNetwork network;
  network.task_id = detail::required<std::string>(json, "task_id", path);
  network.elements = detail::required<std::vector<ElementIndex>>(json, "elements", path);
  network.k_min = detail::optional_field<std::size_t>(json, "k_min", 1, path);
  network.source_runs =
      detail::optional_field<std::vector<std::uint32_t>>(json, "source_runs", {}, path);
  if (!std::is_sorted(network.elements.begin(), network.elements.end()) ||
      std::adjacent_find(network.elements.begin(), network.elements.end()) !=
          network.elements.end()) {
    throw Error(path.string() + ": template elements must be sorted and unique");
  }
  return network;
}

void save_overlap_report(const std::filesystem::path& path, const OverlapReport& report) {
  detail::Json regions = detail::Json::object();
  for (const auto& [mask, count] : report.region_counts) regions[report.region_name(mask)] = count;
  detail::write_json_file(path, detail::Json{{"set_labels", report.set_labels},
                                             {"set_sizes", report.set_sizes},
                                             {"union_size", report.union_size},
                                             {"region_counts", std::move(regions)},
                                             {"pairwise_intersections",
                                              report.pairwise_intersections}});
}

void save_classification(const std::filesystem::path& path,
                         std::span<const ClassificationResult> results) {
  detail::Json rows = detail::Json::array();
  for (const auto& r : results) {
    detail::Json fractions = detail::Json::object();
    for (const auto& f : r.fractions) {
      fractions[f.task_id] = f.fraction ? detail::Json(*f.fraction) : detail::Json("undefined");
    }
    rows.push_back({{"experiment_id", r.experiment_id},
                    {"run_id", r.run_id},
                    {"fractions", std::move(fractions)},
                    {"argmax_task", r.argmax_task ? detail::Json(*r.argmax_task) : detail::Json()},
                    {"tie", r.tie},
                    {"above_70pct", r.above_70pct}});
  }
  detail::write_json_file(path, detail::Json{{"results", std::move(rows)}});
}

void write_classification_csv(std::ostream& out, std::span<const ClassificationResult> results) {
  out << "experiment";
  if (!results.empty()) {
    for (const auto& f : results.front().fractions) out << ',' << f.task_id;
  }
  out << '\n';
  for (const auto& r : results) {
    if (r.fractions.size() != results.front().fractions.size()) {
      throw Error("classification rows use different template sets");
    }
    out << r.experiment_id;
    for (std::size_t i = 0; i < r.fractions.size(); ++i) {
      if (r.fractions[i].task_id != results.front().fractions[i].task_id) {
        throw Error("classification rows use different template sets");
      }
      out << ',' << (r.fractions[i].fraction ? format_fraction(*r.fractions[i].fraction)
                                             : std::string("undefined"));
    }
    out << '\n';
  }
}

}  // namespace netscan
