#include "netscan/networks.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "netscan/error.hpp"
#include "temp_dir.hpp"

namespace netscan {
namespace {

using testing::TempDir;

ActiveSet set_of(std::vector<ElementIndex> e, std::string id = "t", std::uint32_t run = 0) {
  return make_active_set(std::move(e), std::move(id), run);
}

TemplateNetwork tmpl(std::string id, std::vector<ElementIndex> e) {
  return TemplateNetwork{std::move(id), std::move(e), 1, {}};
}

TEST(ActiveSet, MakeSortsAndDeduplicates) {
  const auto s = set_of({5, 1, 3, 1, 5});
  EXPECT_EQ(s.elements, (std::vector<ElementIndex>{1, 3, 5}));
  EXPECT_TRUE(s.contains(3));
  EXPECT_FALSE(s.contains(4));
  EXPECT_NO_THROW(s.validate(6));
  EXPECT_THROW(s.validate(5), Error);
  ActiveSet bad{{3, 1}, "x", 0};
  EXPECT_THROW(bad.validate(), Error);
}

TEST(Overlap, TwoSetExamples) {
  std::vector<ActiveSet> sets{set_of({1, 2, 3}, "A"), set_of({2, 3, 4}, "B")};
  auto r = overlap(sets);
  EXPECT_EQ(r.region(0b01), 1u);
  EXPECT_EQ(r.region(0b10), 1u);
  EXPECT_EQ(r.region(0b11), 2u);
  EXPECT_EQ(r.region_name(0b11), "A&B");
  EXPECT_EQ(r.union_size, 4u);

  sets = {set_of({1, 2}, "A"), set_of({3, 4}, "B")};
  EXPECT_EQ(overlap(sets).region(0b11), 0u);

  sets = {set_of({7, 8, 9}, "A"), set_of({7, 8, 9}, "B")};
  r = overlap(sets);
  EXPECT_EQ(r.region(0b01), 0u);
  EXPECT_EQ(r.region(0b10), 0u);
  EXPECT_EQ(r.region(0b11), 3u);
}

TEST(Overlap, NeedsTwoSets) {
  std::vector<ActiveSet> one{set_of({1})};
  EXPECT_THROW(overlap(one), Error);
  EXPECT_THROW(cross_run_overlap(one), Error);
}

TEST(Overlap, LabelsDisambiguateRepeatedIds) {
  std::vector<ActiveSet> sets{set_of({1}, "x", 1), set_of({1}, "x", 2), set_of({2}, "y", 1)};
  const auto r = overlap(sets);
  EXPECT_EQ(r.set_labels, (std::vector<std::string>{"x/run1", "x/run2", "y/run1"}));
}

TEST(Overlap, SevenSetsGivePairwiseMatrixOnly) {
  std::vector<ActiveSet> sets;
  for (int i = 0; i < 7; ++i) sets.push_back(set_of({ElementIndex(i), 100}, "t" + std::to_string(i)));
  const auto r = overlap(sets);
  ASSERT_EQ(r.pairwise_intersections.size(), 7u);
  for (const auto& row : r.pairwise_intersections) ASSERT_EQ(row.size(), 7u);
  EXPECT_EQ(r.pairwise_intersections[2][5], 1u);
  EXPECT_EQ(r.pairwise_intersections[3][3], 2u);
  EXPECT_FALSE(r.has_regions());
  EXPECT_EQ(r.union_size, 8u);
}

TEST(CrossRunOverlap, Examples) {
  std::vector<ActiveSet> sets{set_of({1, 2}, "e", 1), set_of({1, 2}, "e", 2)};
  auto r = cross_run_overlap(sets);
  EXPECT_EQ(r.set_labels, (std::vector<std::string>{"run1", "run2"}));
  EXPECT_EQ(r.region(0b11), 2u);
  sets = {set_of({1, 2}, "e", 1), set_of({2, 3}, "e", 2)};
  EXPECT_EQ(cross_run_overlap(sets).region(0b11), 1u);
  sets = {set_of({1}, "e", 1), set_of({1}, "f", 2)};
  EXPECT_THROW(cross_run_overlap(sets), Error);
}

// Brute-force oracle: membership masks from hash sets.
TEST(Overlap, MatchesHashSetOracle) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t k = 2 + rng() % 4;
    const std::uint64_t universe = 1 + rng() % 10000;
    std::vector<ActiveSet> sets;
    std::vector<std::unordered_set<ElementIndex>> hashed(k);
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t n = rng() % std::min<std::uint64_t>(universe, 3000);
      std::vector<ElementIndex> e(n);
      for (auto& v : e) v = rng() % universe;
      hashed[i] = {e.begin(), e.end()};
      sets.push_back(set_of(e, "s" + std::to_string(i)));
    }
    std::unordered_map<ElementIndex, std::uint32_t> mask;
    for (std::size_t i = 0; i < k; ++i) {
      for (auto v : hashed[i]) mask[v] |= 1u << i;
    }
    std::map<std::uint32_t, std::uint64_t> regions;
    for (auto [v, m] : mask) ++regions[m];

    const auto r = overlap(sets);
    EXPECT_EQ(r.union_size, mask.size());
    std::uint64_t total = 0;
    for (std::uint32_t m = 1; m < (1u << k); ++m) {
      EXPECT_EQ(r.region(m), regions[m]) << "mask " << m;
      total += r.region(m);
    }
    EXPECT_EQ(total, r.union_size);
    for (std::size_t i = 0; i < k; ++i) {
      EXPECT_EQ(r.set_sizes[i], hashed[i].size());
      for (std::size_t j = 0; j < k; ++j) {
        std::uint64_t both = 0;
        for (auto v : hashed[i]) both += hashed[j].contains(v);
        EXPECT_EQ(r.pairwise_intersections[i][j], both);
        EXPECT_EQ(r.pairwise_intersections[i][j], r.pairwise_intersections[j][i]);
      }
    }

    // Permuting the inputs permutes the region masks.
    std::vector<std::size_t> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<ActiveSet> permuted;
    for (auto p : perm) permuted.push_back(sets[p]);
    const auto rp = overlap(permuted);
    for (std::uint32_t m = 1; m < (1u << k); ++m) {
      std::uint32_t orig = 0;
      for (std::size_t i = 0; i < k; ++i) {
        if (m & (1u << i)) orig |= 1u << perm[i];
      }
      EXPECT_EQ(rp.region(m), r.region(orig));
    }
  }
}

TEST(Template, CountingExample) {
  std::vector<ActiveSet> runs{set_of({1, 2, 3}, "t", 1), set_of({2, 3, 4}, "t", 2),
                              set_of({2, 3, 5}, "t", 3), set_of({2, 6}, "t", 4)};
  const auto t = build_template(runs, 3);
  EXPECT_EQ(t.elements, (std::vector<ElementIndex>{2, 3}));
  EXPECT_EQ(t.task_id, "t");
  EXPECT_EQ(t.k_min, 3u);
  EXPECT_EQ(t.source_runs, (std::vector<std::uint32_t>{1, 2, 3, 4}));
  EXPECT_EQ(build_template(runs, 1).elements, (std::vector<ElementIndex>{1, 2, 3, 4, 5, 6}));
  EXPECT_EQ(build_template(runs, 4).elements, (std::vector<ElementIndex>{2}));
}

TEST(Template, EmptyRunsGiveEmptyTemplate) {
  std::vector<ActiveSet> runs(4, set_of({}, "rand"));
  EXPECT_TRUE(build_template(runs, 3).empty());
}

TEST(Template, Errors) {
  std::vector<ActiveSet> runs{set_of({1}, "a", 1), set_of({1}, "b", 2)};
  EXPECT_THROW(build_template(runs, 1), Error);
  runs[1].experiment_id = "a";
  EXPECT_THROW(build_template(runs, 3), Error);
  EXPECT_THROW(build_template(runs, 0), Error);
}

TEST(Template, DefaultKMin) {
  EXPECT_EQ(default_k_min(4), 3u);
  EXPECT_EQ(default_k_min(1), 1u);
  EXPECT_EQ(default_k_min(5), 4u);
  EXPECT_EQ(default_k_min(8), 6u);
}

TEST(Template, MonotoneInKMinAndMatchesOracle) {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 1 + rng() % 6;
    std::vector<ActiveSet> runs;
    std::unordered_map<ElementIndex, std::size_t> counts;
    for (std::size_t r = 0; r < n; ++r) {
      std::vector<ElementIndex> e(rng() % 500);
      for (auto& v : e) v = rng() % 800;
      runs.push_back(set_of(e, "task", static_cast<std::uint32_t>(r + 1)));
      for (auto v : runs.back().elements) ++counts[v];
    }
    std::vector<ElementIndex> prev;
    for (std::size_t k = 1; k <= n; ++k) {
      const auto t = build_template(runs, k);
      std::vector<ElementIndex> expect;
      for (auto [v, c] : counts) {
        if (c >= k) expect.push_back(v);
      }
      std::sort(expect.begin(), expect.end());
      EXPECT_EQ(t.elements, expect);
      if (k > 1) EXPECT_TRUE(std::includes(prev.begin(), prev.end(), t.elements.begin(), t.elements.end()));
      prev = t.elements;
    }
  }
}

TEST(Fraction, Examples) {
  EXPECT_EQ(network_active_fraction(set_of({2, 3, 9}), tmpl("a", {2, 3})), 1.0);
  EXPECT_EQ(network_active_fraction(set_of({1}), tmpl("a", {2, 3, 4, 5})), 0.0);
  EXPECT_FALSE(network_active_fraction(set_of({1}), tmpl("a", {})).has_value());
  const auto t = tmpl("a", {4, 8, 15, 16, 23, 42});
  EXPECT_EQ(network_active_fraction(set_of(t.elements), t), 1.0);
}

TEST(Classify, ArgmaxAndAnnotation) {
  // A: 9 of 10, B: 2 of 10.
  std::vector<TemplateNetwork> ts{tmpl("A", {0, 1, 2, 3, 4, 5, 6, 7, 8, 9}),
                                  tmpl("B", {10, 11, 12, 13, 14, 15, 16, 17, 18, 19})};
  const auto active = set_of({0, 1, 2, 3, 4, 5, 6, 7, 8, 10, 11}, "held", 5);
  const auto r = classify(active, ts);
  EXPECT_EQ(r.argmax_task, "A");
  EXPECT_FALSE(r.tie);
  EXPECT_EQ(r.above_70pct, (std::vector<std::string>{"A"}));
  EXPECT_DOUBLE_EQ(*r.fractions[0].fraction, 0.9);
  EXPECT_DOUBLE_EQ(*r.fractions[1].fraction, 0.2);
  EXPECT_EQ(r.experiment_id, "held");
  EXPECT_EQ(r.run_id, 5u);

  // An element outside every template leaves the argmax alone.
  auto extra = active;
  extra.elements.push_back(1000);
  EXPECT_EQ(classify(extra, ts).argmax_task, "A");
}

TEST(Classify, AllEmptyTemplates) {
  std::vector<TemplateNetwork> ts{tmpl("r1", {}), tmpl("r2", {})};
  const auto r = classify(set_of({1, 2}), ts);
  EXPECT_FALSE(r.argmax_task.has_value());
  EXPECT_FALSE(r.tie);
  for (const auto& f : r.fractions) EXPECT_FALSE(f.fraction.has_value());
}

TEST(Classify, Tie) {
  std::vector<TemplateNetwork> ts{tmpl("A", {1, 2}), tmpl("B", {3, 4})};
  const auto r = classify(set_of({1, 3}), ts);
  EXPECT_FALSE(r.argmax_task.has_value());
  EXPECT_TRUE(r.tie);
}

TEST(Classify, DuplicateTaskIds) {
  std::vector<TemplateNetwork> ts{tmpl("A", {1}), tmpl("A", {2})};
  EXPECT_THROW(classify(set_of({1}), ts), Error);
}

TEST(Files, ActiveSetAndTemplateRoundTrip) {
  TempDir dir;
  const auto s = set_of({3, 1, 4}, "med_img", 2);
  save_active_set(dir / "a.json", s);
  EXPECT_EQ(load_active_set(dir / "a.json"), s);
  const auto j = nlohmann::json::parse(std::ifstream(dir / "a.json"));
  EXPECT_EQ(j.at("experiment_id"), "med_img");
  EXPECT_EQ(j.at("run_id"), 2);
  EXPECT_EQ(j.at("elements"), nlohmann::json::array({1, 3, 4}));

  TemplateNetwork t{"med_img", {1, 3}, 3, {1, 2, 3, 4}};
  save_template(dir / "t.json", t);
  EXPECT_EQ(load_template(dir / "t.json"), t);

  {
    std::ofstream out(dir / "bad.json");
    out << R"({"experiment_id": "x", "run_id": 0, "elements": [3, 1]})";
  }
  EXPECT_THROW(load_active_set(dir / "bad.json"), Error);
}

TEST(Files, ClassificationCsvUsesUndefinedLiteral) {
  std::vector<TemplateNetwork> ts{tmpl("A", {1, 2}), tmpl("rand", {})};
  std::vector<ClassificationResult> rs{classify(set_of({1, 2}, "A", 5), ts),
                                       classify(set_of({1}, "rand", 5), ts)};
  std::ostringstream csv;
  write_classification_csv(csv, rs);
  EXPECT_EQ(csv.str(), "experiment,A,rand\nA,1,undefined\nrand,0.5,undefined\n");

  TempDir dir;
  save_classification(dir / "c.json", rs);
  const auto j = nlohmann::json::parse(std::ifstream(dir / "c.json"));
  EXPECT_EQ(j["results"][0]["fractions"]["rand"], "undefined");
  EXPECT_EQ(j["results"][0]["argmax_task"], "A");
  EXPECT_EQ(j["results"][1]["tie"], false);
}

TEST(Files, OverlapReportJson) {
  TempDir dir;
  std::vector<ActiveSet> sets{set_of({1, 2, 3}, "A"), set_of({2, 3, 4}, "B")};
  save_overlap_report(dir / "o.json", overlap(sets));
  const auto j = nlohmann::json::parse(std::ifstream(dir / "o.json"));
  EXPECT_EQ(j["region_counts"]["A&B"], 2);
  EXPECT_EQ(j["region_counts"]["A"], 1);
  EXPECT_EQ(j["union_size"], 4);
}

}  // namespace
}  // namespace netscan
