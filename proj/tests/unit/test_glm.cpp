#include "netscan/glm.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "netscan/design.hpp"
#include "netscan/error.hpp"
#include "netscan/stats.hpp"
#include "temp_dir.hpp"

namespace netscan {
namespace {

using testing::TempDir;

const std::vector<std::uint8_t> kX9{0, 0, 0, 1, 1, 1, 0, 0, 0};

ActivationTrace make_trace(std::size_t n_el, const std::vector<std::vector<float>>& series) {
  ActivationTrace tr;
  tr.header.n_elements = n_el;
  tr.header.n_tokens = series.empty() ? 0 : series[0].size();
  tr.manifest = Manifest::flat("m", n_el);
  tr.values.resize(n_el * tr.header.n_tokens);
  for (std::size_t e = 0; e < n_el; ++e) {
    for (std::size_t t = 0; t < tr.header.n_tokens; ++t) {
      tr.values[t * n_el + e] = series[e][t];
    }
  }
  return tr;
}

// Independent direct solve: full X'X / X'y normal equations and explicit
// residuals, all in long double.
struct OracleFit {
  long double b0, b1, t;
};

OracleFit oracle_fit(std::span<const float> y, std::span<const std::uint8_t> x) {
  const long double n = y.size();
  long double sx = 0, sxx = 0, sy = 0, sxy = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    sx += x[i];
    sxx += x[i] * x[i];
    sy += y[i];
    sxy += static_cast<long double>(x[i]) * y[i];
  }
  // [n sx; sx sxx] [b0; b1] = [sy; sxy]
  const long double det = n * sxx - sx * sx;
  const long double b0 = (sxx * sy - sx * sxy) / det;
  const long double b1 = (n * sxy - sx * sy) / det;
  long double rss = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const long double r = y[i] - b0 - b1 * x[i];
    rss += r * r;
  }
  const long double s2 = rss / (n - 2);
  const long double var_b1 = s2 * n / det;  // (X'X)^-1 [1,1]
  return {b0, b1, b1 / std::sqrt(var_b1)};
}

double rel_err(double got, long double want) {
  return static_cast<double>(std::fabs(static_cast<long double>(got) - want) /
                             std::max(std::fabs(want), 1e-300L));
}

TEST(Accumulators, SingleUpdate) {
  Accumulators acc(1);
  acc.update(std::vector<float>{2.0f}, 1);
  EXPECT_EQ(acc.sum_y(0), 2.0);
  EXPECT_EQ(acc.sum_yy(0), 4.0);
  EXPECT_EQ(acc.sum_xy(0), 2.0);
  EXPECT_EQ(acc.n_tokens(), 1u);
}

TEST(Accumulators, TwoUpdates) {
  Accumulators acc(1);
  acc.update(std::vector<float>{1.0f}, 0);
  acc.update(std::vector<float>{3.0f}, 1);
  EXPECT_EQ(acc.sum_y(0), 4.0);
  EXPECT_EQ(acc.sum_xy(0), 3.0);
  EXPECT_EQ(acc.sum_x(), 1.0);
  EXPECT_EQ(acc.sum_xx(), acc.sum_x());
  EXPECT_EQ(acc.n_tokens(), 2u);
}

TEST(Accumulators, WidthMismatchAndBadRegressor) {
  Accumulators acc(4);
  EXPECT_THROW(acc.update(std::vector<float>{1, 2, 3}, 0), Error);
  EXPECT_THROW(acc.update(std::vector<float>{1, 2, 3, 4}, 2), Error);
}

TEST(Finalize, PerfectFit) {
  Accumulators acc(1);
  const float y[9] = {1, 1, 1, 2, 2, 2, 1, 1, 1};
  for (int t = 0; t < 9; ++t) acc.update(std::span<const float>(&y[t], 1), kX9[t]);
  const auto s = finalize(acc);
  EXPECT_EQ(s.beta0[0], 1.0);
  EXPECT_EQ(s.beta1[0], 1.0);
  EXPECT_EQ(s.p[0], 0.0);
  EXPECT_TRUE(std::isinf(s.t[0]) && s.t[0] > 0);
  EXPECT_EQ(s.df, 7u);
}

TEST(Finalize, NoisyGroupExampleMatchesFrozenOracle) {
  // Values from a 50-digit evaluation on the float32-rounded inputs.
  Accumulators acc(1);
  const float y[9] = {1.0f, 0.9f, 1.1f, 2.0f, 2.1f, 1.9f, 1.0f, 1.1f, 0.9f};
  for (int t = 0; t < 9; ++t) acc.update(std::span<const float>(&y[t], 1), kX9[t]);
  const auto s = finalize(acc);
  EXPECT_NEAR(s.beta0[0], 1.0, 1e-15);
  EXPECT_NEAR(s.beta1[0], 0.99999996026357015, 1e-15);
  EXPECT_NEAR(s.t[0] / 15.275251102550626, 1.0, 1e-12);
  EXPECT_NEAR(s.p[0] / 1.2413855798630004e-6, 1.0, 1e-10);
  EXPECT_EQ(s.df, 7u);
  // Decimal-exact reference differs only by the float32 rounding of y.
  EXPECT_NEAR(s.t[0], 15.275252316519467, 2e-6);
}

TEST(Finalize, ConstantSeries) {
  Accumulators acc(1);
  const std::vector<std::uint8_t> x{0, 1, 0, 1};
  const float five = 5.0f;
  for (auto xi : x) acc.update(std::span<const float>(&five, 1), xi);
  const auto s = finalize(acc);
  EXPECT_EQ(s.beta1[0], 0.0);
  EXPECT_EQ(s.beta0[0], 5.0);
  EXPECT_EQ(s.t[0], 0.0);
  EXPECT_EQ(s.p[0], 1.0);
}

TEST(Finalize, Preconditions) {
  Accumulators two(1);
  two.update(std::vector<float>{1}, 0);
  two.update(std::vector<float>{2}, 1);
  EXPECT_THROW(finalize(two), Error);
  Accumulators flat(1);
  for (int t = 0; t < 5; ++t) flat.update(std::vector<float>{float(t)}, 1);
  EXPECT_THROW(finalize(flat), Error);
}

TEST(MassFit, ThreeElementExample) {
  std::mt19937_64 rng(5);
  std::normal_distribution<float> noise;
  const auto r = block_regressor(10, 10);
  std::vector<float> copy(r.size()), constant(r.size(), 3.25f), iid(r.size());
  for (std::size_t t = 0; t < r.size(); ++t) {
    copy[t] = r.x[t];
    iid[t] = noise(rng);
  }
  const auto s = mass_fit(make_trace(3, {copy, constant, iid}), r.x);
  EXPECT_EQ(s.p[0], 0.0);
  EXPECT_EQ(s.p[1], 1.0);
  EXPECT_GT(s.p[2], 0.0);
  EXPECT_LT(s.p[2], 1.0);
}

TEST(MassFit, MatchesLoopedFinalize) {
  std::mt19937_64 rng(6);
  std::normal_distribution<float> noise(3.0f, 2.0f);
  std::bernoulli_distribution coin(0.4);
  const std::size_t n_el = 200, n_tok = 50;
  std::vector<std::uint8_t> x(n_tok);
  for (auto& v : x) v = coin(rng);
  x[0] = 0;
  x[1] = 1;
  std::vector<std::vector<float>> series(n_el, std::vector<float>(n_tok));
  for (auto& s : series) {
    for (auto& v : s) v = noise(rng);
  }
  const auto all = mass_fit(make_trace(n_el, series), x, {}, 3);
  for (std::size_t e = 0; e < n_el; ++e) {
    Accumulators one(1);
    for (std::size_t t = 0; t < n_tok; ++t) one.update(std::span<const float>(&series[e][t], 1), x[t]);
    const auto s = finalize(one);
    EXPECT_EQ(all.beta0[e], s.beta0[0]);
    EXPECT_EQ(all.beta1[e], s.beta1[0]);
    EXPECT_EQ(all.t[e], s.t[0]);
    EXPECT_EQ(all.p[e], s.p[0]);
  }
}

TEST(MassFit, MatchesDirectSolve) {
  std::mt19937_64 rng(8);
  for (int instance = 0; instance < 10; ++instance) {
    const std::size_t n_el = 1 + rng() % 300, n_tok = 3 + rng() % 400;
    std::uniform_real_distribution<float> base(-100.0f, 100.0f);
    std::normal_distribution<float> noise(0.0f, 1.0f + static_cast<float>(rng() % 50));
    std::vector<std::uint8_t> x(n_tok);
    std::bernoulli_distribution coin(0.5);
    for (auto& v : x) v = coin(rng);
    x[0] = 0;
    x[1] = 1;
    std::vector<std::vector<float>> series(n_el, std::vector<float>(n_tok));
    for (auto& s : series) {
      const float b0 = base(rng), b1 = base(rng) * 0.05f;
      for (std::size_t t = 0; t < n_tok; ++t) s[t] = b0 + b1 * x[t] + noise(rng);
    }
    const auto fit = mass_fit(make_trace(n_el, series), x);
    for (std::size_t e = 0; e < n_el; ++e) {
      const auto o = oracle_fit(series[e], x);
      EXPECT_LE(rel_err(fit.beta0[e], o.b0), 1e-10);
      EXPECT_LE(rel_err(fit.beta1[e], o.b1), 1e-10);
      EXPECT_LE(rel_err(fit.t[e], o.t), 1e-10);
    }
  }
}

TEST(MassFit, GroupMeanIdentity) {
  std::mt19937_64 rng(9);
  std::normal_distribution<float> noise(50.0f, 5.0f);
  const auto r = block_regressor(10, 10);
  std::vector<std::vector<float>> series(64, std::vector<float>(r.size()));
  for (auto& s : series) {
    for (auto& v : s) v = noise(rng);
  }
  const auto fit = mass_fit(make_trace(series.size(), series), r.x);
  for (std::size_t e = 0; e < series.size(); ++e) {
    long double on = 0, off = 0;
    for (std::size_t t = 0; t < r.size(); ++t) (r.x[t] ? on : off) += series[e][t];
    const long double diff = on / r.n_on_tokens - off / r.n_off_tokens;
    EXPECT_LE(std::fabs(fit.beta1[e] - diff), 1e-9 * std::max(1.0L, std::fabs(diff)));
  }
}

TEST(MassFit, AffineEquivariance) {
  std::mt19937_64 rng(10);
  std::normal_distribution<float> noise;
  const auto r = block_regressor(5, 8);
  std::vector<std::vector<float>> base(40, std::vector<float>(r.size()));
  for (auto& s : base) {
    for (std::size_t t = 0; t < s.size(); ++t) s[t] = noise(rng) + 0.3f * r.x[t];
  }
  const auto ref = mass_fit(make_trace(base.size(), base), r.x);
  // Scale by powers of two so the transformed float32 inputs stay exact.
  for (auto [a, b] : {std::pair{-2.0f, 0.0f}, std::pair{4.0f, 0.0f}, std::pair{0.5f, 0.0f},
                      std::pair{-0.25f, 0.0f}}) {
    auto scaled = base;
    for (auto& s : scaled) {
      for (auto& v : s) v = a * v + b;
    }
    const auto fit = mass_fit(make_trace(scaled.size(), scaled), r.x);
    for (std::size_t e = 0; e < base.size(); ++e) {
      EXPECT_NEAR(fit.t[e], std::copysign(1.0f, a) * ref.t[e], 1e-9 * std::fabs(ref.t[e]));
      EXPECT_NEAR(fit.p[e], ref.p[e], 1e-9 * ref.p[e]);
    }
  }
  // A general shift rounds the float32 inputs, so compare against the
  // oracle fit of the rounded data.
  auto shifted = base;
  for (auto& s : shifted) {
    for (auto& v : s) v = 3.0f * v + 7.0f;
  }
  const auto fit = mass_fit(make_trace(shifted.size(), shifted), r.x);
  for (std::size_t e = 0; e < base.size(); ++e) {
    EXPECT_NEAR(fit.t[e], ref.t[e], 1e-5 * std::fabs(ref.t[e]) + 1e-6);
    EXPECT_LE(rel_err(fit.t[e], oracle_fit(shifted[e], r.x).t), 1e-10);
  }
}

TEST(MassFit, NullCalibration) {
  std::mt19937_64 rng(12345);
  std::normal_distribution<float> noise;
  const auto r = block_regressor(10, 10);
  const std::size_t n_el = 10000;
  ActivationTrace tr;
  tr.header.n_elements = n_el;
  tr.header.n_tokens = r.size();
  tr.manifest = Manifest::flat("m", n_el);
  tr.values.resize(n_el * r.size());
  for (auto& v : tr.values) v = noise(rng);
  const auto fit = mass_fit(tr, r.x, {}, 2);
  for (double alpha : {0.01, 0.05}) {
    std::size_t hits = 0;
    for (double p : fit.p) hits += p < alpha;
    const double sd = std::sqrt(n_el * alpha * (1 - alpha));
    EXPECT_NEAR(static_cast<double>(hits), n_el * alpha, 4 * sd) << alpha;
  }
}

TEST(MassFit, BitIdenticalAcrossThreadCounts) {
  std::mt19937_64 rng(13);
  std::normal_distribution<float> noise;
  const auto r = block_regressor(3, 7);
  const std::size_t n_el = 9000;  // spans several element tiles
  ActivationTrace tr;
  tr.header.n_elements = n_el;
  tr.header.n_tokens = r.size();
  tr.manifest = Manifest::flat("m", n_el);
  tr.values.resize(n_el * r.size());
  for (auto& v : tr.values) v = noise(rng);
  const auto one = mass_fit(tr, r.x, {}, 1);
  for (std::size_t threads : {2u, 3u, 8u}) {
    const auto many = mass_fit(tr, r.x, {}, threads);
    EXPECT_TRUE(many == one) << threads;
  }
}

TEST(MassFit, ReaderAndInMemoryAgree) {
  TempDir dir;
  std::mt19937_64 rng(14);
  std::normal_distribution<float> noise;
  const auto r = block_regressor(4, 5);
  ActivationTrace tr;
  tr.header.n_elements = 77;
  tr.header.n_tokens = r.size();
  tr.manifest = Manifest::flat("m", 77);
  tr.values.resize(77 * r.size());
  for (auto& v : tr.values) v = noise(rng);
  write_trace(dir / "t.actr", tr);
  EXPECT_TRUE(mass_fit(TraceReader(dir / "t.actr"), r.x, {}, 4) == mass_fit(tr, r.x));
}

TEST(MassFit, Preconditions) {
  const std::vector<std::vector<float>> two{{1.0f, 2.0f}};
  EXPECT_THROW(mass_fit(make_trace(1, two), std::vector<std::uint8_t>{0, 1}), Error);
  const std::vector<std::vector<float>> four{{1.0f, 2.0f, 3.0f, 4.0f}};
  EXPECT_THROW(mass_fit(make_trace(1, four), std::vector<std::uint8_t>{0, 1, 0}), Error);
  EXPECT_THROW(mass_fit(make_trace(1, four), std::vector<std::uint8_t>{1, 1, 1, 1}), Error);
}

TEST(MassFit, OneSidedUsesUpperTail) {
  std::vector<float> up{0, 0.1f, 0, 1, 1.2f, 0.9f, 0, 0.2f, 0};
  std::vector<float> down = up;
  for (auto& v : down) v = -v;
  FitConfig cfg;
  cfg.sidedness = Sidedness::OneSided;
  const auto s = mass_fit(make_trace(2, {up, down}), kX9, cfg);
  EXPECT_NEAR(s.p[0], upper_tail_p(s.t[0], 7), 1e-15);
  EXPECT_GT(s.p[1], 0.99);
}

TEST(Bonferroni, Thresholds) {
  FitConfig c;
  c.n_comparisons = 259744;
  EXPECT_NEAR(bonferroni_threshold(c), 3.850e-10, 5e-14);
  EXPECT_NEAR(bonferroni_threshold(c), 3.849944561e-10, 1e-18);
  c.alpha_family = 0.05;
  c.n_comparisons = 1;
  EXPECT_EQ(bonferroni_threshold(c), 0.05);
  c.alpha_family = 0.01;
  c.n_comparisons = 100;
  EXPECT_NEAR(bonferroni_threshold(c), 1e-4, 1e-19);
  EXPECT_EQ(FitConfig{}.resolved(4000).n_comparisons, 4000u);
}

TEST(FitConfigValidation, RejectsOutOfRange) {
  FitConfig c;
  c.alpha_family = 0.0;
  EXPECT_THROW(c.validate(), Error);
  c.alpha_family = 1.0;
  EXPECT_THROW(c.validate(), Error);
  c.alpha_family = 0.05;
  c.n_comparisons = 0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(Threshold, Examples) {
  GlmStatsTable s;
  s.p = {1e-12, 0.5, 1e-3};
  s.beta0 = s.beta1 = s.t = {0, 0, 0};
  EXPECT_EQ(threshold_active(s, 1e-10).elements, (std::vector<ElementIndex>{0}));
  EXPECT_EQ(threshold_active(s, 1.0).elements, (std::vector<ElementIndex>{0, 1, 2}));
  EXPECT_TRUE(threshold_active(GlmStatsTable{}, 0.5).elements.empty());
}

TEST(Export, CsvAndSummary) {
  GlmStatsTable s;
  s.beta0 = {1.5, -2};
  s.beta1 = {0.25, 3};
  s.t = {std::numeric_limits<double>::infinity(), -1.125};
  s.p = {0, 0.5};
  s.n_tokens = 9;
  s.df = 7;
  std::ostringstream csv;
  write_stats_csv(csv, s);
  EXPECT_EQ(csv.str(), "element,beta0,beta1,t,p\n0,1.5,0.25,inf,0\n1,-2,3,-1.125,0.5\n");

  TempDir dir;
  FitConfig c;
  c = c.resolved(2);
  const auto summary = summarize_fit(s, c, 1);
  save_fit_summary(dir / "f.json", summary);
  const auto back = load_fit_summary(dir / "f.json");
  EXPECT_EQ(back.n_elements, 2u);
  EXPECT_EQ(back.df, 7u);
  EXPECT_EQ(back.per_test_alpha, 5e-5);
  EXPECT_EQ(back.n_active, 1u);
}

}  // namespace
}  // namespace netscan
