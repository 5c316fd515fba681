#pragma once

// Streaming mass univariate GLM: y = b0 + b1 * x fitted independently for
// every element of a trace, x being the 0/1 block regressor.
//
// Each element keeps three running sums (y, y^2, x*y). The sums are carried
// as double-double pairs: float32 inputs make every term exact in double, so
// compensated accumulation leaves only the final conversion to round and the
// fit matches a direct solve to near long-double precision.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "netscan/networks.hpp"
#include "netscan/trace.hpp"

namespace netscan {

enum class Sidedness : std::uint8_t { TwoSided, OneSided };

struct FitConfig {
  double alpha_family = 1e-4;
  // Number of simultaneous tests; nullopt means "all elements of the trace".
  std::optional<std::uint64_t> n_comparisons;
  double min_residual = 1e-30;
  Sidedness sidedness = Sidedness::TwoSided;

  void validate() const;
  // Copy with n_comparisons defaulted to n_elements.
  FitConfig resolved(std::uint64_t n_elements) const;
};

class Accumulators {
 public:
  explicit Accumulators(std::size_t n_elements);

  // Advances every element by one token.
  void update(std::span<const float> frame, std::uint8_t x);

  // Partition form: advances elements [first, first + values.size()) only.
  // Exactly one count_token() call must accompany each token.
  void update_elements(std::size_t first, std::span<const float> values, std::uint8_t x);
  void count_token(std::uint8_t x);

  std::size_t size() const noexcept { return y_hi_.size(); }
  std::uint64_t n_tokens() const noexcept { return n_tokens_; }
  double sum_x() const noexcept { return sum_x_; }
  double sum_xx() const noexcept { return sum_xx_; }

  // Compensated sums as a single rounded value.
  double sum_y(std::size_t e) const noexcept { return y_hi_[e] + y_lo_[e]; }
  double sum_yy(std::size_t e) const noexcept { return yy_hi_[e] + yy_lo_[e]; }
  double sum_xy(std::size_t e) const noexcept { return xy_hi_[e] + xy_lo_[e]; }

  // Same sums carried to extended precision.
  long double sum_y_ext(std::size_t e) const noexcept;
  long double sum_yy_ext(std::size_t e) const noexcept;
  long double sum_xy_ext(std::size_t e) const noexcept;

 private:
  std::vector<double> y_hi_, y_lo_;
  std::vector<double> yy_hi_, yy_lo_;
  std::vector<double> xy_hi_, xy_lo_;
  std::uint64_t n_tokens_ = 0;
  double sum_x_ = 0.0;
  double sum_xx_ = 0.0;
};

struct GlmStatsTable {
  std::vector<double> beta0;
  std::vector<double> beta1;
  std::vector<double> t;
  std::vector<double> p;
  std::uint64_t n_tokens = 0;
  std::uint64_t df = 0;

  std::size_t size() const noexcept { return p.size(); }
  bool operator==(const GlmStatsTable&) const = default;
};

// Requires n >= 3 and a non-constant regressor. Runs of near-zero residual
// (RSS < min_residual) are reported as p = 0 when b1 != 0, else t = 0, p = 1.
GlmStatsTable finalize(const Accumulators& acc, const FitConfig& config = {},
                       std::size_t threads = 1);

// One pass over the trace. Elements are partitioned across `threads`
// workers (0 = auto); results are bit-identical for any thread count.
GlmStatsTable mass_fit(const TraceReader& trace, std::span<const std::uint8_t> x,
                       const FitConfig& config = {}, std::size_t threads = 1);
GlmStatsTable mass_fit(const ActivationTrace& trace, std::span<const std::uint8_t> x,
                       const FitConfig& config = {}, std::size_t threads = 1);

// alpha_family / n_comparisons; n_comparisons must be set.
double bonferroni_threshold(const FitConfig& config);

// Elements with p < per_test_alpha, ascending.
ActiveSet threshold_active(const GlmStatsTable& stats, double per_test_alpha);

// Columns element,beta0,beta1,t,p.
void write_stats_csv(std::ostream& out, const GlmStatsTable& stats);

struct FitSummary {
  std::uint64_t n_elements = 0;
  std::uint64_t n_tokens = 0;
  std::uint64_t df = 0;
  double alpha_family = 0.0;
  std::uint64_t n_comparisons = 0;
  double per_test_alpha = 0.0;
  std::uint64_t n_active = 0;
  Sidedness sidedness = Sidedness::TwoSided;
};

FitSummary summarize_fit(const GlmStatsTable& stats, const FitConfig& resolved_config,
                         std::uint64_t n_active);
void save_fit_summary(const std::filesystem::path& path, const FitSummary& summary);
FitSummary load_fit_summary(const std::filesystem::path& path);

}  // namespace netscan
