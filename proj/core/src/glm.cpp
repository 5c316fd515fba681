#include "netscan/glm.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>

#include "json_util.hpp"
#include "netscan/error.hpp"
#include "netscan/parallel.hpp"
#include "netscan/stats.hpp"

namespace netscan {

namespace {

// Knuth's TwoSum: hi + v split into its rounded sum and exact error.
inline void add_compensated(double& hi, double& lo, double v) noexcept {
  const double s = hi + v;
  const double v_virtual = s - hi;
  lo += (hi - (s - v_virtual)) + (v - v_virtual);
  hi = s;
}

// Accumulator tile kept cache resident while a batch of frames streams by.
constexpr std::size_t kElementTile = 4096;
constexpr std::uint64_t kBatchBytes = 32ull << 20;

void check_design(std::span<const std::uint8_t> x, std::uint64_t n_tokens) {
  if (x.size() != n_tokens) {
    throw Error("regressor has " + std::to_string(x.size()) + " entries but the trace has " +
                std::to_string(n_tokens) + " tokens");
  }
  if (n_tokens < 3) {
    throw Error("need at least 3 tokens to fit (df = n - 2 >= 1), got " +
                std::to_string(n_tokens));
  }
  std::uint64_t on = 0;
  for (std::size_t t = 0; t < x.size(); ++t) {
    if (x[t] > 1) throw Error("regressor value at token " + std::to_string(t) + " is not 0/1");
    on += x[t];
  }
  if (on == 0 || on == n_tokens) throw Error("regressor is constant; nothing to contrast");
}

// Feeds one token-major block of frames into the accumulators.
void ingest_batch(Accumulators& acc, std::span<const float> values, std::uint64_t n_frames,
                  std::span<const std::uint8_t> x, std::size_t threads) {
  const std::size_t width = acc.size();
  parallel_for(width, threads, [&](std::size_t first, std::size_t last) {
    for (std::size_t tile = first; tile < last; tile += kElementTile) {
      const std::size_t tile_end = std::min(last, tile + kElementTile);
      for (std::uint64_t i = 0; i < n_frames; ++i) {
        acc.update_elements(tile, values.subspan(i * width + tile, tile_end - tile), x[i]);
      }
    }
  });
  for (std::uint64_t i = 0; i < n_frames; ++i) acc.count_token(x[i]);
}

std::uint64_t frames_per_batch(std::uint64_t n_elements) {
  return std::max<std::uint64_t>(1, kBatchBytes / (n_elements * sizeof(float)));
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

void FitConfig::validate() const {
  if (!(alpha_family > 0.0 && alpha_family < 1.0)) {
    throw Error("alpha must lie strictly between 0 and 1");
  }
  if (n_comparisons && *n_comparisons < 1) throw Error("number of comparisons must be >= 1");
  if (!(min_residual >= 0.0)) throw Error("min_residual must be non-negative");
}

FitConfig FitConfig::resolved(std::uint64_t n_elements) const {
  FitConfig copy = *this;
  if (!copy.n_comparisons) copy.n_comparisons = n_elements;
  copy.validate();
  return copy;
}

// ---------------------------------------------------------------------------

Accumulators::Accumulators(std::size_t n_elements)
    : y_hi_(n_elements, 0.0),
      y_lo_(n_elements, 0.0),
      yy_hi_(n_elements, 0.0),
      yy_lo_(n_elements, 0.0),
      xy_hi_(n_elements, 0.0),
      xy_lo_(n_elements, 0.0) {
  if (n_elements == 0) throw Error("accumulator bank needs at least one element");
}

void Accumulators::update(std::span<const float> frame, std::uint8_t x) {
  if (frame.size() != size()) {
    throw Error("frame width " + std::to_string(frame.size()) + " does not match accumulator width " +
                std::to_string(size()));
  }
  if (x > 1) throw Error("regressor value must be 0 or 1");
  update_elements(0, frame, x);
  count_token(x);
}

void Accumulators::update_elements(std::size_t first, std::span<const float> values,
                                   std::uint8_t x) {
  if (first + values.size() > size()) throw Error("element range exceeds accumulator width");
  const std::size_t n = values.size();
  const float* v = values.data();
  double* yh = y_hi_.data() + first;
  double* yl = y_lo_.data() + first;
  double* qh = yy_hi_.data() + first;
  double* ql = yy_lo_.data() + first;
  for (std::size_t i = 0; i < n; ++i) {
    const double y = v[i];
    add_compensated(yh[i], yl[i], y);
    add_compensated(qh[i], ql[i], y * y);  // exact: float32 squared fits a double
  }
  if (x != 0) {
    double* xh = xy_hi_.data() + first;
    double* xl = xy_lo_.data() + first;
    for (std::size_t i = 0; i < n; ++i) add_compensated(xh[i], xl[i], static_cast<double>(v[i]));
  }
}

void Accumulators::count_token(std::uint8_t x) {
  ++n_tokens_;
  sum_x_ += x;
  sum_xx_ += static_cast<double>(x) * x;
}

long double Accumulators::sum_y_ext(std::size_t e) const noexcept {
  return static_cast<long double>(y_hi_[e]) + y_lo_[e];
}
long double Accumulators::sum_yy_ext(std::size_t e) const noexcept {
  return static_cast<long double>(yy_hi_[e]) + yy_lo_[e];
}
long double Accumulators::sum_xy_ext(std::size_t e) const noexcept {
  return static_cast<long double>(xy_hi_[e]) + xy_lo_[e];
}

// ---------------------------------------------------------------------------

GlmStatsTable finalize(const Accumulators& acc, const FitConfig& config, std::size_t threads) {
  config.validate();
  const std::uint64_t n_tokens = acc.n_tokens();
  if (n_tokens < 3) {
    throw Error("need at least 3 tokens to fit (df = n - 2 >= 1), got " +
                std::to_string(n_tokens));
  }
  if (acc.sum_x() == 0.0 || acc.sum_x() == static_cast<double>(n_tokens)) {
    throw Error("regressor is constant; nothing to contrast");
  }

  const std::size_t width = acc.size();
  GlmStatsTable table;
  table.n_tokens = n_tokens;
  table.df = n_tokens - 2;
  table.beta0.resize(width);
  table.beta1.resize(width);
  table.t.resize(width);
  table.p.resize(width);

  const long double n = static_cast<long double>(n_tokens);
  const long double sx = acc.sum_x();
  const long double sxx = acc.sum_xx();
  const long double denom = n * sxx - sx * sx;
  const double df = static_cast<double>(table.df);
  const long double min_residual = config.min_residual;
  auto tail = config.sidedness == Sidedness::TwoSided ? &two_sided_p : &upper_tail_p;

  parallel_for(width, resolve_threads(threads), [&](std::size_t first, std::size_t last) {
    for (std::size_t e = first; e < last; ++e) {
      const long double sy = acc.sum_y_ext(e);
      const long double syy = acc.sum_yy_ext(e);
      const long double sxy = acc.sum_xy_ext(e);
      const long double b1 = (n * sxy - sx * sy) / denom;
      const long double b0 = (sy - b1 * sx) / n;
      const long double rss = std::max(0.0L, syy - b0 * sy - b1 * sxy);
      table.beta0[e] = static_cast<double>(b0);
      table.beta1[e] = static_cast<double>(b1);
      if (rss < min_residual) {
        table.t[e] = b1 == 0.0L ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(),
                                                     static_cast<double>(b1));
      } else {
        const long double s2 = rss / (n - 2.0L);
        const long double se = std::sqrt(s2 * n / denom);
        table.t[e] = static_cast<double>(b1 / se);
      }
      table.p[e] = tail(table.t[e], df);
    }
  });
  return table;
}

GlmStatsTable mass_fit(const TraceReader& trace, std::span<const std::uint8_t> x,
                       const FitConfig& config, std::size_t threads) {
  check_design(x, trace.n_tokens());
  const FitConfig resolved = config.resolved(trace.n_elements());
  threads = resolve_threads(threads);
  Accumulators acc(trace.n_elements());
  trace.stream_batches(frames_per_batch(trace.n_elements()),
                       [&](std::uint64_t first, std::uint64_t count, std::span<const float> v) {
                         ingest_batch(acc, v, count, x.subspan(first, count), threads);
                       });
  return finalize(acc, resolved, threads);
}

GlmStatsTable mass_fit(const ActivationTrace& trace, std::span<const std::uint8_t> x,
                       const FitConfig& config, std::size_t threads) {
  const std::uint64_t width = trace.header.n_elements;
  const std::uint64_t tokens = trace.header.n_tokens;
  if (trace.values.size() != width * tokens) {
    throw Error("trace values do not match header dimensions");
  }
  check_design(x, tokens);
  const FitConfig resolved = config.resolved(width);
  threads = resolve_threads(threads);
  Accumulators acc(width);
  const std::uint64_t per_batch = frames_per_batch(width);
  for (std::uint64_t first = 0; first < tokens; first += per_batch) {
    const std::uint64_t count = std::min(per_batch, tokens - first);
    ingest_batch(acc, std::span<const float>(trace.values).subspan(first * width, count * width),
                 count, x.subspan(first, count), threads);
  }
  return finalize(acc, resolved, threads);
}

double bonferroni_threshold(const FitConfig& config) {
  config.validate();
  if (!config.n_comparisons) throw Error("bonferroni_threshold: number of comparisons not set");
  return config.alpha_family / static_cast<double>(*config.n_comparisons);
}

ActiveSet threshold_active(const GlmStatsTable& stats, double per_test_alpha) {
  ActiveSet set;
  for (std::size_t e = 0; e < stats.size(); ++e) {
    if (stats.p[e] < per_test_alpha) set.elements.push_back(e);
  }
  return set;
}

void write_stats_csv(std::ostream& out, const GlmStatsTable& stats) {
  out << "element,beta0,beta1,t,p\n";
  for (std::size_t e = 0; e < stats.size(); ++e) {
    out << e << ',' << format_double(stats.beta0[e]) << ',' << format_double(stats.beta1[e])
        << ',' << format_double(stats.t[e]) << ',' << format_double(stats.p[e]) << '\n';
  }
}

FitSummary summarize_fit(const GlmStatsTable& stats, const FitConfig& resolved_config,
                         std::uint64_t n_active) {
  FitSummary s;
  s.n_elements = stats.size();
  s.n_tokens = stats.n_tokens;
  s.df = stats.df;
  s.alpha_family = resolved_config.alpha_family;
  s.n_comparisons = resolved_config.n_comparisons.value_or(stats.size());
  s.per_test_alpha = s.alpha_family / static_cast<double>(s.n_comparisons);
  s.n_active = n_active;
  s.sidedness = resolved_config.sidedness;
  return s;
}

void save_fit_summary(const std::filesystem::path& path, const FitSummary& s) {
  detail::write_json_file(
      path, detail::Json{{"n_elements", s.n_elements},
                         {"n_tokens", s.n_tokens},
                         {"df", s.df},
                         {"alpha_family", s.alpha_family},
                         {"n_comparisons", s.n_comparisons},
                         {"per_test_alpha", s.per_test_alpha},
                         {"n_active", s.n_active},
                         {"sidedness", s.sidedness == Sidedness::TwoSided ? "two-sided"
                                                                          : "one-sided"}});
}

FitSummary load_fit_summary(const std::filesystem::path& path) {
  const auto json = detail::read_json_file(path);
  FitSummary s;
  s.n_elements = detail::required<std::uint64_t>(json, "n_elements", path);
  s.n_tokens = detail::required<std::uint64_t>(json, "n_tokens", path);
  s.df = detail::required<std::uint64_t>(json, "df", path);
  s.alpha_family = detail::required<double>(json, "alpha_family", path);
  s.n_comparisons = detail::required<std::uint64_t>(json, "n_comparisons", path);
  s.per_test_alpha = detail::required<double>(json, "per_test_alpha", path);
  s.n_active = detail::required<std::uint64_t>(json, "n_active", path);
  s.sidedness = detail::optional_field<std::string>(json, "sidedness", "two-sided", path) ==
                        "one-sided"
                    ? Sidedness::OneSided
                    : Sidedness::TwoSided;
  return s;
}

}  // namespace netscan
