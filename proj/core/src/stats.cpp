#include "netscan/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "netscan/error.hpp"

namespace netscan {

namespace {

constexpr int kMaxIterations = 300;
constexpr long double kTolerance = 1e-15L;
constexpr long double kTiny = 1e-300L;

// Extended precision throughout: for large a, b the log prefactor is a sum of
// terms in the thousands, and double rounding there alone costs ~1e-12.
long double log_gamma(long double v) {
  int sign = 0;
  return ::lgammal_r(v, &sign);
}

// Continued fraction for I_x(a,b) / (x^a (1-x)^b / (a B(a,b))).
long double beta_continued_fraction(long double x, long double a, long double b) {
  const long double qab = a + b;
  const long double qap = a + 1.0L;
  const long double qam = a - 1.0L;
  long double c = 1.0L;
  long double d = 1.0L - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0L / d;
  long double h = d;
  for (int m = 1; m <= kMaxIterations; ++m) {
    const long double m2 = 2.0L * m;
    long double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0L + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0L + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0L / d;
    h *= d * c;

    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0L + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0L + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0L / d;
    const long double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0L) < kTolerance) return h;
  }
  std::ostringstream msg;
  msg << "incomplete beta continued fraction did not converge (x=" << static_cast<double>(x)
      << ", a=" << static_cast<double>(a) << ", b=" << static_cast<double>(b) << ")";
  throw Error(msg.str());
}

// x and y = 1 - x are passed separately so callers that know y exactly
// (t-distribution tails) avoid the cancellation in 1 - x.
double reg_inc_beta_xy(long double x, long double y, long double a, long double b) {
  if (x <= 0.0L) return 0.0;
  if (y <= 0.0L) return 1.0;
  const long double log_front =
      a * std::log(x) + b * std::log(y) + log_gamma(a + b) - log_gamma(a) - log_gamma(b);
  const long double front = std::exp(log_front);
  if (x < (a + 1.0L) / (a + b + 2.0L)) {
    return static_cast<double>(front * beta_continued_fraction(x, a, b) / a);
  }
  return static_cast<double>(1.0L - front * beta_continued_fraction(y, b, a) / b);
}

}  // namespace

double reg_inc_beta(double x, double a, double b) {
  if (!(x >= 0.0 && x <= 1.0)) throw Error("reg_inc_beta: x must lie in [0, 1]");
  if (!(a > 0.0) || !(b > 0.0)) throw Error("reg_inc_beta: a and b must be positive");
  if (!std::isfinite(a) || !std::isfinite(b)) throw Error("reg_inc_beta: a and b must be finite");
  return reg_inc_beta_xy(x, 1.0L - x, a, b);
}

double two_sided_p(double t, double nu) {
  if (!(nu >= 1.0)) throw Error("two_sided_p: degrees of freedom must be >= 1");
  if (std::isnan(t)) throw Error("two_sided_p: t is NaN");
  if (std::isinf(t)) return 0.0;
  if (t == 0.0) return 1.0;
  const long double t2 = static_cast<long double>(t) * t;
  const long double denom = nu + t2;
  const double p = reg_inc_beta_xy(nu / denom, t2 / denom, 0.5L * nu, 0.5L);
  return std::clamp(p, 0.0, 1.0);
}

double upper_tail_p(double t, double nu) {
  const double half = 0.5 * two_sided_p(t, nu);
  return t >= 0.0 ? half : 1.0 - half;
}

}  // namespace netscan
