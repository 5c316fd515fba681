#pragma once

// Student-t tail probabilities through the regularized incomplete beta
// function. All functions are pure and reentrant.

namespace netscan {

// I_x(a, b) for 0 <= x <= 1 and a, b > 0, by continued fraction (modified
// Lentz). Throws Error on domain violations or non-convergence.
double reg_inc_beta(double x, double a, double b);

// P(|T| >= |t|) for T ~ Student-t with nu degrees of freedom (nu >= 1).
double two_sided_p(double t, double nu);

// P(T >= t): small for large positive t.
double upper_tail_p(double t, double nu);

}  // namespace netscan
