#include "hetscan/probit.hpp"

#include <cmath>
#include <numbers>

namespace hetscan::probit {

namespace {

constexpr double kTailSwitch = -10.0;

// Phi(-x) / phi(x) for x >= 10 by the Laplace continued fraction.
double mills_ratio(double x) {
  double t = x;
  for (int k = 60; k >= 1; --k) t = x + k / t;
  return 1.0 / t;
}

}  // namespace

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double log_cdf(double z) {
  if (z >= kTailSwitch) return std::log(normal_cdf(z));
  return -0.5 * z * z - 0.5 * std::log(2.0 * std::numbers::pi) + std::log(mills_ratio(-z));
}

double pdf_over_cdf(double z) {
  if (z >= kTailSwitch) return normal_pdf(z) / normal_cdf(z);
  return 1.0 / mills_ratio(-z);
}

LikelihoodTerms likelihood_terms(double y, double f) {
  const double z = y * f;
  const double r = pdf_over_cdf(z);
  LikelihoodTerms t;
  t.log_lik = log_cdf(z);
  t.d1 = y * r;
  t.d2 = -r * r - z * r;
  t.d3 = y * (3.0 * z * r * r + 2.0 * r * r * r + z * z * r - r);
  return t;
}

}  // namespace hetscan::probit
