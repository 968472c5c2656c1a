#pragma once

namespace hetscan::probit {

double normal_pdf(double z);
double normal_cdf(double z);

/// log Phi(z), accurate deep in the lower tail.
double log_cdf(double z);

/// phi(z) / Phi(z) (inverse Mills ratio), accurate deep in the lower tail.
double pdf_over_cdf(double z);

/// Derivatives of log Phi(y f) in f for a label y in {-1, +1}.
struct LikelihoodTerms {
  double log_lik;
  double d1;
  double d2;
  double d3;
};

LikelihoodTerms likelihood_terms(double y, double f);

}  // namespace hetscan::probit
