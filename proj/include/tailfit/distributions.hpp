#pragma once

#include "tailfit/histogram.hpp"

namespace tailfit {

// Unnormalized tail sums. Each returns sum_{j>=k} w(j) with relative error
// <= 1e-10: direct (compensated) summation up to a crossover index, then a
// Euler-Maclaurin closed-form tail.
double powerlaw_tail_sum(double alpha, BinIndex k);
double lognormal_tail_sum(double mu, double sigma, BinIndex k);

// Z = sum_{k=k_min}^inf k^-alpha. Throws std::domain_error for alpha <= 1
// (divergent series) or non-finite inputs.
double powerlaw_normalizer(double alpha, BinIndex k_min);

// Z = sum_{k=k_min}^inf (1/k) exp(-(ln k - mu)^2 / (2 sigma^2)).
// Throws std::domain_error for sigma <= 0 or non-finite inputs.
double lognormal_normalizer(double mu, double sigma, BinIndex k_min);

// Discrete power law p(k) = k^-alpha / Z on k >= k_min.
// alpha is restricted to (1, 6]: below 1 the normalizer diverges, above 6
// the distribution is indistinguishable from its first few bins at the
// data scales this toolkit targets.
class PowerLawModel {
 public:
  static constexpr double kAlphaMin = 1.0;
  static constexpr double kAlphaMax = 6.0;

  PowerLawModel(double alpha, BinIndex k_min);

  double alpha() const { return alpha_; }
  BinIndex k_min() const { return k_min_; }
  double normalizer() const { return z_; }

  double log_weight(BinIndex k) const;
  double pmf(BinIndex k) const;
  double ccdf(BinIndex k) const;

 private:
  double alpha_;
  BinIndex k_min_;
  double z_;
};

// Discrete log-normal p(k) = (1/k) exp(-(ln k - mu)^2/(2 sigma^2)) / Z on
// k >= k_min. mu is on the natural-log scale of the 1 KB bin index.
class LogNormalModel {
 public:
  LogNormalModel(double mu, double sigma, BinIndex k_min);

  double mu() const { return mu_; }
  double sigma() const { return sigma_; }
  BinIndex k_min() const { return k_min_; }
  double normalizer() const { return z_; }

  double log_weight(BinIndex k) const;
  double pmf(BinIndex k) const;
  double ccdf(BinIndex k) const;

 private:
  double mu_;
  double sigma_;
  BinIndex k_min_;
  double z_;
};

// Shifted geometric p(k) = (1 - e^-lambda) e^-lambda(k - k_min) on
// k >= k_min. Normalizer is closed form, the pmf sums to 1 exactly.
class ExponentialModel {
 public:
  ExponentialModel(double lambda, BinIndex k_min);

  double lambda() const { return lambda_; }
  BinIndex k_min() const { return k_min_; }

  double log_weight(BinIndex k) const;
  double pmf(BinIndex k) const;
  double ccdf(BinIndex k) const;

 private:
  double lambda_;
  BinIndex k_min_;
};

}  // namespace tailfit
