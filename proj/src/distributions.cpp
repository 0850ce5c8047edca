#include "tailfit/distributions.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace tailfit {
namespace {

constexpr double kPi = 3.14159265358979323846;

struct KahanSum {
  double sum = 0.0;
  double c = 0.0;
  void add(double x) {
    double y = x - c;
    double t = sum + y;
    c = (t - sum) - y;
    sum = t;
  }
};

void require_finite(double x, const char* name) {
  if (!std::isfinite(x))
    throw std::domain_error(std::string(name) + " must be finite");
}

void require_kmin(BinIndex k_min) {
  if (k_min < 1) throw std::domain_error("k_min must be >= 1");
}

// Smallest N >= 1024 at which the log-normal summand varies slowly enough
// (|d log w / dx| <= 1e-3) for the Euler-Maclaurin tail to hold its error
// bound.
BinIndex lognormal_crossover(double mu, double sigma) {
  double s2 = sigma * sigma;
  BinIndex n = 1024;
  while ((1.0 + std::fabs(std::log(static_cast<double>(n)) - mu) / s2) >
         1e-3 * static_cast<double>(n))
    n *= 2;
  return n;
}

}  // namespace

double powerlaw_tail_sum(double alpha, BinIndex k) {
  // Direct sum to N-1, then Euler-Maclaurin:
  //   sum_{j>=N} j^-a = N^(1-a)/(a-1) + N^-a/2 + a N^-(a+1)/12
  //                     - a(a+1)(a+2) N^-(a+3)/720 + ...
  const BinIndex crossover = 256;
  const BinIndex n = std::max(k, crossover);
  KahanSum s;
  for (BinIndex j = k; j < n; ++j)
    s.add(std::pow(static_cast<double>(j), -alpha));
  const double nd = static_cast<double>(n);
  const double f = std::pow(nd, -alpha);
  s.add(nd * f / (alpha - 1.0));
  s.add(0.5 * f);
  s.add(alpha * f / (12.0 * nd));
  s.add(-alpha * (alpha + 1.0) * (alpha + 2.0) * f / (720.0 * nd * nd * nd));
  return s.sum;
}

double lognormal_tail_sum(double mu, double sigma, BinIndex k) {
  const double s2 = sigma * sigma;
  const BinIndex n = std::max(k, lognormal_crossover(mu, sigma));
  KahanSum s;
  for (BinIndex j = k; j < n; ++j) {
    double lj = std::log(static_cast<double>(j));
    s.add(std::exp(-(lj - mu) * (lj - mu) / (2.0 * s2)) /
          static_cast<double>(j));
  }
  // Euler-Maclaurin at N for w(x) = exp(h(ln x)), h(u) = -(u-mu)^2/(2 s2) - u.
  const double nd = static_cast<double>(n);
  const double u = std::log(nd);
  const double hp = -(u - mu) / s2 - 1.0;
  const double hpp = -1.0 / s2;
  const double w = std::exp(-(u - mu) * (u - mu) / (2.0 * s2)) / nd;
  const double integral =
      sigma * std::sqrt(kPi / 2.0) * std::erfc((u - mu) / (sigma * M_SQRT2));
  const double wp = w * hp / nd;
  const double a = hp * hp + hpp - hp;
  const double wppp = w * (hp * a + 2.0 * hp * hpp - hpp - 2.0 * a) / (nd * nd * nd);
  s.add(integral);
  s.add(0.5 * w);
  s.add(-wp / 12.0);
  s.add(wppp / 720.0);
  return s.sum;
}

double powerlaw_normalizer(double alpha, BinIndex k_min) {
  require_finite(alpha, "alpha");
  require_kmin(k_min);
  if (alpha <= 1.0)
    throw std::domain_error("powerlaw_normalizer: series diverges for alpha <= 1");
  return powerlaw_tail_sum(alpha, k_min);
}

double lognormal_normalizer(double mu, double sigma, BinIndex k_min) {
  require_finite(mu, "mu");
  require_finite(sigma, "sigma");
  require_kmin(k_min);
  if (sigma <= 0.0)
    throw std::domain_error("lognormal_normalizer: sigma must be > 0");
  return lognormal_tail_sum(mu, sigma, k_min);
}

PowerLawModel::PowerLawModel(double alpha, BinIndex k_min)
    : alpha_(alpha), k_min_(k_min) {
  require_finite(alpha, "alpha");
  require_kmin(k_min);
  if (alpha <= kAlphaMin || alpha > kAlphaMax)
    throw std::domain_error("PowerLawModel: alpha must lie in (1, 6]");
  z_ = powerlaw_tail_sum(alpha_, k_min_);
}

double PowerLawModel::log_weight(BinIndex k) const {
  return -alpha_ * std::log(static_cast<double>(k));
}

double PowerLawModel::pmf(BinIndex k) const {
  if (k < k_min_) throw std::domain_error("pmf: k < k_min");
  return std::pow(static_cast<double>(k), -alpha_) / z_;
}

double PowerLawModel::ccdf(BinIndex k) const {
  if (k < k_min_) throw std::domain_error("ccdf: k < k_min");
  if (k == k_min_) return 1.0;
  return powerlaw_tail_sum(alpha_, k) / z_;
}

LogNormalModel::LogNormalModel(double mu, double sigma, BinIndex k_min)
    : mu_(mu), sigma_(sigma), k_min_(k_min) {
  require_finite(mu, "mu");
  require_finite(sigma, "sigma");
  require_kmin(k_min);
  if (sigma <= 0.0) throw std::domain_error("LogNormalModel: sigma must be > 0");
  z_ = lognormal_tail_sum(mu_, sigma_, k_min_);
}

double LogNormalModel::log_weight(BinIndex k) const {
  double lk = std::log(static_cast<double>(k));
  return -lk - (lk - mu_) * (lk - mu_) / (2.0 * sigma_ * sigma_);
}

double LogNormalModel::pmf(BinIndex k) const {
  if (k < k_min_) throw std::domain_error("pmf: k < k_min");
  return std::exp(log_weight(k)) / z_;
}

double LogNormalModel::ccdf(BinIndex k) const {
  if (k < k_min_) throw std::domain_error("ccdf: k < k_min");
  if (k == k_min_) return 1.0;
  return lognormal_tail_sum(mu_, sigma_, k) / z_;
}

ExponentialModel::ExponentialModel(double lambda, BinIndex k_min)
    : lambda_(lambda), k_min_(k_min) {
  require_finite(lambda, "lambda");
  require_kmin(k_min);
  if (lambda <= 0.0)
    throw std::domain_error("ExponentialModel: lambda must be > 0");
}

double ExponentialModel::log_weight(BinIndex k) const {
  return -lambda_ * static_cast<double>(k - k_min_);
}

double ExponentialModel::pmf(BinIndex k) const {
  if (k < k_min_) throw std::domain_error("pmf: k < k_min");
  return -std::expm1(-lambda_) * std::exp(log_weight(k));
}

double ExponentialModel::ccdf(BinIndex k) const {
  if (k < k_min_) throw std::domain_error("ccdf: k < k_min");
  return std::exp(-lambda_ * static_cast<double>(k - k_min_));
}

}  // namespace tailfit
