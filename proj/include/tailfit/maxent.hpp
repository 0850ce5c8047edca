#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "tailfit/distributions.hpp"
#include "tailfit/ingestion.hpp"

namespace tailfit {

// Maximal-entropy pmf family with linear, log and log^2 cost terms:
//   p(k) = (1/Z) exp(-lambda_s k - lambda_1 ln k - lambda_2 ln^2 k)
// on k in [k_min, k_max], k_max = 0 meaning infinite support. For infinite
// support the multipliers must satisfy one of
//   lambda_s > 0,
//   lambda_s = 0 and lambda_2 > 0,
//   lambda_s = lambda_2 = 0 and lambda_1 > 1,
// otherwise the normalizer diverges.
class MaxEntModel {
 public:
  static constexpr BinIndex kInfiniteSupport = 0;

  MaxEntModel(double lambda_s, double lambda_1, double lambda_2,
              BinIndex k_min, BinIndex k_max = kInfiniteSupport);

  double lambda_s() const { return ls_; }
  double lambda_1() const { return l1_; }
  double lambda_2() const { return l2_; }
  BinIndex k_min() const { return k_min_; }
  BinIndex k_max() const { return k_max_; }  // 0 = infinite
  bool finite_support() const { return k_max_ != kInfiniteSupport; }
  double normalizer() const { return z_; }   // of exp(log_weight - shift)
  double shift() const { return shift_; }

  double log_weight(BinIndex k) const;  // without the shift
  double pmf(BinIndex k) const;
  double ccdf(BinIndex k) const;

 private:
  double ls_, l1_, l2_;
  BinIndex k_min_, k_max_;
  double shift_;  // max log-weight over support, keeps exp() in range
  double z_;

  double tail_sum_shifted(BinIndex k) const;
  friend double maxent_tail_sum_shifted(const MaxEntModel&, BinIndex);
};

// Shannon entropy -sum p ln p in nats, with 0 ln 0 := 0. Throws
// std::domain_error unless the input sums to 1 within 1e-9.
double shannon_entropy(std::span<const double> p);

// Target moments for the dual solver; inactive constraints are left
// disengaged (std::nullopt).
struct MomentTargets {
  std::optional<double> e_s;     // target E[k]
  std::optional<double> e_log;   // target E[ln k]
  std::optional<double> e_log2;  // target E[ln^2 k]
};

// Recovers Lagrange multipliers from target moments on a finite support
// [k_min, k_max] (at most 10^7 bins) by Newton iteration on the convex dual
// ln Z + sum lambda_i t_i. Throws FeasibilityError when a target lies
// outside the support's moment range, ConvergenceError after 200 iterations.
MaxEntModel solve_lagrange(const MomentTargets& targets, BinIndex k_min,
                           BinIndex k_max);

struct StationarityReport {
  std::size_t trials = 0;
  // max over trials of |first-order entropy change| / ||perturbation||
  double max_first_order = 0.0;
  // max over trials of the second-order change (should be <= 0)
  double max_second_order = 0.0;
};

// Verifies that the model's entropy is stationary under perturbations in
// the null space of the constraint Jacobian (normalization plus active
// moments). Finite support only. Active constraints default to those with
// a nonzero multiplier; pass explicit flags to override (the negative
// control perturbs a multiplier while keeping the original constraint set).
StationarityReport verify_stationarity(const MaxEntModel& model,
                                       std::size_t trials, std::uint64_t seed,
                                       std::optional<std::array<bool, 3>>
                                           active = std::nullopt);

// Emits n synthetic FileRecords with sizes drawn from the model
// (size_bytes = (k-1)*1024 + uniform offset in [0,1023]), deterministic per
// seed, mime chosen to match the category.
void synthesize_corpus(const MaxEntModel& model, std::size_t n,
                       std::uint64_t seed, const std::string& category,
                       const std::function<void(const FileRecord&)>& emit);

std::vector<FileRecord> synthesize_corpus(const MaxEntModel& model,
                                          std::size_t n, std::uint64_t seed,
                                          const std::string& category);

}  // namespace tailfit
