#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tailfit/tail_model.hpp"

namespace tailfit {

enum class Family { powerlaw, lognormal, exponential };

const char* family_name(Family f);
std::optional<Family> family_from_name(const std::string& name);

// Minimum number of tail counts required before fitting at a candidate
// k_min; prevents vacuous fits on sparse tails.
constexpr std::uint64_t kDefaultMinTailCount = 100;

// Drops every bin whose lower edge exceeds cap_bytes (default 10 GB);
// idempotent.
SizeHistogram truncate(const SizeHistogram& hist,
                       std::uint64_t cap_bytes = 10ull * (1ull << 30));

struct PowerLawAlphaFit {
  double alpha = 0.0;
  bool at_boundary = false;  // maximum found at the (1, 6] domain edge
};

// MLE of alpha over (1, 6] at fixed k_min, by bracketed scalar
// maximization of the tail log-likelihood (unimodal in alpha) to
// |delta alpha| < 1e-6.
PowerLawAlphaFit fit_powerlaw_alpha(const SizeHistogram& hist, BinIndex k_min,
                                    std::uint64_t min_tail = kDefaultMinTailCount);

struct LogNormalParams {
  double mu = 0.0;
  double sigma = 0.0;
};

// MLE of (mu, sigma) at fixed k_min by Nelder-Mead simplex with restarts,
// initialized at the tail's weighted mean/sd of ln k.
LogNormalParams fit_lognormal(const SizeHistogram& hist, BinIndex k_min,
                              std::uint64_t min_tail = kDefaultMinTailCount);

// Closed-form MLE of the shifted-geometric rate from the tail mean.
double fit_exponential(const SizeHistogram& hist, BinIndex k_min,
                       std::uint64_t min_tail = kDefaultMinTailCount);

// Residual sum of squares between the empirical complementary cumulative
// distribution (renormalized over k >= model k_min) and the model CCDF,
// summed over every integer bin in [k_min, k_max_observed].
double rss(const SizeHistogram& hist, const TailModel& model);

// points log-spaced integers in [lo, hi], deduplicated, ascending.
std::vector<BinIndex> log_spaced_grid(BinIndex lo, BinIndex hi, int points);

// The default scan grid: 256 log-spaced bins spanning 1 KB .. 100 MB.
std::vector<BinIndex> default_kmin_grid();

struct FitResult {
  TailModel model;
  BinIndex k_min = 1;
  double rss = 0.0;
  double tail_fraction = 0.0;  // share of total mass at k >= k_min
  double log_likelihood = 0.0;
  bool at_boundary = false;
};

// Two-step procedure: per-candidate MLE followed by k_min selection at
// minimal rss, ties broken toward the smaller k_min. Candidates are
// evaluated concurrently (TAILFIT_THREADS workers) and merged
// deterministically.
FitResult scan_kmin(const SizeHistogram& hist, Family family,
                    const std::vector<BinIndex>& grid,
                    std::uint64_t min_tail = kDefaultMinTailCount);

struct ComparisonReport {
  std::optional<FitResult> powerlaw;
  std::optional<FitResult> lognormal;
  std::optional<FitResult> exponential;
  std::string powerlaw_error;
  std::string lognormal_error;
  std::string exponential_error;
  std::string selected_family;  // empty when every family failed
  double rss_ratio = 1.0;       // min rss / second-smallest rss

  const std::optional<FitResult>& result(Family f) const;
};

ComparisonReport compare_models(const SizeHistogram& hist,
                                const std::vector<BinIndex>& grid,
                                std::uint64_t min_tail = kDefaultMinTailCount);

// Machine-readable report (JSON, fixed key order so output is
// byte-deterministic).
std::string comparison_report_json(const ComparisonReport& report);

// Two-column CSVs "k,ccdf" evaluated at the occupied bins >= k_min.
void write_empirical_ccdf_csv(std::ostream& out, const SizeHistogram& hist,
                              BinIndex k_min);
void write_model_ccdf_csv(std::ostream& out, const TailModel& model,
                          const SizeHistogram& hist);

// Worker count used for candidate-parallel scans: TAILFIT_THREADS when set,
// else hardware concurrency.
unsigned worker_count();

}  // namespace tailfit
