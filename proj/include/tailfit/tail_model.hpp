#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "tailfit/distributions.hpp"
#include "tailfit/histogram.hpp"
#include "tailfit/maxent.hpp"

namespace tailfit {

// Any of the fitted/synthesized tail models. Immutable after construction;
// all operations are pure.
using TailModel =
    std::variant<PowerLawModel, LogNormalModel, ExponentialModel, MaxEntModel>;

double pmf(const TailModel& model, BinIndex k);
double ccdf(const TailModel& model, BinIndex k);
BinIndex model_k_min(const TailModel& model);

// sum_{k >= k_min} n_k ln pmf(k) over bins at or above the model's k_min.
// Throws EmptyTailError when the histogram has no mass there.
double log_likelihood(const TailModel& model, const SizeHistogram& hist);

// n i.i.d. draws by inverse-CCDF search: the bulk through a precomputed
// monotone CCDF table, the far tail through bracketed binary search on the
// analytic CCDF. Deterministic for a given seed.
std::vector<BinIndex> sample(const TailModel& model, std::size_t n,
                             std::uint64_t seed);

// Inverse-CCDF sampler shared by sample() and the corpus synthesizer.
class TailSampler {
 public:
  explicit TailSampler(const TailModel& model);
  // Largest k with ccdf(k) >= u, for u in (0, 1].
  BinIndex invert(double u) const;

 private:
  TailModel model_;
  BinIndex k_min_;
  BinIndex support_end_ = 0;
  std::vector<double> ccdf_table_;  // descending, ccdf_table_[i] = ccdf(k_min + i)
  BinIndex search_tail(double u) const;
};

// Fixed 53-bit uniform in (0, 1] from a raw 64-bit word; keeps sampling
// independent of the standard library's distribution implementations.
inline double uniform_open_closed(std::uint64_t word) {
  return (static_cast<double>(word >> 11) + 1.0) * 0x1.0p-53;
}

}  // namespace tailfit
