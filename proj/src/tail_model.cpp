#include "tailfit/tail_model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "tailfit/errors.hpp"

namespace tailfit {

namespace {

// Bulk CCDF table extends until the tail mass drops below this.
constexpr double kTableFloor = 1e-7;
constexpr std::size_t kTableCap = 4'000'000;
// Far-tail searches clamp here; for every model with a sane exponent the
// mass beyond is far below the sampler's accuracy contract.
constexpr BinIndex kSearchCap = BinIndex{1} << 40;

}  // namespace

double pmf(const TailModel& model, BinIndex k) {
  return std::visit([k](const auto& m) { return m.pmf(k); }, model);
}

double ccdf(const TailModel& model, BinIndex k) {
  return std::visit([k](const auto& m) { return m.ccdf(k); }, model);
}

BinIndex model_k_min(const TailModel& model) {
  return std::visit([](const auto& m) { return m.k_min(); }, model);
}

double log_likelihood(const TailModel& model, const SizeHistogram& hist) {
  const BinIndex k_min = model_k_min(model);
  double ll = 0.0;
  std::uint64_t n_tail = 0;
  std::visit(
      [&](const auto& m) {
        for (const auto& [k, n] : hist.counts()) {
          if (k < k_min) continue;
          ll += static_cast<double>(n) * std::log(m.pmf(k));
          n_tail += n;
        }
      },
      model);
  if (n_tail == 0)
    throw EmptyTailError("log_likelihood: no mass at or above k_min");
  return ll;
}

TailSampler::TailSampler(const TailModel& model)
    : model_(model), k_min_(model_k_min(model)) {
  BinIndex k_end = kSearchCap;
  if (const auto* me = std::get_if<MaxEntModel>(&model_);
      me && me->finite_support())
    k_end = me->k_max();
  // incremental bulk table: ccdf_table_[i] = ccdf(k_min + i)
  double c = 1.0;
  BinIndex k = k_min_;
  ccdf_table_.reserve(4096);
  while (c > kTableFloor && ccdf_table_.size() < kTableCap && k <= k_end) {
    ccdf_table_.push_back(c);
    c -= pmf(model_, k);
    ++k;
    if (c < 0.0) c = 0.0;
  }
  support_end_ = k_end;
}

BinIndex TailSampler::invert(double u) const {
  if (!(u > 0.0) || u > 1.0)
    throw std::domain_error("TailSampler: u must lie in (0, 1]");
  if (u < ccdf_table_.back()) {
    // table already reached the end of a finite support
    BinIndex last_k = k_min_ + static_cast<BinIndex>(ccdf_table_.size()) - 1;
    if (last_k >= support_end_) return support_end_;
    return search_tail(u);
  }
  // first index with table value < u; prefix is >= u
  auto it = std::partition_point(ccdf_table_.begin(), ccdf_table_.end(),
                                 [u](double cv) { return cv >= u; });
  if (it == ccdf_table_.begin()) return k_min_;  // u == 1 boundary
  return k_min_ + static_cast<BinIndex>(it - ccdf_table_.begin()) - 1;
}

BinIndex TailSampler::search_tail(double u) const {
  // bracket [lo, hi): ccdf(lo) >= u > ccdf(hi), then bisect
  const BinIndex cap = std::min(kSearchCap, support_end_);
  BinIndex lo = k_min_ + static_cast<BinIndex>(ccdf_table_.size()) - 1;
  BinIndex gap = 1;
  BinIndex hi = lo + gap;
  while (hi < cap && ccdf(model_, hi) >= u) {
    lo = hi;
    gap *= 2;
    hi = lo + gap;
  }
  if (hi >= cap) {
    if (ccdf(model_, cap) >= u) return cap;
    hi = cap;
  }
  while (hi - lo > 1) {
    BinIndex mid = lo + (hi - lo) / 2;
    if (ccdf(model_, mid) >= u)
      lo = mid;
    else
      hi = mid;
  }
  return lo;
}

std::vector<BinIndex> sample(const TailModel& model, std::size_t n,
                             std::uint64_t seed) {
  TailSampler sampler(model);
  std::mt19937_64 rng(seed);
  std::vector<BinIndex> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    out.push_back(sampler.invert(uniform_open_closed(rng())));
  return out;
}

}  // namespace tailfit
