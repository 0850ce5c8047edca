#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace tailfit {

// 1 KB bin index. Bin k covers byte sizes [(k-1)*1024, k*1024), so sub-KB
// files land in k = 1 and k >= 1 always.
using BinIndex = std::int64_t;

inline BinIndex bin_of_size(std::uint64_t size_bytes) {
  return static_cast<BinIndex>(size_bytes / 1024) + 1;
}

// Counts per 1 KB bin. Memory is proportional to the number of occupied
// bins, not to the number of samples.
class SizeHistogram {
 public:
  void add(BinIndex k, std::uint64_t n = 1);
  void merge(const SizeHistogram& other);

  std::uint64_t count_at(BinIndex k) const;
  std::uint64_t total() const { return total_; }
  BinIndex k_max_observed() const { return k_max_; }
  bool empty() const { return total_ == 0; }
  std::size_t occupied_bins() const { return counts_.size(); }

  const std::unordered_map<BinIndex, std::uint64_t>& counts() const {
    return counts_;
  }

  // (k, count) pairs sorted by k ascending.
  std::vector<std::pair<BinIndex, std::uint64_t>> sorted_bins() const;

  // Number of samples with bin >= k.
  std::uint64_t tail_count(BinIndex k) const;

  // CSV with header "k,count", rows sorted by k.
  void write_csv(std::ostream& out) const;
  static SizeHistogram read_csv(std::istream& in);

 private:
  std::unordered_map<BinIndex, std::uint64_t> counts_;
  std::uint64_t total_ = 0;
  BinIndex k_max_ = 0;
};

}  // namespace tailfit
