#include "tailfit/histogram.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace tailfit {

void SizeHistogram::add(BinIndex k, std::uint64_t n) {
  if (k < 1) throw std::domain_error("SizeHistogram: bin index must be >= 1");
  if (n == 0) return;
  counts_[k] += n;
  total_ += n;
  if (k > k_max_) k_max_ = k;
}

void SizeHistogram::merge(const SizeHistogram& other) {
  for (const auto& [k, n] : other.counts_) add(k, n);
}

std::uint64_t SizeHistogram::count_at(BinIndex k) const {
  auto it = counts_.find(k);
  return it == counts_.end() ? 0 : it->second;
}

std::vector<std::pair<BinIndex, std::uint64_t>> SizeHistogram::sorted_bins()
    const {
  std::vector<std::pair<BinIndex, std::uint64_t>> out(counts_.begin(),
                                                      counts_.end());
  std::sort(out.begin(), out.end());
  return out;
}

std::uint64_t SizeHistogram::tail_count(BinIndex k) const {
  std::uint64_t n = 0;
  for (const auto& [bin, c] : counts_)
    if (bin >= k) n += c;
  return n;
}

void SizeHistogram::write_csv(std::ostream& out) const {
  out << "k,count\n";
  for (const auto& [k, n] : sorted_bins()) out << k << ',' << n << '\n';
}

SizeHistogram SizeHistogram::read_csv(std::istream& in) {
  SizeHistogram h;
  std::string line;
  if (!std::getline(in, line) || line.rfind("k,count", 0) != 0)
    throw std::runtime_error("histogram CSV: missing 'k,count' header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto comma = line.find(',');
    if (comma == std::string::npos)
      throw std::runtime_error("histogram CSV: malformed row: " + line);
    BinIndex k = std::stoll(line.substr(0, comma));
    std::uint64_t n = std::stoull(line.substr(comma + 1));
    h.add(k, n);
  }
  return h;
}

}  // namespace tailfit
