#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "tailfit/fitting.hpp"
#include "tailfit/histogram.hpp"

namespace tailfit {

struct HostRecord {
  std::string host;
  std::uint64_t in_degree = 0;
  std::uint64_t file_count = 0;
};

// Parses one host-manifest record: a flat JSON object with required keys
// host (string), in_degree and file_count (integers >= 0). Returns false
// for malformed lines.
bool parse_host_line(std::string_view line, HostRecord& out);

// Serializes a record to the host-manifest line format (no trailing
// newline). parse_host_line round-trips this byte-exactly.
std::string host_line(const HostRecord& rec);

// Reads a host manifest, plain or gzip. Malformed lines are skipped and
// counted into malformed when provided.
std::vector<HostRecord> read_host_manifest(const std::string& path,
                                           std::uint64_t* malformed = nullptr);

struct IndegreeStats {
  SizeHistogram histogram;        // hosts per in-degree, degree >= 1 only
  std::uint64_t zero_degree = 0;  // tallied apart, excluded from fits
  std::uint64_t hosts = 0;

  void add(const HostRecord& rec);
  void merge(const IndegreeStats& other);
};

IndegreeStats indegree_histogram(const std::vector<HostRecord>& hosts);

// Power-law fit of the positive-degree histogram over the candidate grid;
// the log-log slope is -alpha. Requires at least 100 positive-degree hosts.
FitResult fit_indegree_slope(const IndegreeStats& stats,
                             const std::vector<BinIndex>& grid);

inline double indegree_slope(const FitResult& fit) {
  return -std::get<PowerLawModel>(fit.model).alpha();
}

// Logarithmically binned (in-degree, file-count) host-count matrix.
// bin(v) = floor(log_base v) + 1 for v >= 1; zeros land in bin 0.
class JointHistogram {
 public:
  explicit JointHistogram(double log_base = 2.0);

  void add(const HostRecord& rec);
  void merge(const JointHistogram& other);

  double log_base() const { return log_base_; }
  std::uint64_t total() const { return total_; }
  std::size_t degree_bins() const;
  std::size_t file_bins() const;
  std::uint64_t cell(std::size_t degree_bin, std::size_t file_bin) const;
  // Smallest value mapping to the bin: 0 for bin 0, base^(bin-1) otherwise.
  double bin_lower_edge(std::size_t bin) const;

  // Matrix CSV with a header row/column of bin lower edges; rows are
  // in-degree bins.
  void write_csv(std::ostream& out) const;

  static std::size_t bin_of(std::uint64_t value, double log_base);

 private:
  double log_base_;
  std::vector<std::vector<std::uint64_t>> cells_;  // [degree_bin][file_bin]
  std::uint64_t total_ = 0;
};

}  // namespace tailfit
