#include "tailfit/graphstats.hpp"

#include <zlib.h>

#include <cctype>
#include <cmath>
#include <cstring>
#include <ostream>
#include <stdexcept>

#include "tailfit/errors.hpp"
#include "tailfit/ingestion.hpp"

namespace tailfit {

namespace {

struct Cursor {
  const char* p;
  const char* end;
  bool eof() const { return p >= end; }
  void skip_ws() {
    while (p < end && (*p == ' ' || *p == '\t' || *p == '\r')) ++p;
  }
};

bool parse_plain_string(Cursor& c, std::string& out) {
  if (c.eof() || *c.p != '"') return false;
  ++c.p;
  out.clear();
  while (!c.eof()) {
    char ch = *c.p++;
    if (ch == '"') return true;
    if (ch == '\\') {
      if (c.eof()) return false;
      char esc = *c.p++;
      switch (esc) {
        case '"': out.push_back('"'); break;
        case '\\': out.push_back('\\'); break;
        case '/': out.push_back('/'); break;
        default: return false;  // host names need no other escapes
      }
    } else {
      out.push_back(ch);
    }
  }
  return false;
}

bool parse_uint(Cursor& c, std::uint64_t& out) {
  if (c.eof() || !std::isdigit(static_cast<unsigned char>(*c.p))) return false;
  out = 0;
  while (!c.eof() && std::isdigit(static_cast<unsigned char>(*c.p))) {
    unsigned d = static_cast<unsigned>(*c.p - '0');
    if (out > (UINT64_MAX - d) / 10) return false;
    out = out * 10 + d;
    ++c.p;
  }
  if (!c.eof() && (*c.p == '.' || *c.p == 'e' || *c.p == 'E')) return false;
  return true;
}

}  // namespace

bool parse_host_line(std::string_view line, HostRecord& out) {
  if (line.size() > kMaxManifestLine) return false;
  Cursor c{line.data(), line.data() + line.size()};
  c.skip_ws();
  if (c.eof() || *c.p != '{') return false;
  ++c.p;

  bool have_host = false, have_degree = false, have_files = false;
  std::string key;
  c.skip_ws();
  if (!c.eof() && *c.p == '}') {
    ++c.p;
  } else {
    for (;;) {
      c.skip_ws();
      if (!parse_plain_string(c, key)) return false;
      c.skip_ws();
      if (c.eof() || *c.p != ':') return false;
      ++c.p;
      c.skip_ws();
      if (key == "host") {
        if (!parse_plain_string(c, out.host)) return false;
        have_host = true;
      } else if (key == "in_degree") {
        if (c.eof() || *c.p == '-') return false;
        if (!parse_uint(c, out.in_degree)) return false;
        have_degree = true;
      } else if (key == "file_count") {
        if (c.eof() || *c.p == '-') return false;
        if (!parse_uint(c, out.file_count)) return false;
        have_files = true;
      } else {
        return false;
      }
      c.skip_ws();
      if (c.eof()) return false;
      if (*c.p == ',') {
        ++c.p;
        continue;
      }
      if (*c.p == '}') {
        ++c.p;
        break;
      }
      return false;
    }
  }
  c.skip_ws();
  if (!c.eof()) return false;
  return have_host && have_degree && have_files;
}

std::string host_line(const HostRecord& rec) {
  std::string out = "{\"host\":\"";
  for (char ch : rec.host) {
    if (ch == '"' || ch == '\\') out.push_back('\\');
    out.push_back(ch);
  }
  out += "\",\"in_degree\":";
  out += std::to_string(rec.in_degree);
  out += ",\"file_count\":";
  out += std::to_string(rec.file_count);
  out.push_back('}');
  return out;
}

std::vector<HostRecord> read_host_manifest(const std::string& path,
                                           std::uint64_t* malformed) {
  gzFile file = gzopen(path.c_str(), "rb");
  if (!file) throw std::runtime_error("cannot open host manifest: " + path);
  gzbuffer(file, 1 << 20);

  std::vector<HostRecord> out;
  std::uint64_t bad = 0;
  std::string carry;
  std::vector<char> buf(1 << 20);
  HostRecord rec;
  auto consume = [&](std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) return;
    if (parse_host_line(line, rec))
      out.push_back(rec);
    else
      ++bad;
  };
  for (;;) {
    int n = gzread(file, buf.data(), static_cast<unsigned>(buf.size()));
    if (n < 0) {
      gzclose(file);
      throw std::runtime_error("gzip read error in host manifest: " + path);
    }
    if (n == 0) break;
    const char* p = buf.data();
    const char* end = p + n;
    while (p < end) {
      const char* nl = static_cast<const char*>(
          std::memchr(p, '\n', static_cast<std::size_t>(end - p)));
      if (!nl) {
        carry.append(p, end);
        break;
      }
      if (carry.empty()) {
        consume(std::string_view(p, static_cast<std::size_t>(nl - p)));
      } else {
        carry.append(p, nl);
        consume(carry);
        carry.clear();
      }
      p = nl + 1;
    }
  }
  if (!carry.empty()) consume(carry);
  gzclose(file);
  if (malformed) *malformed = bad;
  return out;
}

void IndegreeStats::add(const HostRecord& rec) {
  ++hosts;
  if (rec.in_degree == 0)
    ++zero_degree;
  else
    histogram.add(static_cast<BinIndex>(rec.in_degree));
}

void IndegreeStats::merge(const IndegreeStats& other) {
  histogram.merge(other.histogram);
  zero_degree += other.zero_degree;
  hosts += other.hosts;
}

IndegreeStats indegree_histogram(const std::vector<HostRecord>& hosts) {
  IndegreeStats stats;
  for (const auto& h : hosts) stats.add(h);
  return stats;
}

FitResult fit_indegree_slope(const IndegreeStats& stats,
                             const std::vector<BinIndex>& grid) {
  if (stats.histogram.total() < 100)
    throw EmptyTailError(
        "fit_indegree_slope: need at least 100 hosts with in-degree >= 1");
  return scan_kmin(stats.histogram, Family::powerlaw, grid);
}

JointHistogram::JointHistogram(double log_base) : log_base_(log_base) {
  if (!(log_base > 1.0))
    throw std::domain_error("JointHistogram: log_base must exceed 1");
}

std::size_t JointHistogram::bin_of(std::uint64_t value, double log_base) {
  if (value == 0) return 0;
  auto bin = static_cast<std::size_t>(
      std::floor(std::log(static_cast<double>(value)) / std::log(log_base)));
  return bin + 1;
}

void JointHistogram::add(const HostRecord& rec) {
  std::size_t db = bin_of(rec.in_degree, log_base_);
  std::size_t fb = bin_of(rec.file_count, log_base_);
  if (cells_.size() <= db) cells_.resize(db + 1);
  if (cells_[db].size() <= fb) cells_[db].resize(fb + 1, 0);
  ++cells_[db][fb];
  ++total_;
}

void JointHistogram::merge(const JointHistogram& other) {
  if (other.log_base_ != log_base_)
    throw std::domain_error("JointHistogram: merging different log bases");
  for (std::size_t db = 0; db < other.cells_.size(); ++db) {
    if (cells_.size() <= db) cells_.resize(db + 1);
    const auto& row = other.cells_[db];
    if (cells_[db].size() < row.size()) cells_[db].resize(row.size(), 0);
    for (std::size_t fb = 0; fb < row.size(); ++fb) cells_[db][fb] += row[fb];
  }
  total_ += other.total_;
}

std::size_t JointHistogram::degree_bins() const { return cells_.size(); }

std::size_t JointHistogram::file_bins() const {
  std::size_t m = 0;
  for (const auto& row : cells_) m = std::max(m, row.size());
  return m;
}

std::uint64_t JointHistogram::cell(std::size_t degree_bin,
                                   std::size_t file_bin) const {
  if (degree_bin >= cells_.size() || file_bin >= cells_[degree_bin].size())
    return 0;
  return cells_[degree_bin][file_bin];
}

double JointHistogram::bin_lower_edge(std::size_t bin) const {
  if (bin == 0) return 0.0;
  return std::pow(log_base_, static_cast<double>(bin - 1));
}

void JointHistogram::write_csv(std::ostream& out) const {
  const std::size_t fb = file_bins();
  out << "in_degree_edge";
  for (std::size_t j = 0; j < fb; ++j) out << ',' << bin_lower_edge(j);
  out << '\n';
  for (std::size_t i = 0; i < cells_.size(); ++i) {
    out << bin_lower_edge(i);
    for (std::size_t j = 0; j < fb; ++j) out << ',' << cell(i, j);
    out << '\n';
  }
}

}  // namespace tailfit
