#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "tailfit/histogram.hpp"

namespace tailfit {

// One file's metadata. mime is "type/subtype" or the sentinel
// "unknown/unknown".
struct FileRecord {
  std::string host;
  std::string path;
  std::string mime;
  std::uint64_t size_bytes = 0;
};

// Manifest lines longer than this are rejected as malformed.
constexpr std::size_t kMaxManifestLine = 64 * 1024;

// Parses one line-delimited manifest record: a flat JSON object with
// required keys host, path, mime (strings) and size_bytes (integer >= 0).
// Returns false for malformed lines.
bool parse_manifest_line(std::string_view line, FileRecord& out);

// Serializes a record to the exact manifest line format (no trailing
// newline). parse_manifest_line round-trips this byte-exactly.
std::string manifest_line(const FileRecord& rec);

// MIME top-level category when it is one of {application, audio, image,
// text, video}; otherwise an extension-table fallback on the path suffix;
// otherwise "other". Total and deterministic.
std::string classify(const FileRecord& rec);

// Version tag of the bundled extension -> MIME table.
extern const char* const kExtensionTableVersion;

struct ParseStats {
  std::uint64_t accepted = 0;
  std::uint64_t malformed = 0;
};

// Streams FileRecords from a manifest file, plain or gzip (detected by
// magic bytes). Malformed lines are counted and skipped. Throws
// ManifestFormatError if more than half of the first 1000 lines are
// malformed.
class ManifestReader {
 public:
  explicit ManifestReader(const std::string& path);
  ~ManifestReader();
  ManifestReader(ManifestReader&&) noexcept;
  ManifestReader& operator=(ManifestReader&&) noexcept;

  // False at end of input. Skips malformed lines.
  bool next(FileRecord& out);
  const ParseStats& stats() const { return stats_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  ParseStats stats_;
  std::uint64_t lines_seen_ = 0;
};

// One record per regular file under root, host = "local", symlinks not
// followed, deterministic sorted traversal. Unreadable subtrees are
// recorded in diagnostics and skipped; an unreadable root throws.
std::vector<FileRecord> scan_filesystem(const std::filesystem::path& root,
                                        std::vector<std::string>* diagnostics = nullptr);

// Streaming per-category histogram builder. Partials built from a split
// stream merge to exactly the single-pass result.
class HistogramBuilder {
 public:
  void add(const FileRecord& rec);
  void merge(const HistogramBuilder& other);
  const std::map<std::string, SizeHistogram>& by_category() const {
    return by_category_;
  }
  std::uint64_t records() const { return records_; }

 private:
  std::map<std::string, SizeHistogram> by_category_;
  std::uint64_t records_ = 0;
};

struct CategorySummary {
  std::string category;
  std::uint64_t file_count = 0;
  double share = 0.0;          // of total accepted records
  double files_per_host = 0.0; // denominator: hosts seen anywhere in the corpus
  double mean_kb = 0.0;
  double median_kb = 0.0;
  std::string median_mode;     // "exact-bytes" or "binned-1kb"
};

// Streaming summary statistics. Medians are exact (byte resolution) while a
// category holds fewer than 10^7 records; beyond that the 1 KB histogram is
// used, which keeps rank error at zero with value resolution of one bin.
class SummaryBuilder {
 public:
  void add(const FileRecord& rec);
  std::vector<CategorySummary> finish() const;

 private:
  struct CategoryState;
  std::map<std::string, std::shared_ptr<CategoryState>> categories_;
  std::map<std::string, std::uint64_t> host_seen_;
  std::uint64_t records_ = 0;
};

}  // namespace tailfit
