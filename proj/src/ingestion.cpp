#include "tailfit/ingestion.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cstring>
#include <stdexcept>
#include <unordered_map>

#include "tailfit/errors.hpp"

namespace tailfit {

namespace {

// ---------------------------------------------------------------------------
// Manifest line parsing. The format is a flat JSON object per line; this is
// a hand-rolled scanner because ingestion throughput is a hard requirement
// (10^7 records per minute on one core) and the schema is fixed.
// ---------------------------------------------------------------------------

struct Cursor {
  const char* p;
  const char* end;
  bool eof() const { return p >= end; }
  char peek() const { return *p; }
  void skip_ws() {
    while (p < end && (*p == ' ' || *p == '\t' || *p == '\r')) ++p;
  }
};

void append_utf8(std::string& out, unsigned cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

bool parse_hex4(Cursor& c, unsigned& out) {
  if (c.end - c.p < 4) return false;
  out = 0;
  for (int i = 0; i < 4; ++i) {
    char ch = *c.p++;
    out <<= 4;
    if (ch >= '0' && ch <= '9')
      out |= static_cast<unsigned>(ch - '0');
    else if (ch >= 'a' && ch <= 'f')
      out |= static_cast<unsigned>(ch - 'a' + 10);
    else if (ch >= 'A' && ch <= 'F')
      out |= static_cast<unsigned>(ch - 'A' + 10);
    else
      return false;
  }
  return true;
}

bool parse_json_string(Cursor& c, std::string& out) {
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
        case 'b': out.push_back('\b'); break;
        case 'f': out.push_back('\f'); break;
        case 'n': out.push_back('\n'); break;
        case 'r': out.push_back('\r'); break;
        case 't': out.push_back('\t'); break;
        case 'u': {
          unsigned cp;
          if (!parse_hex4(c, cp)) return false;
          if (cp >= 0xD800 && cp <= 0xDBFF) {
            // surrogate pair
            if (c.end - c.p < 6 || c.p[0] != '\\' || c.p[1] != 'u') return false;
            c.p += 2;
            unsigned lo;
            if (!parse_hex4(c, lo) || lo < 0xDC00 || lo > 0xDFFF) return false;
            cp = 0x10000 + ((cp - 0xD800) << 10) + (lo - 0xDC00);
          } else if (cp >= 0xDC00 && cp <= 0xDFFF) {
            return false;
          }
          append_utf8(out, cp);
          break;
        }
        default: return false;
      }
    } else {
      out.push_back(ch);
    }
  }
  return false;  // unterminated
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
  // integers only: a following '.' or exponent makes the line malformed
  if (!c.eof() && (*c.p == '.' || *c.p == 'e' || *c.p == 'E')) return false;
  return true;
}

// Skips a scalar value for keys we don't care about.
bool skip_json_value(Cursor& c) {
  if (c.eof()) return false;
  if (*c.p == '"') {
    std::string tmp;
    return parse_json_string(c, tmp);
  }
  const char* start = c.p;
  while (!c.eof() && *c.p != ',' && *c.p != '}' && *c.p != ' ' && *c.p != '\t')
    ++c.p;
  return c.p > start;
}

bool valid_mime(const std::string& mime) {
  auto slash = mime.find('/');
  if (slash == std::string::npos || slash == 0 || slash + 1 == mime.size())
    return false;
  return mime.find('/', slash + 1) == std::string::npos;
}

// ---------------------------------------------------------------------------
// Extension -> MIME fallback table.
// ---------------------------------------------------------------------------

const std::unordered_map<std::string, std::string>& extension_table() {
  static const std::unordered_map<std::string, std::string> table = {
      {"jpg", "image/jpeg"},   {"jpeg", "image/jpeg"},
      {"png", "image/png"},    {"gif", "image/gif"},
      {"bmp", "image/bmp"},    {"tif", "image/tiff"},
      {"tiff", "image/tiff"},  {"svg", "image/svg+xml"},
      {"webp", "image/webp"},  {"ico", "image/x-icon"},
      {"mp3", "audio/mpeg"},   {"wav", "audio/wav"},
      {"ogg", "audio/ogg"},    {"flac", "audio/flac"},
      {"aac", "audio/aac"},    {"m4a", "audio/mp4"},
      {"wma", "audio/x-ms-wma"}, {"mid", "audio/midi"},
      {"mp4", "video/mp4"},    {"avi", "video/x-msvideo"},
      {"mkv", "video/x-matroska"}, {"mov", "video/quicktime"},
      {"wmv", "video/x-ms-wmv"}, {"flv", "video/x-flv"},
      {"webm", "video/webm"},  {"mpg", "video/mpeg"},
      {"mpeg", "video/mpeg"},  {"m4v", "video/mp4"},
      {"3gp", "video/3gpp"},
      {"html", "text/html"},   {"htm", "text/html"},
      {"txt", "text/plain"},   {"css", "text/css"},
      {"csv", "text/csv"},     {"xml", "text/xml"},
      {"md", "text/markdown"}, {"rtf", "text/rtf"},
      {"tex", "text/x-tex"},
      {"pdf", "application/pdf"}, {"doc", "application/msword"},
      {"docx", "application/vnd.openxmlformats-officedocument.wordprocessingml.document"},
      {"xls", "application/vnd.ms-excel"},
      {"xlsx", "application/vnd.openxmlformats-officedocument.spreadsheetml.sheet"},
      {"ppt", "application/vnd.ms-powerpoint"},
      {"pptx", "application/vnd.openxmlformats-officedocument.presentationml.presentation"},
      {"zip", "application/zip"}, {"gz", "application/gzip"},
      {"tar", "application/x-tar"}, {"rar", "application/vnd.rar"},
      {"7z", "application/x-7z-compressed"},
      {"exe", "application/x-msdownload"},
      {"iso", "application/x-iso9660-image"},
      {"jar", "application/java-archive"},
      {"js", "application/javascript"},
      {"json", "application/json"},
      {"ps", "application/postscript"},
      {"swf", "application/x-shockwave-flash"},
      {"sql", "application/sql"},
      {"apk", "application/vnd.android.package-archive"},
      {"dmg", "application/x-apple-diskimage"},
      {"deb", "application/vnd.debian.binary-package"},
      {"rpm", "application/x-rpm"},
      {"odt", "application/vnd.oasis.opendocument.text"},
      {"ods", "application/vnd.oasis.opendocument.spreadsheet"},
      {"odp", "application/vnd.oasis.opendocument.presentation"},
      {"epub", "application/epub+zip"},
  };
  return table;
}

bool is_known_category(const std::string& top) {
  return top == "application" || top == "audio" || top == "image" ||
         top == "text" || top == "video";
}

}  // namespace

const char* const kExtensionTableVersion = "ext-table-v1";

bool parse_manifest_line(std::string_view line, FileRecord& out) {
  if (line.size() > kMaxManifestLine) return false;
  Cursor c{line.data(), line.data() + line.size()};
  c.skip_ws();
  if (c.eof() || *c.p != '{') return false;
  ++c.p;

  bool have_host = false, have_path = false, have_mime = false,
       have_size = false;
  std::string key;

  c.skip_ws();
  if (!c.eof() && *c.p == '}') {
    ++c.p;
  } else {
    for (;;) {
      c.skip_ws();
      if (!parse_json_string(c, key)) return false;
      c.skip_ws();
      if (c.eof() || *c.p != ':') return false;
      ++c.p;
      c.skip_ws();
      if (key == "host") {
        if (!parse_json_string(c, out.host)) return false;
        have_host = true;
      } else if (key == "path") {
        if (!parse_json_string(c, out.path)) return false;
        have_path = true;
      } else if (key == "mime") {
        if (!parse_json_string(c, out.mime)) return false;
        have_mime = true;
      } else if (key == "size_bytes") {
        if (c.eof() || *c.p == '-') return false;  // negative sizes rejected
        if (!parse_uint(c, out.size_bytes)) return false;
        have_size = true;
      } else {
        if (!skip_json_value(c)) return false;
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
  if (!(have_host && have_path && have_mime && have_size)) return false;
  if (!valid_mime(out.mime)) out.mime = "unknown/unknown";
  return true;
}

std::string manifest_line(const FileRecord& rec) {
  std::string out;
  out.reserve(64 + rec.host.size() + rec.path.size() + rec.mime.size());
  auto emit_string = [&out](const std::string& s) {
    out.push_back('"');
    for (unsigned char ch : s) {
      switch (ch) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\b': out += "\\b"; break;
        case '\f': out += "\\f"; break;
        case '\n': out += "\\n"; break;
        case '\r': out += "\\r"; break;
        case '\t': out += "\\t"; break;
        default:
          if (ch < 0x20) {
            char buf[8];
            std::snprintf(buf, sizeof buf, "\\u%04x", ch);
            out += buf;
          } else {
            out.push_back(static_cast<char>(ch));
          }
      }
    }
    out.push_back('"');
  };
  out += "{\"host\":";
  emit_string(rec.host);
  out += ",\"path\":";
  emit_string(rec.path);
  out += ",\"mime\":";
  emit_string(rec.mime);
  out += ",\"size_bytes\":";
  out += std::to_string(rec.size_bytes);
  out.push_back('}');
  return out;
}

std::string classify(const FileRecord& rec) {
  auto slash = rec.mime.find('/');
  if (slash != std::string::npos) {
    std::string top = rec.mime.substr(0, slash);
    if (is_known_category(top)) return top;
  }
  // extension fallback
  auto last_slash = rec.path.find_last_of('/');
  auto dot = rec.path.find_last_of('.');
  if (dot != std::string::npos &&
      (last_slash == std::string::npos || dot > last_slash) &&
      dot + 1 < rec.path.size()) {
    std::string ext = rec.path.substr(dot + 1);
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    auto it = extension_table().find(ext);
    if (it != extension_table().end()) {
      auto s = it->second.find('/');
      std::string top = it->second.substr(0, s);
      if (is_known_category(top)) return top;
    }
  }
  return "other";
}

// ---------------------------------------------------------------------------
// ManifestReader
// ---------------------------------------------------------------------------

struct ManifestReader::Impl {
  gzFile file = nullptr;
  std::vector<char> buf;
  std::size_t pos = 0;
  std::size_t len = 0;
  std::string carry;
  bool at_eof = false;

  explicit Impl(const std::string& path) : buf(1 << 20) {
    // zlib reads both gzip and plain files transparently
    file = gzopen(path.c_str(), "rb");
    if (!file) throw std::runtime_error("cannot open manifest: " + path);
    gzbuffer(file, 1 << 20);
  }
  ~Impl() {
    if (file) gzclose(file);
  }

  bool refill() {
    int n = gzread(file, buf.data(), static_cast<unsigned>(buf.size()));
    if (n < 0) throw std::runtime_error("gzip read error in manifest");
    pos = 0;
    len = static_cast<std::size_t>(n);
    if (n == 0) at_eof = true;
    return n > 0;
  }

  // Returns false at end of input. The returned view is valid until the
  // next call.
  bool next_line(std::string_view& out) {
    carry.clear();
    for (;;) {
      if (pos >= len) {
        if (at_eof || !refill()) {
          if (!carry.empty()) {
            out = carry;
            strip_cr(out);
            // consume carry on next call via carry.clear()
            pos = len;
            at_eof = true;
            return true;
          }
          return false;
        }
      }
      const char* start = buf.data() + pos;
      const char* nl = static_cast<const char*>(
          std::memchr(start, '\n', len - pos));
      if (nl) {
        if (carry.empty()) {
          out = std::string_view(start, static_cast<std::size_t>(nl - start));
        } else {
          carry.append(start, static_cast<std::size_t>(nl - start));
          out = carry;
        }
        pos += static_cast<std::size_t>(nl - start) + 1;
        strip_cr(out);
        return true;
      }
      carry.append(start, len - pos);
      pos = len;
      if (carry.size() > kMaxManifestLine + 1024) {
        // pathological line: discard the remainder, emit the oversized
        // prefix so the parser rejects it by size
        for (;;) {
          if (pos >= len && (at_eof || !refill())) break;
          const char* s = buf.data() + pos;
          const char* e = static_cast<const char*>(
              std::memchr(s, '\n', len - pos));
          if (e) {
            pos += static_cast<std::size_t>(e - s) + 1;
            break;
          }
          pos = len;
        }
        out = carry;
        return true;
      }
    }
  }

  static void strip_cr(std::string_view& v) {
    if (!v.empty() && v.back() == '\r') v.remove_suffix(1);
  }
};

ManifestReader::ManifestReader(const std::string& path)
    : impl_(std::make_unique<Impl>(path)) {}
ManifestReader::~ManifestReader() = default;
ManifestReader::ManifestReader(ManifestReader&&) noexcept = default;
ManifestReader& ManifestReader::operator=(ManifestReader&&) noexcept = default;

bool ManifestReader::next(FileRecord& out) {
  std::string_view line;
  while (impl_->next_line(line)) {
    ++lines_seen_;
    if (line.empty()) continue;
    if (parse_manifest_line(line, out)) {
      ++stats_.accepted;
      return true;
    }
    ++stats_.malformed;
    if (lines_seen_ == 1000 && stats_.malformed * 2 > lines_seen_)
      throw ManifestFormatError(
          "more than half of the first 1000 lines are malformed; "
          "this does not look like a manifest");
  }
  if (lines_seen_ >= 100 && lines_seen_ < 1000 &&
      stats_.malformed * 2 > lines_seen_)
    throw ManifestFormatError(
        "more than half of the input lines are malformed; "
        "this does not look like a manifest");
  return false;
}

// ---------------------------------------------------------------------------
// Filesystem walk
// ---------------------------------------------------------------------------

namespace {

void walk_dir(const std::filesystem::path& dir, std::vector<FileRecord>& out,
              std::vector<std::string>* diagnostics) {
  namespace fs = std::filesystem;
  std::error_code ec;
  std::vector<fs::path> entries;
  for (fs::directory_iterator it(dir, ec), end; it != end;
       it.increment(ec)) {
    if (ec) break;
    entries.push_back(it->path());
  }
  if (ec && diagnostics)
    diagnostics->push_back("skipped " + dir.string() + ": " + ec.message());
  std::sort(entries.begin(), entries.end());
  for (const auto& p : entries) {
    std::error_code sec;
    auto st = fs::symlink_status(p, sec);
    if (sec) {
      if (diagnostics)
        diagnostics->push_back("skipped " + p.string() + ": " + sec.message());
      continue;
    }
    if (fs::is_symlink(st)) continue;  // never followed
    if (fs::is_directory(st)) {
      walk_dir(p, out, diagnostics);
    } else if (fs::is_regular_file(st)) {
      std::error_code fec;
      auto size = fs::file_size(p, fec);
      if (fec) {
        if (diagnostics)
          diagnostics->push_back("skipped " + p.string() + ": " +
                                 fec.message());
        continue;
      }
      out.push_back(FileRecord{"local", p.generic_string(), "unknown/unknown",
                               static_cast<std::uint64_t>(size)});
    }
  }
}

}  // namespace

std::vector<FileRecord> scan_filesystem(const std::filesystem::path& root,
                                        std::vector<std::string>* diagnostics) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(root, ec) || ec)
    throw std::runtime_error("scan_filesystem: unreadable root: " +
                             root.string());
  std::vector<FileRecord> out;
  walk_dir(root, out, diagnostics);
  return out;
}

// ---------------------------------------------------------------------------
// Histogram and summary builders
// ---------------------------------------------------------------------------

void HistogramBuilder::add(const FileRecord& rec) {
  by_category_[classify(rec)].add(bin_of_size(rec.size_bytes));
  ++records_;
}

void HistogramBuilder::merge(const HistogramBuilder& other) {
  for (const auto& [cat, hist] : other.by_category_)
    by_category_[cat].merge(hist);
  records_ += other.records_;
}

struct SummaryBuilder::CategoryState {
  std::uint64_t count = 0;
  std::uint64_t sum_bytes = 0;
  std::vector<std::uint64_t> sizes;  // exact path, dropped past the limit
  SizeHistogram hist;
  bool binned = false;
  static constexpr std::uint64_t kExactLimit = 10'000'000;
};

void SummaryBuilder::add(const FileRecord& rec) {
  auto& state = categories_[classify(rec)];
  if (!state) state = std::make_shared<CategoryState>();
  ++state->count;
  state->sum_bytes += rec.size_bytes;
  state->hist.add(bin_of_size(rec.size_bytes));
  if (!state->binned) {
    state->sizes.push_back(rec.size_bytes);
    if (state->sizes.size() >= CategoryState::kExactLimit) {
      state->binned = true;
      state->sizes.clear();
      state->sizes.shrink_to_fit();
    }
  }
  ++host_seen_[rec.host];
  ++records_;
}

std::vector<CategorySummary> SummaryBuilder::finish() const {
  std::vector<CategorySummary> out;
  const double hosts = static_cast<double>(host_seen_.size());
  for (const auto& [cat, state] : categories_) {
    CategorySummary s;
    s.category = cat;
    s.file_count = state->count;
    s.share = records_ ? static_cast<double>(state->count) /
                             static_cast<double>(records_)
                       : 0.0;
    s.files_per_host =
        hosts > 0 ? static_cast<double>(state->count) / hosts : 0.0;
    s.mean_kb = state->count
                    ? static_cast<double>(state->sum_bytes) /
                          static_cast<double>(state->count) / 1024.0
                    : 0.0;
    if (!state->binned) {
      auto sizes = state->sizes;
      std::sort(sizes.begin(), sizes.end());
      const std::size_t n = sizes.size();
      double median_bytes;
      if (n % 2 == 1)
        median_bytes = static_cast<double>(sizes[n / 2]);
      else
        median_bytes = 0.5 * (static_cast<double>(sizes[n / 2 - 1]) +
                              static_cast<double>(sizes[n / 2]));
      s.median_kb = median_bytes / 1024.0;
      s.median_mode = "exact-bytes";
    } else {
      // rank-exact median from the 1 KB histogram; value resolution one bin
      const std::uint64_t half = (state->count + 1) / 2;
      std::uint64_t cum = 0;
      BinIndex median_bin = 1;
      for (const auto& [k, c] : state->hist.sorted_bins()) {
        cum += c;
        if (cum >= half) {
          median_bin = k;
          break;
        }
      }
      s.median_kb = static_cast<double>(median_bin) - 0.5;
      s.median_mode = "binned-1kb";
    }
    out.push_back(std::move(s));
  }
  // five known categories first, in the conventional order, then the rest
  auto rank = [](const std::string& c) {
    if (c == "application") return 0;
    if (c == "audio") return 1;
    if (c == "image") return 2;
    if (c == "text") return 3;
    if (c == "video") return 4;
    return 5;
  };
  std::stable_sort(out.begin(), out.end(),
                   [&](const CategorySummary& a, const CategorySummary& b) {
                     int ra = rank(a.category), rb = rank(b.category);
                     if (ra != rb) return ra < rb;
                     return a.category < b.category;
                   });
  return out;
}

}  // namespace tailfit
