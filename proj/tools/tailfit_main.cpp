#include <CLI11.hpp>
#include <json.hpp>

#include <cctype>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tailfit/errors.hpp"
#include "tailfit/fitting.hpp"
#include "tailfit/graphstats.hpp"
#include "tailfit/ingestion.hpp"
#include "tailfit/maxent.hpp"
#include "tailfit/tail_model.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace tailfit;

namespace {

constexpr std::uint64_t kDefaultSeed = 12345;
constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNoFit = 3;

// Files created by the running command; removed wholesale when it fails so
// no partial outputs survive.
std::vector<fs::path> g_written;

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  g_written.push_back(path);
  return out;
}

void remove_partial_outputs() {
  for (const auto& p : g_written) {
    std::error_code ec;
    fs::remove(p, ec);
  }
}

struct CommonOpts {
  std::vector<std::string> inputs;
  std::string category;
  BinIndex kmin_lo = 1;
  BinIndex kmin_hi = 102400;
  double cap_gb = 10.0;
  std::uint64_t seed = kDefaultSeed;
  std::string out_dir = ".";
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool needs_input) {
  auto* in = cmd->add_option("--input", opts.inputs,
                             "Input path (repeatable); manifests may be "
                             "gzip-compressed, directories are scanned");
  if (needs_input) in->required();
  cmd->add_option("--category", opts.category,
                  "Restrict to one MIME category");
  cmd->add_option("--kmin-lo", opts.kmin_lo, "Lower k_min bound in KB")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--kmin-hi", opts.kmin_hi, "Upper k_min bound in KB")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--cap-gb", opts.cap_gb, "Size cap in GB")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--seed", opts.seed, "Random seed");
  cmd->add_option("--out", opts.out_dir, "Output directory");
}

std::uint64_t cap_bytes(const CommonOpts& opts) {
  return static_cast<std::uint64_t>(opts.cap_gb * 1024.0 * 1024.0 * 1024.0);
}

std::vector<BinIndex> scan_grid(const CommonOpts& opts) {
  if (opts.kmin_hi < opts.kmin_lo)
    throw std::runtime_error("--kmin-hi must be >= --kmin-lo");
  return log_spaced_grid(opts.kmin_lo, opts.kmin_hi, 256);
}

void ensure_out_dir(const CommonOpts& opts) {
  std::error_code ec;
  fs::create_directories(opts.out_dir, ec);
  if (ec)
    throw std::runtime_error("cannot create output directory " +
                             opts.out_dir + ": " + ec.message());
}

// Streams every input (manifest file or directory) through the callback.
void for_each_record(const CommonOpts& opts,
                     const std::function<void(const FileRecord&)>& fn) {
  for (const auto& input : opts.inputs) {
    if (fs::is_directory(input)) {
      for (const auto& rec : scan_filesystem(input)) fn(rec);
      continue;
    }
    ManifestReader reader(input);
    FileRecord rec;
    while (reader.next(rec)) fn(rec);
  }
}

std::string sanitize(const std::string& name) {
  std::string out;
  for (char c : name)
    out.push_back(std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
  return out;
}

// ---------------------------------------------------------------------------
// hist
// ---------------------------------------------------------------------------

int cmd_hist(const CommonOpts& opts) {
  ensure_out_dir(opts);
  HistogramBuilder hists;
  SummaryBuilder summary;
  for_each_record(opts, [&](const FileRecord& rec) {
    if (!opts.category.empty() && classify(rec) != opts.category) return;
    hists.add(rec);
    summary.add(rec);
  });

  for (const auto& [cat, hist] : hists.by_category()) {
    auto out = open_out(fs::path(opts.out_dir) /
                        ("hist_" + sanitize(cat) + ".csv"));
    hist.write_csv(out);
  }

  json doc;
  doc["records"] = hists.records();
  json rows = json::array();
  for (const auto& s : summary.finish()) {
    json row;
    row["category"] = s.category;
    row["file_count"] = s.file_count;
    row["share"] = s.share;
    row["files_per_host"] = s.files_per_host;
    row["mean_kb"] = s.mean_kb;
    row["median_kb"] = s.median_kb;
    row["median_mode"] = s.median_mode;
    rows.push_back(std::move(row));
  }
  doc["categories"] = std::move(rows);
  auto out = open_out(fs::path(opts.out_dir) / "summary.json");
  out << doc.dump(2) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

bool looks_like_histogram_csv(const std::string& path) {
  if (fs::is_directory(path)) return false;
  std::ifstream in(path, std::ios::binary);
  std::string first;
  std::getline(in, first);
  if (!first.empty() && first.back() == '\r') first.pop_back();
  return first == "k,count";
}

int cmd_fit(const CommonOpts& opts, const std::string& family_opt) {
  ensure_out_dir(opts);
  std::map<std::string, SizeHistogram> by_category;

  std::vector<std::string> manifest_inputs;
  for (const auto& input : opts.inputs) {
    if (looks_like_histogram_csv(input)) {
      std::ifstream in(input, std::ios::binary);
      std::string label = fs::path(input).stem().string();
      if (label.rfind("hist_", 0) == 0) label = label.substr(5);
      by_category[label].merge(SizeHistogram::read_csv(in));
    } else {
      manifest_inputs.push_back(input);
    }
  }
  if (!manifest_inputs.empty()) {
    CommonOpts manifest_opts = opts;
    manifest_opts.inputs = manifest_inputs;
    HistogramBuilder hists;
    for_each_record(manifest_opts,
                    [&](const FileRecord& rec) { hists.add(rec); });
    for (const auto& [cat, hist] : hists.by_category())
      by_category[cat].merge(hist);
  }

  if (!opts.category.empty()) {
    auto it = by_category.find(opts.category);
    if (it == by_category.end()) {
      std::string available;
      for (const auto& [cat, hist] : by_category) {
        if (!available.empty()) available += ", ";
        available += cat;
      }
      std::cerr << "no data for category '" << opts.category
                << "'; available: " << (available.empty() ? "none" : available)
                << '\n';
      return kExitNoFit;
    }
    auto kept = std::move(it->second);
    by_category.clear();
    by_category.emplace(opts.category, std::move(kept));
  }

  const auto grid = scan_grid(opts);
  const auto cap = cap_bytes(opts);
  bool any_fit = false;
  std::vector<std::string> failures;

  for (const auto& [cat, raw_hist] : by_category) {
    SizeHistogram hist = truncate(raw_hist, cap);
    const std::string tag = sanitize(cat);

    ComparisonReport report;
    if (family_opt == "all") {
      report = compare_models(hist, grid);
    } else {
      Family fam = *family_from_name(family_opt);
      auto run = [&](std::optional<FitResult>& slot, std::string& err) {
        try {
          slot = scan_kmin(hist, fam, grid);
        } catch (const std::exception& e) {
          err = e.what();
        }
      };
      switch (fam) {
        case Family::powerlaw:
          run(report.powerlaw, report.powerlaw_error);
          break;
        case Family::lognormal:
          run(report.lognormal, report.lognormal_error);
          break;
        case Family::exponential:
          run(report.exponential, report.exponential_error);
          break;
      }
      for (Family f :
           {Family::powerlaw, Family::lognormal, Family::exponential})
        if (report.result(f)) report.selected_family = family_name(f);
    }

    {
      auto out = open_out(fs::path(opts.out_dir) / ("fit_" + tag + ".json"));
      out << comparison_report_json(report);
    }

    bool cat_fit = false;
    for (Family f : {Family::powerlaw, Family::lognormal, Family::exponential}) {
      const auto& r = report.result(f);
      if (!r) continue;
      cat_fit = true;
      auto out = open_out(fs::path(opts.out_dir) /
                          ("ccdf_" + std::string(family_name(f)) + "_" + tag +
                           ".csv"));
      write_model_ccdf_csv(out, r->model, hist);
    }
    if (cat_fit) {
      auto sel = family_from_name(report.selected_family);
      auto out = open_out(fs::path(opts.out_dir) /
                          ("ccdf_empirical_" + tag + ".csv"));
      write_empirical_ccdf_csv(out, hist, report.result(*sel)->k_min);
      any_fit = true;
    } else {
      failures.push_back(cat + ": powerlaw: " + report.powerlaw_error +
                         "; lognormal: " + report.lognormal_error +
                         "; exponential: " + report.exponential_error);
    }
  }

  if (!any_fit) {
    if (by_category.empty()) {
      std::cerr << "no input data to fit\n";
    } else {
      std::cerr << "no family produced a fit:\n";
      for (const auto& f : failures) std::cerr << "  " << f << '\n';
    }
    return kExitNoFit;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthOpts {
  double lambda_s = 0.0;
  double lambda_1 = 0.0;
  double lambda_2 = 0.0;
  BinIndex k_min = 1;
  BinIndex k_max = 0;
  std::uint64_t n = 1000;
  std::string category = "other";
};

int cmd_synth(const CommonOpts& opts, const SynthOpts& synth) {
  ensure_out_dir(opts);
  MaxEntModel model(synth.lambda_s, synth.lambda_1, synth.lambda_2,
                    synth.k_min, synth.k_max);
  auto out = open_out(fs::path(opts.out_dir) / "synth.jsonl");
  synthesize_corpus(model, synth.n, opts.seed, synth.category,
                    [&](const FileRecord& rec) {
                      out << manifest_line(rec) << '\n';
                    });
  if (!out) throw std::runtime_error("write failure on synth.jsonl");
  return kExitOk;
}

// ---------------------------------------------------------------------------
// graph
// ---------------------------------------------------------------------------

int cmd_graph(const CommonOpts& opts, double log_base) {
  ensure_out_dir(opts);
  IndegreeStats stats;
  JointHistogram joint(log_base);
  std::uint64_t malformed_total = 0;
  for (const auto& input : opts.inputs) {
    std::uint64_t malformed = 0;
    for (const auto& rec : read_host_manifest(input, &malformed)) {
      stats.add(rec);
      joint.add(rec);
    }
    malformed_total += malformed;
  }

  {
    auto out = open_out(fs::path(opts.out_dir) / "indegree_hist.csv");
    stats.histogram.write_csv(out);
  }
  {
    auto out = open_out(fs::path(opts.out_dir) / "joint.csv");
    joint.write_csv(out);
  }

  FitResult fit = fit_indegree_slope(stats, scan_grid(opts));
  json doc;
  doc["hosts"] = stats.hosts;
  doc["zero_in_degree_hosts"] = stats.zero_degree;
  doc["malformed_lines"] = malformed_total;
  doc["alpha"] = std::get<PowerLawModel>(fit.model).alpha();
  doc["slope"] = indegree_slope(fit);
  doc["k_min"] = fit.k_min;
  doc["rss"] = fit.rss;
  doc["tail_fraction"] = fit.tail_fraction;
  auto out = open_out(fs::path(opts.out_dir) / "graph_report.json");
  out << doc.dump(2) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// maxent-solve
// ---------------------------------------------------------------------------

struct MaxEntOpts {
  BinIndex k_min = 1;
  BinIndex k_max = 1024;
  std::optional<double> e_s;
  std::optional<double> e_log;
  std::optional<double> e_log2;
  std::size_t trials = 64;
};

int cmd_maxent(const CommonOpts& opts, const MaxEntOpts& mo) {
  ensure_out_dir(opts);
  MomentTargets targets{mo.e_s, mo.e_log, mo.e_log2};
  MaxEntModel model = solve_lagrange(targets, mo.k_min, mo.k_max);
  StationarityReport st = verify_stationarity(model, mo.trials, opts.seed);

  std::vector<double> p;
  p.reserve(static_cast<std::size_t>(mo.k_max - mo.k_min) + 1);
  for (BinIndex k = mo.k_min; k <= mo.k_max; ++k) p.push_back(model.pmf(k));

  json doc;
  doc["lambda_s"] = model.lambda_s();
  doc["lambda_1"] = model.lambda_1();
  doc["lambda_2"] = model.lambda_2();
  doc["k_min"] = model.k_min();
  doc["k_max"] = model.k_max();
  doc["entropy_nats"] = shannon_entropy(p);
  json stj;
  stj["trials"] = st.trials;
  stj["max_first_order"] = st.max_first_order;
  stj["max_second_order"] = st.max_second_order;
  doc["stationarity"] = std::move(stj);
  auto out = open_out(fs::path(opts.out_dir) / "maxent.json");
  out << doc.dump(2) << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heavy-tailed file-size model toolkit"};
  app.require_subcommand(1);

  CommonOpts hist_opts, fit_opts_c, synth_opts_c, graph_opts_c, maxent_opts_c;
  std::string family = "all";
  SynthOpts synth_opts;
  MaxEntOpts maxent_opts;
  double log_base = 2.0;

  auto* hist = app.add_subcommand(
      "hist", "Build per-category size histograms and a summary table");
  add_common(hist, hist_opts, true);

  auto* fit = app.add_subcommand(
      "fit", "Fit tail models and emit comparison reports with CCDF overlays");
  add_common(fit, fit_opts_c, true);
  fit->add_option("--family", family, "Model family to fit")
      ->check(CLI::IsMember({"powerlaw", "lognormal", "exponential", "all"}));

  auto* synth = app.add_subcommand(
      "synth", "Synthesize a deterministic manifest from a maximal-entropy "
               "size model");
  add_common(synth, synth_opts_c, false);
  synth->add_option("--lambda-s", synth_opts.lambda_s,
                    "Linear-cost multiplier");
  synth->add_option("--lambda-1", synth_opts.lambda_1, "Log-cost multiplier");
  synth->add_option("--lambda-2", synth_opts.lambda_2,
                    "Squared-log-cost multiplier");
  synth->add_option("--kmin", synth_opts.k_min, "Smallest bin")
      ->check(CLI::PositiveNumber);
  synth->add_option("--kmax", synth_opts.k_max,
                    "Largest bin (0 = unbounded)");
  synth->add_option("--n", synth_opts.n, "Number of records");
  synth->add_option("--synth-category", synth_opts.category,
                    "Category of the synthesized records");

  auto* graph = app.add_subcommand(
      "graph", "In-degree slope fit and files-vs-in-degree joint histogram");
  add_common(graph, graph_opts_c, true);
  graph->add_option("--log-base", log_base, "Joint-histogram binning base")
      ->check(CLI::Range(1.0001, 1000.0));

  auto* maxent = app.add_subcommand(
      "maxent-solve",
      "Recover multipliers from target moments on a finite support");
  add_common(maxent, maxent_opts_c, false);
  maxent->add_option("--kmin", maxent_opts.k_min, "Smallest bin")
      ->check(CLI::PositiveNumber);
  maxent->add_option("--kmax", maxent_opts.k_max, "Largest bin")
      ->check(CLI::PositiveNumber);
  auto set_opt = [](std::optional<double>& slot) {
    return [&slot](const std::string& v) { slot = std::stod(v); };
  };
  maxent->add_option_function<std::string>("--target-mean",
                                           set_opt(maxent_opts.e_s),
                                           "Target mean bin E[k]");
  maxent->add_option_function<std::string>("--target-log-mean",
                                           set_opt(maxent_opts.e_log),
                                           "Target E[ln k]");
  maxent->add_option_function<std::string>("--target-log2-mean",
                                           set_opt(maxent_opts.e_log2),
                                           "Target E[ln^2 k]");
  maxent->add_option("--trials", maxent_opts.trials,
                     "Stationarity-check trial count");

  CLI11_PARSE(app, argc, argv);

  try {
    if (hist->parsed()) return cmd_hist(hist_opts);
    if (fit->parsed()) {
      int rc = cmd_fit(fit_opts_c, family);
      if (rc != kExitOk) remove_partial_outputs();
      return rc;
    }
    if (synth->parsed()) return cmd_synth(synth_opts_c, synth_opts);
    if (graph->parsed()) return cmd_graph(graph_opts_c, log_base);
    if (maxent->parsed()) return cmd_maxent(maxent_opts_c, maxent_opts);
  } catch (const NoFitError& e) {
    remove_partial_outputs();
    std::cerr << e.what() << '\n';
    return kExitNoFit;
  } catch (const EmptyTailError& e) {
    remove_partial_outputs();
    std::cerr << e.what() << '\n';
    return kExitNoFit;
  } catch (const std::exception& e) {
    remove_partial_outputs();
    std::cerr << e.what() << '\n';
    return kExitInput;
  }
  return kExitInput;
}
