#include "tailfit/fitting.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <ostream>
#include <thread>

#include <json.hpp>

#include "tailfit/errors.hpp"

namespace tailfit {

namespace {

struct KahanSum {
  double sum = 0.0;
  double c = 0.0;
  void add(double x) {
    double y = x - c;
    double t = sum + y;
    c = (t - sum) - y;
    sum = t;
  }
};

// Sorted occupied bins plus suffix sums, so per-candidate tail statistics
// are O(log bins).
struct TailIndex {
  std::vector<BinIndex> k;
  std::vector<std::uint64_t> n;
  std::vector<std::uint64_t> suffix_n;
  std::vector<double> suffix_log;   // sum n ln k
  std::vector<double> suffix_log2;  // sum n ln^2 k
  std::vector<double> suffix_k;     // sum n k
  std::uint64_t total = 0;
  BinIndex k_max = 0;

  explicit TailIndex(const SizeHistogram& hist) {
    auto bins = hist.sorted_bins();
    const std::size_t m = bins.size();
    k.resize(m);
    n.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
      k[i] = bins[i].first;
      n[i] = bins[i].second;
    }
    suffix_n.assign(m + 1, 0);
    suffix_log.assign(m + 1, 0.0);
    suffix_log2.assign(m + 1, 0.0);
    suffix_k.assign(m + 1, 0.0);
    KahanSum sl, sl2, sk;
    for (std::size_t i = m; i-- > 0;) {
      double lk = std::log(static_cast<double>(k[i]));
      double cnt = static_cast<double>(n[i]);
      suffix_n[i] = suffix_n[i + 1] + n[i];
      sl.add(cnt * lk);
      sl2.add(cnt * lk * lk);
      sk.add(cnt * static_cast<double>(k[i]));
      suffix_log[i] = sl.sum;
      suffix_log2[i] = sl2.sum;
      suffix_k[i] = sk.sum;
    }
    total = hist.total();
    k_max = hist.k_max_observed();
  }

  // index of the first occupied bin >= k_min
  std::size_t lower(BinIndex k_min) const {
    return static_cast<std::size_t>(
        std::lower_bound(k.begin(), k.end(), k_min) - k.begin());
  }
};

struct TailStats {
  std::uint64_t count = 0;
  double sum_log = 0.0;
  double sum_log2 = 0.0;
  double sum_k = 0.0;
};

TailStats tail_stats(const TailIndex& idx, BinIndex k_min) {
  std::size_t i = idx.lower(k_min);
  return {idx.suffix_n[i], idx.suffix_log[i], idx.suffix_log2[i],
          idx.suffix_k[i]};
}

void require_tail(const TailStats& st, std::uint64_t min_tail) {
  if (st.count == 0)
    throw EmptyTailError("no mass at or above k_min");
  if (st.count < min_tail)
    throw EmptyTailError("tail support " + std::to_string(st.count) +
                         " below the minimum of " + std::to_string(min_tail));
}

// ---- per-family MLE cores on precomputed tail statistics ----

PowerLawAlphaFit fit_powerlaw_core(const TailStats& st, BinIndex k_min) {
  const double n = static_cast<double>(st.count);
  auto ll = [&](double alpha) {
    return -alpha * st.sum_log - n * std::log(powerlaw_tail_sum(alpha, k_min));
  };
  // golden-section maximization; the likelihood is unimodal in alpha
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double lo = PowerLawModel::kAlphaMin + 1e-9;
  double hi = PowerLawModel::kAlphaMax;
  double x1 = hi - gr * (hi - lo);
  double x2 = lo + gr * (hi - lo);
  double f1 = ll(x1), f2 = ll(x2);
  while (hi - lo > 1e-7) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + gr * (hi - lo);
      f2 = ll(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - gr * (hi - lo);
      f1 = ll(x1);
    }
  }
  PowerLawAlphaFit fit;
  fit.alpha = 0.5 * (lo + hi);
  fit.at_boundary = fit.alpha < PowerLawModel::kAlphaMin + 1e-3 ||
                    fit.alpha > PowerLawModel::kAlphaMax - 1e-3;
  return fit;
}

LogNormalParams fit_lognormal_core(const TailStats& st, BinIndex k_min) {
  const double n = static_cast<double>(st.count);
  const double mean_log = st.sum_log / n;
  const double var_log =
      std::max(st.sum_log2 / n - mean_log * mean_log, 0.0);
  if (var_log < 1e-12)
    throw DegenerateTailError(
        "all tail mass at a single bin; sigma is undefined");

  // negative truncated log-likelihood in x = (mu, ln sigma)
  auto objective = [&](const double x[2]) {
    const double mu = x[0];
    const double ls = x[1];
    if (std::fabs(mu) > 60.0 || ls > 5.0 || ls < -10.0) return 1e15;
    const double sigma = std::exp(ls);
    const double s2 = sigma * sigma;
    const double data = -st.sum_log -
                        (st.sum_log2 - 2.0 * mu * st.sum_log + mu * mu * n) /
                            (2.0 * s2);
    const double z = lognormal_tail_sum(mu, sigma, k_min);
    if (!(z > 0.0) || !std::isfinite(z)) return 1e15;
    return -(data - n * std::log(z));
  };

  double best[2] = {mean_log, 0.5 * std::log(var_log)};
  double best_f = objective(best);
  double scale = 0.1;
  for (int restart = 0; restart < 3; ++restart) {
    // Nelder-Mead on 2 parameters
    double pts[3][2];
    double f[3];
    for (int i = 0; i < 3; ++i) {
      pts[i][0] = best[0];
      pts[i][1] = best[1];
      if (i == 1) pts[i][0] += scale;
      if (i == 2) pts[i][1] += scale;
      f[i] = objective(pts[i]);
    }
    for (int it = 0; it < 400; ++it) {
      int order[3] = {0, 1, 2};
      std::sort(order, order + 3, [&](int a, int b) { return f[a] < f[b]; });
      int lo = order[0], mid = order[1], hi = order[2];
      double spread = std::max(
          std::max(std::fabs(pts[hi][0] - pts[lo][0]),
                   std::fabs(pts[hi][1] - pts[lo][1])),
          std::fabs(pts[mid][0] - pts[lo][0]));
      if (spread < 1e-7) break;
      double centroid[2] = {0.5 * (pts[lo][0] + pts[mid][0]),
                            0.5 * (pts[lo][1] + pts[mid][1])};
      double refl[2] = {2.0 * centroid[0] - pts[hi][0],
                        2.0 * centroid[1] - pts[hi][1]};
      double fr = objective(refl);
      if (fr < f[lo]) {
        double exp2[2] = {centroid[0] + 2.0 * (refl[0] - centroid[0]),
                          centroid[1] + 2.0 * (refl[1] - centroid[1])};
        double fe = objective(exp2);
        if (fe < fr) {
          pts[hi][0] = exp2[0];
          pts[hi][1] = exp2[1];
          f[hi] = fe;
        } else {
          pts[hi][0] = refl[0];
          pts[hi][1] = refl[1];
          f[hi] = fr;
        }
      } else if (fr < f[mid]) {
        pts[hi][0] = refl[0];
        pts[hi][1] = refl[1];
        f[hi] = fr;
      } else {
        double contr[2] = {centroid[0] + 0.5 * (pts[hi][0] - centroid[0]),
                           centroid[1] + 0.5 * (pts[hi][1] - centroid[1])};
        double fc = objective(contr);
        if (fc < f[hi]) {
          pts[hi][0] = contr[0];
          pts[hi][1] = contr[1];
          f[hi] = fc;
        } else {
          for (int i : {mid, hi}) {
            pts[i][0] = 0.5 * (pts[i][0] + pts[lo][0]);
            pts[i][1] = 0.5 * (pts[i][1] + pts[lo][1]);
            f[i] = objective(pts[i]);
          }
        }
      }
    }
    int lo = 0;
    for (int i = 1; i < 3; ++i)
      if (f[i] < f[lo]) lo = i;
    if (f[lo] < best_f) {
      best_f = f[lo];
      best[0] = pts[lo][0];
      best[1] = pts[lo][1];
    }
    scale *= 0.1;  // restart tighter around the best point
  }
  return {best[0], std::exp(best[1])};
}

double fit_exponential_core(const TailStats& st, BinIndex k_min) {
  const double n = static_cast<double>(st.count);
  const double mean_excess = st.sum_k / n - static_cast<double>(k_min);
  if (mean_excess <= 0.0)
    throw DegenerateTailError(
        "tail mean equals k_min; geometric rate is undefined");
  // E[k - k_min] = 1 / (e^lambda - 1)
  return std::log1p(1.0 / mean_excess);
}

// Unnormalized weight function and normalizer for the incremental CCDF
// walk in rss().
struct WeightView {
  std::function<double(BinIndex)> weight;
  double z = 1.0;
};

WeightView weight_view(const TailModel& model) {
  WeightView v;
  if (const auto* pl = std::get_if<PowerLawModel>(&model)) {
    double alpha = pl->alpha();
    v.z = pl->normalizer();
    v.weight = [alpha](BinIndex k) {
      return std::pow(static_cast<double>(k), -alpha);
    };
  } else if (const auto* ln = std::get_if<LogNormalModel>(&model)) {
    double mu = ln->mu(), s2 = ln->sigma() * ln->sigma();
    v.z = ln->normalizer();
    v.weight = [mu, s2](BinIndex k) {
      double lk = std::log(static_cast<double>(k));
      return std::exp(-lk - (lk - mu) * (lk - mu) / (2.0 * s2));
    };
  } else if (const auto* ex = std::get_if<ExponentialModel>(&model)) {
    double lambda = ex->lambda();
    BinIndex k0 = ex->k_min();
    v.z = 1.0 / -std::expm1(-lambda);
    v.weight = [lambda, k0](BinIndex k) {
      return std::exp(-lambda * static_cast<double>(k - k0));
    };
  } else {
    const auto& me = std::get<MaxEntModel>(model);
    double shift = me.shift();
    v.z = me.normalizer();
    v.weight = [&me, shift](BinIndex k) {
      return std::exp(me.log_weight(k) - shift);
    };
  }
  return v;
}

double rss_core(const TailIndex& idx, const TailModel& model) {
  const BinIndex k_min = model_k_min(model);
  const BinIndex k_max = idx.k_max;
  if (k_min > k_max)
    throw EmptyTailError("rss: model k_min beyond the observed range");
  std::size_t i = idx.lower(k_min);
  const std::uint64_t tail_total = idx.suffix_n[i];
  if (tail_total == 0) throw EmptyTailError("rss: empty tail");

  WeightView wv = weight_view(model);
  const double total = static_cast<double>(tail_total);
  double model_tail = wv.z;
  std::uint64_t remaining = tail_total;
  KahanSum sum;
  // every integer bin in [k_min, k_max], zero-count bins included; true
  // divisions keep rss invariant under integer count scaling
  for (BinIndex k = k_min; k <= k_max; ++k) {
    double emp = static_cast<double>(remaining) / total;
    double mod = model_tail / wv.z;
    double d = emp - mod;
    sum.add(d * d);
    if (i < idx.k.size() && idx.k[i] == k) {
      remaining -= idx.n[i];
      ++i;
    }
    model_tail -= wv.weight(k);
    if (model_tail < 0.0) model_tail = 0.0;
  }
  return sum.sum;
}

TailModel build_model(Family family, const TailIndex& idx, BinIndex k_min,
                      bool* at_boundary) {
  TailStats st = tail_stats(idx, k_min);
  switch (family) {
    case Family::powerlaw: {
      PowerLawAlphaFit f = fit_powerlaw_core(st, k_min);
      if (at_boundary) *at_boundary = f.at_boundary;
      return PowerLawModel(f.alpha, k_min);
    }
    case Family::lognormal: {
      LogNormalParams p = fit_lognormal_core(st, k_min);
      return LogNormalModel(p.mu, p.sigma, k_min);
    }
    case Family::exponential:
      return ExponentialModel(fit_exponential_core(st, k_min), k_min);
  }
  throw std::logic_error("unknown family");
}

double log_likelihood_core(const TailModel& model, const TailStats& st) {
  const double n = static_cast<double>(st.count);
  if (const auto* pl = std::get_if<PowerLawModel>(&model))
    return -pl->alpha() * st.sum_log - n * std::log(pl->normalizer());
  if (const auto* ln = std::get_if<LogNormalModel>(&model)) {
    double mu = ln->mu(), s2 = ln->sigma() * ln->sigma();
    return -st.sum_log -
           (st.sum_log2 - 2.0 * mu * st.sum_log + mu * mu * n) / (2.0 * s2) -
           n * std::log(ln->normalizer());
  }
  const auto& ex = std::get<ExponentialModel>(model);
  double lambda = ex.lambda();
  return n * std::log(-std::expm1(-lambda)) -
         lambda * (st.sum_k - n * static_cast<double>(ex.k_min()));
}

}  // namespace

const char* family_name(Family f) {
  switch (f) {
    case Family::powerlaw: return "powerlaw";
    case Family::lognormal: return "lognormal";
    case Family::exponential: return "exponential";
  }
  return "?";
}

std::optional<Family> family_from_name(const std::string& name) {
  if (name == "powerlaw") return Family::powerlaw;
  if (name == "lognormal") return Family::lognormal;
  if (name == "exponential") return Family::exponential;
  return std::nullopt;
}

SizeHistogram truncate(const SizeHistogram& hist, std::uint64_t cap_bytes) {
  if (cap_bytes == 0) throw std::domain_error("truncate: cap must be > 0");
  // bin k covers [(k-1)*1024, k*1024); drop bins whose lower edge exceeds cap
  const BinIndex max_keep = static_cast<BinIndex>(cap_bytes / 1024) + 1;
  SizeHistogram out;
  for (const auto& [k, n] : hist.counts())
    if (k <= max_keep) out.add(k, n);
  return out;
}

PowerLawAlphaFit fit_powerlaw_alpha(const SizeHistogram& hist, BinIndex k_min,
                                    std::uint64_t min_tail) {
  TailIndex idx(hist);
  TailStats st = tail_stats(idx, k_min);
  require_tail(st, min_tail);
  return fit_powerlaw_core(st, k_min);
}

LogNormalParams fit_lognormal(const SizeHistogram& hist, BinIndex k_min,
                              std::uint64_t min_tail) {
  TailIndex idx(hist);
  TailStats st = tail_stats(idx, k_min);
  require_tail(st, min_tail);
  return fit_lognormal_core(st, k_min);
}

double fit_exponential(const SizeHistogram& hist, BinIndex k_min,
                       std::uint64_t min_tail) {
  TailIndex idx(hist);
  TailStats st = tail_stats(idx, k_min);
  require_tail(st, min_tail);
  return fit_exponential_core(st, k_min);
}

double rss(const SizeHistogram& hist, const TailModel& model) {
  TailIndex idx(hist);
  return rss_core(idx, model);
}

std::vector<BinIndex> log_spaced_grid(BinIndex lo, BinIndex hi, int points) {
  if (lo < 1 || hi < lo || points < 1)
    throw std::domain_error("log_spaced_grid: need 1 <= lo <= hi, points >= 1");
  std::vector<BinIndex> grid;
  const double llo = std::log(static_cast<double>(lo));
  const double lhi = std::log(static_cast<double>(hi));
  for (int i = 0; i < points; ++i) {
    double t = points == 1 ? 0.0
                           : static_cast<double>(i) /
                                 static_cast<double>(points - 1);
    auto k = static_cast<BinIndex>(
        std::llround(std::exp(llo + t * (lhi - llo))));
    grid.push_back(std::clamp(k, lo, hi));
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

std::vector<BinIndex> default_kmin_grid() {
  return log_spaced_grid(1, 102400, 256);
}

unsigned worker_count() {
  if (const char* env = std::getenv("TAILFIT_THREADS")) {
    int v = std::atoi(env);
    if (v >= 1) return static_cast<unsigned>(v);
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc ? hc : 1;
}

FitResult scan_kmin(const SizeHistogram& hist, Family family,
                    const std::vector<BinIndex>& grid,
                    std::uint64_t min_tail) {
  if (grid.empty()) throw std::domain_error("scan_kmin: empty grid");
  std::vector<BinIndex> candidates = grid;
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()),
                   candidates.end());
  if (candidates.front() < 1)
    throw std::domain_error("scan_kmin: candidates must be >= 1");

  const TailIndex idx(hist);
  const std::size_t m = candidates.size();
  std::vector<std::optional<FitResult>> results(m);
  std::vector<std::string> causes(m);

  auto evaluate = [&](std::size_t ci) {
    const BinIndex k_min = candidates[ci];
    try {
      if (k_min > idx.k_max) {
        causes[ci] = "beyond the observed range";
        return;
      }
      TailStats st = tail_stats(idx, k_min);
      require_tail(st, min_tail);
      bool boundary = false;
      TailModel model = build_model(family, idx, k_min, &boundary);
      FitResult r{
          std::move(model),
          k_min,
          0.0,
          static_cast<double>(st.count) / static_cast<double>(idx.total),
          0.0,
          boundary};
      r.rss = rss_core(idx, r.model);
      r.log_likelihood = log_likelihood_core(r.model, st);
      results[ci] = std::move(r);
    } catch (const std::exception& e) {
      causes[ci] = e.what();
    }
  };

  const unsigned workers = std::min<unsigned>(
      worker_count(), static_cast<unsigned>(m));
  if (workers <= 1) {
    for (std::size_t ci = 0; ci < m; ++ci) evaluate(ci);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (;;) {
          std::size_t ci = next.fetch_add(1);
          if (ci >= m) return;
          evaluate(ci);
        }
      });
    for (auto& t : pool) t.join();
  }

  // deterministic merge: minimal rss, ties toward the smaller k_min
  std::optional<std::size_t> best;
  for (std::size_t ci = 0; ci < m; ++ci) {
    if (!results[ci]) continue;
    if (!best || results[ci]->rss < results[*best]->rss) best = ci;
  }
  if (!best) {
    std::string msg = "scan_kmin: every candidate failed:";
    for (std::size_t ci = 0; ci < m; ++ci)
      msg += "\n  k_min=" + std::to_string(candidates[ci]) + ": " + causes[ci];
    throw NoFitError(msg);
  }
  return *results[*best];
}

const std::optional<FitResult>& ComparisonReport::result(Family f) const {
  switch (f) {
    case Family::powerlaw: return powerlaw;
    case Family::lognormal: return lognormal;
    case Family::exponential: return exponential;
  }
  throw std::logic_error("unknown family");
}

ComparisonReport compare_models(const SizeHistogram& hist,
                                const std::vector<BinIndex>& grid,
                                std::uint64_t min_tail) {
  ComparisonReport report;
  auto run = [&](Family f, std::optional<FitResult>& slot,
                 std::string& error) {
    try {
      slot = scan_kmin(hist, f, grid, min_tail);
    } catch (const std::exception& e) {
      error = e.what();
    }
  };
  run(Family::powerlaw, report.powerlaw, report.powerlaw_error);
  run(Family::lognormal, report.lognormal, report.lognormal_error);
  run(Family::exponential, report.exponential, report.exponential_error);

  std::vector<std::pair<double, Family>> ranked;
  for (Family f :
       {Family::powerlaw, Family::lognormal, Family::exponential})
    if (report.result(f)) ranked.emplace_back(report.result(f)->rss, f);
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  if (!ranked.empty()) {
    report.selected_family = family_name(ranked.front().second);
    report.rss_ratio = ranked.size() > 1 && ranked[1].first > 0.0
                           ? ranked.front().first / ranked[1].first
                           : 1.0;
  }
  return report;
}

std::string comparison_report_json(const ComparisonReport& report) {
  using json = nlohmann::ordered_json;
  json doc;
  json families = json::object();
  auto fill = [&](Family f, const std::optional<FitResult>& r,
                  const std::string& error) {
    json entry = json::object();
    if (r) {
      if (const auto* pl = std::get_if<PowerLawModel>(&r->model)) {
        entry["alpha"] = pl->alpha();
      } else if (const auto* ln = std::get_if<LogNormalModel>(&r->model)) {
        entry["mu"] = ln->mu();
        entry["sigma"] = ln->sigma();
      } else if (const auto* ex = std::get_if<ExponentialModel>(&r->model)) {
        entry["lambda"] = ex->lambda();
      }
      entry["k_min"] = r->k_min;
      entry["rss"] = r->rss;
      entry["tail_fraction"] = r->tail_fraction;
      entry["log_likelihood"] = r->log_likelihood;
      if (r->at_boundary) entry["at_boundary"] = true;
    } else {
      entry["error"] = error;
    }
    families[family_name(f)] = std::move(entry);
  };
  fill(Family::powerlaw, report.powerlaw, report.powerlaw_error);
  fill(Family::lognormal, report.lognormal, report.lognormal_error);
  fill(Family::exponential, report.exponential, report.exponential_error);
  doc["families"] = std::move(families);
  doc["selected_family"] = report.selected_family;
  doc["rss_ratio"] = report.rss_ratio;
  return doc.dump(2) + "\n";
}

void write_empirical_ccdf_csv(std::ostream& out, const SizeHistogram& hist,
                              BinIndex k_min) {
  TailIndex idx(hist);
  std::size_t i = idx.lower(k_min);
  const std::uint64_t tail_total = idx.suffix_n[i];
  out << "k,ccdf\n";
  if (tail_total == 0) return;
  if (i < idx.k.size() && idx.k[i] != k_min) out << k_min << ",1\n";
  for (; i < idx.k.size(); ++i)
    out << idx.k[i] << ','
        << static_cast<double>(idx.suffix_n[i]) /
               static_cast<double>(tail_total)
        << '\n';
}

void write_model_ccdf_csv(std::ostream& out, const TailModel& model,
                          const SizeHistogram& hist) {
  const BinIndex k_min = model_k_min(model);
  out << "k,ccdf\n";
  auto bins = hist.sorted_bins();
  bool wrote_kmin = false;
  for (const auto& [k, n] : bins) {
    if (k < k_min) continue;
    if (!wrote_kmin && k != k_min) {
      out << k_min << ",1\n";
    }
    wrote_kmin = true;
    out << k << ',' << ccdf(model, k) << '\n';
  }
}

}  // namespace tailfit
