#include "tailfit/maxent.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

#include "tailfit/errors.hpp"
#include "tailfit/tail_model.hpp"

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

constexpr BinIndex kMaxSolverBins = 10'000'000;

enum class TailKind { Finite, Geometric, LogNormalLike, PowerLawLike };

TailKind classify_tail(double ls, double /*l1*/, double l2, BinIndex k_max) {
  if (k_max != MaxEntModel::kInfiniteSupport) return TailKind::Finite;
  if (ls > 0.0) return TailKind::Geometric;
  if (l2 > 0.0) return TailKind::LogNormalLike;
  return TailKind::PowerLawLike;  // ctor guarantees l1 > 1 here
}

// (mu, sigma) of the log-normal family member with the same weights:
// lambda_2 = 1/(2 sigma^2), lambda_1 = 1 - mu/sigma^2.
void lognormal_params(double l1, double l2, double& mu, double& sigma) {
  sigma = 1.0 / std::sqrt(2.0 * l2);
  mu = (1.0 - l1) * sigma * sigma;
}

}  // namespace

MaxEntModel::MaxEntModel(double lambda_s, double lambda_1, double lambda_2,
                         BinIndex k_min, BinIndex k_max)
    : ls_(lambda_s), l1_(lambda_1), l2_(lambda_2), k_min_(k_min),
      k_max_(k_max) {
  if (!std::isfinite(ls_) || !std::isfinite(l1_) || !std::isfinite(l2_))
    throw std::domain_error("MaxEntModel: multipliers must be finite");
  if (k_min_ < 1) throw std::domain_error("MaxEntModel: k_min must be >= 1");
  if (k_max_ != kInfiniteSupport) {
    if (k_max_ < k_min_)
      throw std::domain_error("MaxEntModel: k_max must be >= k_min");
  } else {
    if (ls_ < 0.0)
      throw std::domain_error(
          "MaxEntModel: divergent, lambda_s < 0 on infinite support");
    if (ls_ == 0.0 && l2_ < 0.0)
      throw std::domain_error(
          "MaxEntModel: divergent, lambda_s = 0 requires lambda_2 >= 0");
    if (ls_ == 0.0 && l2_ == 0.0 && l1_ <= 1.0)
      throw std::domain_error(
          "MaxEntModel: divergent, lambda_s = lambda_2 = 0 requires "
          "lambda_1 > 1");
  }

  // shift = (approximate) max log-weight over the support, so that
  // exp(log_weight - shift) stays in range
  shift_ = log_weight(k_min_);
  const double hi_limit = finite_support()
                              ? static_cast<double>(k_max_)
                              : (ls_ > 0.0
                                     ? static_cast<double>(k_min_) +
                                           (200.0 + 50.0 * std::fabs(l1_) +
                                            2500.0 * std::fabs(l2_) + 10.0) /
                                               ls_
                                     : 0.0);
  switch (classify_tail(ls_, l1_, l2_, k_max_)) {
    case TailKind::LogNormalLike: {
      double mu, sigma;
      lognormal_params(l1_, l2_, mu, sigma);
      BinIndex mode = static_cast<BinIndex>(
          std::llround(std::exp(mu - sigma * sigma)));
      for (BinIndex k : {mode, mode + 1, mode - 1})
        if (k >= k_min_) shift_ = std::max(shift_, log_weight(k));
      break;
    }
    case TailKind::PowerLawLike:
      break;  // weight decreasing, max at k_min
    case TailKind::Geometric:
    case TailKind::Finite: {
      double x = static_cast<double>(k_min_);
      const double hi = std::max(hi_limit, x);
      while (x <= hi) {
        BinIndex k = static_cast<BinIndex>(x);
        if (finite_support() && k > k_max_) break;
        shift_ = std::max(shift_, log_weight(k));
        x = std::max(x * 1.05, x + 1.0);
      }
      if (finite_support()) shift_ = std::max(shift_, log_weight(k_max_));
      break;
    }
  }
  z_ = tail_sum_shifted(k_min_);
  if (!(z_ > 0.0) || !std::isfinite(z_))
    throw std::domain_error("MaxEntModel: normalizer is not finite/positive");
}

double MaxEntModel::log_weight(BinIndex k) const {
  const double lk = std::log(static_cast<double>(k));
  return -ls_ * static_cast<double>(k) - l1_ * lk - l2_ * lk * lk;
}

double MaxEntModel::tail_sum_shifted(BinIndex k) const {
  switch (classify_tail(ls_, l1_, l2_, k_max_)) {
    case TailKind::Finite: {
      KahanSum s;
      for (BinIndex j = k; j <= k_max_; ++j)
        s.add(std::exp(log_weight(j) - shift_));
      return s.sum;
    }
    case TailKind::Geometric: {
      KahanSum s;
      double prev = 0.0;
      for (BinIndex j = k;; ++j) {
        double t = std::exp(log_weight(j) - shift_);
        s.add(t);
        if (prev > 0.0 && t < prev) {
          double r = t / prev;
          if (t * r / (1.0 - r) < 1e-14 * s.sum) break;
        }
        prev = t;
        if (j - k > 100'000'000)
          throw ConvergenceError("MaxEntModel: tail sum did not converge");
      }
      return s.sum;
    }
    case TailKind::LogNormalLike: {
      double mu, sigma;
      lognormal_params(l1_, l2_, mu, sigma);
      const double log_factor = mu * mu / (2.0 * sigma * sigma) - shift_;
      return std::exp(log_factor) * lognormal_tail_sum(mu, sigma, k);
    }
    case TailKind::PowerLawLike:
      return std::exp(-shift_) * powerlaw_tail_sum(l1_, k);
  }
  return 0.0;  // unreachable
}

double maxent_tail_sum_shifted(const MaxEntModel& m, BinIndex k) {
  return m.tail_sum_shifted(k);
}

double MaxEntModel::pmf(BinIndex k) const {
  if (k < k_min_ || (finite_support() && k > k_max_))
    throw std::domain_error("pmf: k outside support");
  return std::exp(log_weight(k) - shift_) / z_;
}

double MaxEntModel::ccdf(BinIndex k) const {
  if (k < k_min_ || (finite_support() && k > k_max_))
    throw std::domain_error("ccdf: k outside support");
  if (k == k_min_) return 1.0;
  return tail_sum_shifted(k) / z_;
}

double shannon_entropy(std::span<const double> p) {
  KahanSum norm;
  for (double x : p) {
    if (x < 0.0 || !std::isfinite(x))
      throw std::domain_error("shannon_entropy: pmf entries must be >= 0");
    norm.add(x);
  }
  if (std::fabs(norm.sum - 1.0) > 1e-9)
    throw std::domain_error("shannon_entropy: input is not normalized");
  KahanSum h;
  for (double x : p)
    if (x > 0.0) h.add(-x * std::log(x));
  return h.sum;
}

// ---------------------------------------------------------------------------
// Dual Newton solver
// ---------------------------------------------------------------------------

namespace {

struct DualState {
  double log_z = 0.0;       // ln Z (with shift folded back in)
  double moments[3] = {0, 0, 0};
  double second[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
};

// Features c_0(k) = k, c_1(k) = ln k, c_2(k) = ln^2 k.
void eval_dual(const double lambda[3], BinIndex k_min, BinIndex k_max,
               const std::vector<double>& logk, DualState& out) {
  const BinIndex n = k_max - k_min + 1;
  double m = -std::numeric_limits<double>::infinity();
  for (BinIndex i = 0; i < n; ++i) {
    double k = static_cast<double>(k_min + i);
    double lk = logk[static_cast<std::size_t>(i)];
    double lw = -lambda[0] * k - lambda[1] * lk - lambda[2] * lk * lk;
    m = std::max(m, lw);
  }
  KahanSum z;
  KahanSum s[3];
  KahanSum ss[3][3];
  for (BinIndex i = 0; i < n; ++i) {
    double k = static_cast<double>(k_min + i);
    double lk = logk[static_cast<std::size_t>(i)];
    double c[3] = {k, lk, lk * lk};
    double t = std::exp(-lambda[0] * k - lambda[1] * lk - lambda[2] * c[2] - m);
    z.add(t);
    for (int a = 0; a < 3; ++a) {
      s[a].add(c[a] * t);
      for (int b = a; b < 3; ++b) ss[a][b].add(c[a] * c[b] * t);
    }
  }
  out.log_z = m + std::log(z.sum);
  for (int a = 0; a < 3; ++a) {
    out.moments[a] = s[a].sum / z.sum;
    for (int b = a; b < 3; ++b) {
      double e2 = ss[a][b].sum / z.sum;
      out.second[a][b] = out.second[b][a] = e2;
    }
  }
}

// Solves the m x m system H x = b by Gaussian elimination with partial
// pivoting; returns false if effectively singular.
bool solve_small(int m, double h[3][3], const double b[3], double x[3]) {
  double a[3][4];
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) a[i][j] = h[i][j];
    a[i][m] = b[i];
  }
  for (int col = 0; col < m; ++col) {
    int piv = col;
    for (int r = col + 1; r < m; ++r)
      if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
    if (std::fabs(a[piv][col]) < 1e-300) return false;
    if (piv != col)
      for (int j = 0; j <= m; ++j) std::swap(a[piv][j], a[col][j]);
    for (int r = 0; r < m; ++r) {
      if (r == col) continue;
      double f = a[r][col] / a[col][col];
      for (int j = col; j <= m; ++j) a[r][j] -= f * a[col][j];
    }
  }
  for (int i = 0; i < m; ++i) x[i] = a[i][m] / a[i][i];
  return true;
}

}  // namespace

MaxEntModel solve_lagrange(const MomentTargets& targets, BinIndex k_min,
                           BinIndex k_max) {
  if (k_min < 1) throw std::domain_error("solve_lagrange: k_min must be >= 1");
  if (k_max < k_min)
    throw std::domain_error("solve_lagrange: finite support required");
  const BinIndex n = k_max - k_min + 1;
  if (n > kMaxSolverBins)
    throw std::domain_error("solve_lagrange: support exceeds 10^7 bins");

  const std::optional<double> t_opt[3] = {targets.e_s, targets.e_log,
                                          targets.e_log2};
  bool active[3];
  double target[3] = {0, 0, 0};
  int n_active = 0;
  for (int a = 0; a < 3; ++a) {
    active[a] = t_opt[a].has_value();
    if (active[a]) {
      target[a] = *t_opt[a];
      ++n_active;
    }
  }

  std::vector<double> logk(static_cast<std::size_t>(n));
  for (BinIndex i = 0; i < n; ++i)
    logk[static_cast<std::size_t>(i)] =
        std::log(static_cast<double>(k_min + i));

  // marginal feasibility: each active target strictly inside the feature
  // range over the support
  {
    double lo[3], hi[3];
    lo[0] = static_cast<double>(k_min);
    hi[0] = static_cast<double>(k_max);
    lo[1] = logk.front();
    hi[1] = logk.back();
    lo[2] = logk.front() * logk.front();
    hi[2] = logk.back() * logk.back();
    for (int a = 0; a < 3; ++a) {
      if (!active[a]) continue;
      if (n == 1) {
        if (std::fabs(target[a] - lo[a]) > 1e-8)
          throw FeasibilityError(
              "solve_lagrange: target unreachable on single-bin support");
        continue;
      }
      if (!(target[a] > lo[a] && target[a] < hi[a]))
        throw FeasibilityError(
            "solve_lagrange: target " + std::to_string(target[a]) +
            " outside feature range [" + std::to_string(lo[a]) + ", " +
            std::to_string(hi[a]) + "]");
    }
  }

  double lambda[3] = {0, 0, 0};
  if (n_active > 0 && n > 1) {
    DualState st;
    eval_dual(lambda, k_min, k_max, logk, st);
    auto dual_value = [&](const DualState& s) {
      double g = s.log_z;
      for (int a = 0; a < 3; ++a)
        if (active[a]) g += lambda[a] * target[a];
      return g;
    };
    double g = dual_value(st);
    bool converged = false;
    for (int iter = 0; iter < 200; ++iter) {
      // gradient and Hessian restricted to the active set
      double grad[3], hess[3][3];
      int idx[3], m = 0;
      for (int a = 0; a < 3; ++a)
        if (active[a]) idx[m++] = a;
      double gmax = 0.0;
      for (int i = 0; i < m; ++i) {
        grad[i] = target[idx[i]] - st.moments[idx[i]];
        gmax = std::max(gmax, std::fabs(grad[i]));
        for (int j = 0; j < m; ++j)
          hess[i][j] = st.second[idx[i]][idx[j]] -
                       st.moments[idx[i]] * st.moments[idx[j]];
      }
      if (gmax < 1e-10) {
        converged = true;
        break;
      }
      double step[3];
      double ridge = 0.0;
      double trace = 0.0;
      for (int i = 0; i < m; ++i) trace += hess[i][i];
      for (int attempt = 0; attempt < 40; ++attempt) {
        double h[3][3];
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < m; ++j)
            h[i][j] = hess[i][j] + (i == j ? ridge : 0.0);
        if (solve_small(m, h, grad, step)) break;
        ridge = ridge == 0.0 ? 1e-12 * std::max(trace, 1.0) : ridge * 10.0;
      }
      // damped Newton: lambda <- lambda - t * H^-1 grad, backtracking on g
      double t = 1.0;
      double saved[3] = {lambda[0], lambda[1], lambda[2]};
      DualState trial;
      bool improved = false;
      for (int bt = 0; bt < 60; ++bt) {
        for (int i = 0; i < m; ++i) lambda[idx[i]] = saved[idx[i]] - t * step[i];
        eval_dual(lambda, k_min, k_max, logk, trial);
        double gt = trial.log_z;
        for (int a = 0; a < 3; ++a)
          if (active[a]) gt += lambda[a] * target[a];
        if (std::isfinite(gt) && gt <= g + 1e-14 * std::fabs(g)) {
          g = gt;
          st = trial;
          improved = true;
          break;
        }
        t *= 0.5;
      }
      if (!improved) {
        for (int a = 0; a < 3; ++a) lambda[a] = saved[a];
        break;
      }
      double step_norm = 0.0;
      for (int i = 0; i < m; ++i)
        step_norm = std::max(step_norm, std::fabs(t * step[i]));
      if (step_norm < 1e-14 && gmax < 1e-8) {
        converged = true;
        break;
      }
    }
    if (!converged) {
      // final residual check; quadratic convergence usually lands well
      // below the tolerance before 200 iterations
      double res = 0.0;
      for (int a = 0; a < 3; ++a)
        if (active[a]) res = std::max(res, std::fabs(st.moments[a] - target[a]));
      if (res > 1e-8)
        throw ConvergenceError(
            "solve_lagrange: no convergence in 200 iterations, max moment "
            "residual " + std::to_string(res));
    }
  }

  MaxEntModel model(lambda[0], lambda[1], lambda[2], k_min, k_max);

  // postcondition: active moments reproduced within 1e-8
  if (n_active > 0 && n > 1) {
    DualState st;
    eval_dual(lambda, k_min, k_max, logk, st);
    for (int a = 0; a < 3; ++a)
      if (active[a] && std::fabs(st.moments[a] - target[a]) > 1e-8)
        throw ConvergenceError(
            "solve_lagrange: moment mismatch " +
            std::to_string(std::fabs(st.moments[a] - target[a])));
  }
  return model;
}

// ---------------------------------------------------------------------------
// Stationarity verification
// ---------------------------------------------------------------------------

StationarityReport verify_stationarity(const MaxEntModel& model,
                                       std::size_t trials, std::uint64_t seed,
                                       std::optional<std::array<bool, 3>>
                                           active) {
  if (!model.finite_support())
    throw std::domain_error("verify_stationarity: finite support required");
  const BinIndex k_min = model.k_min();
  const BinIndex n = model.k_max() - k_min + 1;
  if (n > kMaxSolverBins)
    throw std::domain_error("verify_stationarity: support exceeds 10^7 bins");

  std::array<bool, 3> act = active.value_or(std::array<bool, 3>{
      model.lambda_s() != 0.0, model.lambda_1() != 0.0,
      model.lambda_2() != 0.0});

  // perturbations act on the effective support only: bins whose pmf
  // underflows to zero have an unbounded entropy gradient and stay pinned
  std::vector<BinIndex> ks;
  std::vector<double> p;
  std::vector<double> grad_h;
  for (BinIndex i = 0; i < n; ++i) {
    double pi = model.pmf(k_min + i);
    if (pi <= 0.0) continue;
    ks.push_back(k_min + i);
    p.push_back(pi);
    grad_h.push_back(-1.0 - std::log(pi));
  }
  const BinIndex m = static_cast<BinIndex>(ks.size());

  // orthonormal basis of the constraint row space: normalization + active
  // moment features
  std::vector<std::vector<double>> rows;
  rows.emplace_back(static_cast<std::size_t>(m), 1.0);
  for (int a = 0; a < 3; ++a) {
    if (!act[static_cast<std::size_t>(a)]) continue;
    std::vector<double> r(static_cast<std::size_t>(m));
    for (BinIndex i = 0; i < m; ++i) {
      double k = static_cast<double>(ks[static_cast<std::size_t>(i)]);
      double lk = std::log(k);
      r[static_cast<std::size_t>(i)] = a == 0 ? k : (a == 1 ? lk : lk * lk);
    }
    rows.push_back(std::move(r));
  }
  std::vector<std::vector<double>> basis;
  for (auto& r : rows) {
    for (const auto& b : basis) {
      double d = 0.0;
      for (BinIndex i = 0; i < m; ++i)
        d += r[static_cast<std::size_t>(i)] * b[static_cast<std::size_t>(i)];
      for (BinIndex i = 0; i < m; ++i)
        r[static_cast<std::size_t>(i)] -= d * b[static_cast<std::size_t>(i)];
    }
    double norm = 0.0;
    for (double x : r) norm += x * x;
    norm = std::sqrt(norm);
    if (norm > 1e-12) {
      for (double& x : r) x /= norm;
      basis.push_back(std::move(r));
    }
  }

  StationarityReport report;
  report.trials = trials;
  if (m <= 1) return report;  // only the zero perturbation remains

  std::mt19937_64 rng(seed);
  std::vector<double> v(static_cast<std::size_t>(m));
  for (std::size_t t = 0; t < trials; ++t) {
    // Box-Muller pairs from the raw engine, independent of std library
    // distribution implementations
    for (BinIndex i = 0; i < m; i += 2) {
      double u1 = uniform_open_closed(rng());
      double u2 = uniform_open_closed(rng());
      double r = std::sqrt(-2.0 * std::log(u1));
      v[static_cast<std::size_t>(i)] = r * std::cos(2.0 * M_PI * u2);
      if (i + 1 < m)
        v[static_cast<std::size_t>(i + 1)] = r * std::sin(2.0 * M_PI * u2);
    }
    for (const auto& b : basis) {
      double d = 0.0;
      for (BinIndex i = 0; i < m; ++i)
        d += v[static_cast<std::size_t>(i)] * b[static_cast<std::size_t>(i)];
      for (BinIndex i = 0; i < m; ++i)
        v[static_cast<std::size_t>(i)] -= d * b[static_cast<std::size_t>(i)];
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < 1e-12) continue;
    double first = 0.0;
    double second = 0.0;
    for (BinIndex i = 0; i < m; ++i) {
      double vi = v[static_cast<std::size_t>(i)] / norm;
      first += vi * grad_h[static_cast<std::size_t>(i)];
      second -= vi * vi / p[static_cast<std::size_t>(i)];
    }
    report.max_first_order = std::max(report.max_first_order, std::fabs(first));
    report.max_second_order = std::max(report.max_second_order, second);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Corpus synthesis
// ---------------------------------------------------------------------------

namespace {

struct CategoryStyle {
  const char* mime;
  const char* ext;
};

CategoryStyle style_for(const std::string& category) {
  if (category == "image") return {"image/jpeg", ".jpg"};
  if (category == "audio") return {"audio/mpeg", ".mp3"};
  if (category == "video") return {"video/mp4", ".mp4"};
  if (category == "text") return {"text/html", ".html"};
  if (category == "application") return {"application/pdf", ".pdf"};
  return {"unknown/unknown", ".bin"};
}

}  // namespace

void synthesize_corpus(const MaxEntModel& model, std::size_t n,
                       std::uint64_t seed, const std::string& category,
                       const std::function<void(const FileRecord&)>& emit) {
  const CategoryStyle style = style_for(category);
  TailSampler sampler{TailModel{model}};
  std::mt19937_64 rng(seed);
  FileRecord rec;
  rec.mime = style.mime;
  char host_buf[16];
  for (std::size_t i = 0; i < n; ++i) {
    const BinIndex k = sampler.invert(uniform_open_closed(rng()));
    const std::uint64_t offset = rng() & 1023u;  // exact: 1024 divides 2^64
    rec.size_bytes = static_cast<std::uint64_t>(k - 1) * 1024 + offset;
    std::snprintf(host_buf, sizeof host_buf, "h%04zu", i % 1000);
    rec.host = host_buf;
    rec.path = "/synth/" + category + "/file" + std::to_string(i) + style.ext;
    emit(rec);
  }
}

std::vector<FileRecord> synthesize_corpus(const MaxEntModel& model,
                                          std::size_t n, std::uint64_t seed,
                                          const std::string& category) {
  std::vector<FileRecord> out;
  out.reserve(n);
  synthesize_corpus(model, n, seed, category,
                    [&out](const FileRecord& r) { out.push_back(r); });
  return out;
}

}  // namespace tailfit
