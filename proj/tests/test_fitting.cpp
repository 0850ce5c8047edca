#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <random>
#include <sstream>

#include "tailfit/errors.hpp"
#include "tailfit/fitting.hpp"
#include "tailfit/tail_model.hpp"

using namespace tailfit;

namespace {

SizeHistogram hist_of_sample(const TailModel& m, std::size_t n,
                             std::uint64_t seed) {
  SizeHistogram h;
  for (BinIndex k : sample(m, n, seed)) h.add(k);
  return h;
}

// Counts proportional to the model pmf, scaled so rounding is negligible.
SizeHistogram noiseless_hist(const TailModel& m, BinIndex k_hi) {
  SizeHistogram h;
  for (BinIndex k = model_k_min(m); k <= k_hi; ++k) {
    auto n = static_cast<std::uint64_t>(std::llround(pmf(m, k) * 1e12));
    if (n > 0) h.add(k, n);
  }
  return h;
}

}  // namespace

TEST_CASE("truncate") {
  SizeHistogram h;
  h.add(1, 5);
  h.add(1024, 3);
  h.add(100'000'000, 1);
  SizeHistogram t = truncate(h);
  CHECK(t.total() == 8);
  CHECK(t.count_at(1) == 5);
  CHECK(t.count_at(1024) == 3);
  CHECK(t.count_at(100'000'000) == 0);
  // idempotent
  SizeHistogram t2 = truncate(t);
  CHECK(t2.total() == t.total());
  CHECK(t2.k_max_observed() == t.k_max_observed());
  // a small histogram is unchanged
  SizeHistogram small;
  small.add(1000, 4);
  CHECK(truncate(small).total() == 4);
}

TEST_CASE("exponential MLE") {
  SUBCASE("closed form on a flat two-point tail") {
    SizeHistogram h;
    h.add(1, 500);
    h.add(2, 500);
    // mean excess 0.5, so exp(lambda) - 1 = 2
    CHECK(fit_exponential(h, 1) == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  }
  SUBCASE("synthesize and refit") {
    auto h = hist_of_sample(ExponentialModel(std::log(2.0), 1), 1'000'000, 3);
    CHECK(fit_exponential(h, 1) ==
          doctest::Approx(std::log(2.0)).epsilon(0.005));
  }
  SUBCASE("count scaling leaves lambda unchanged") {
    SizeHistogram h, h10;
    for (BinIndex k = 1; k <= 30; ++k) {
      h.add(k, 1000 / k);
      h10.add(k, 10 * (1000 / k));
    }
    CHECK(fit_exponential(h, 1) ==
          doctest::Approx(fit_exponential(h10, 1)).epsilon(1e-12));
  }
  SUBCASE("all mass at k_min is degenerate") {
    SizeHistogram h;
    h.add(5, 200);
    CHECK_THROWS_AS(fit_exponential(h, 5), DegenerateTailError);
  }
}

TEST_CASE("power-law MLE") {
  SUBCASE("noiseless self-consistency") {
    auto h = noiseless_hist(PowerLawModel(3.0, 1), 100'000);
    auto fit = fit_powerlaw_alpha(h, 1);
    CHECK(fit.alpha == doctest::Approx(3.0).epsilon(1e-3));
    CHECK_FALSE(fit.at_boundary);
  }
  SUBCASE("synthesize and refit at k_min=8") {
    auto h = hist_of_sample(PowerLawModel(2.5, 8), 1'000'000, 4);
    CHECK(fit_powerlaw_alpha(h, 8).alpha ==
          doctest::Approx(2.5).epsilon(0.02 / 2.5));
  }
  SUBCASE("only the tail enters the likelihood") {
    auto h = hist_of_sample(PowerLawModel(2.2, 10), 200'000, 5);
    SizeHistogram h2 = h;
    h2.add(1, 99999);
    h2.add(9, 7);
    CHECK(fit_powerlaw_alpha(h, 10).alpha == fit_powerlaw_alpha(h2, 10).alpha);
  }
  SUBCASE("insufficient tail") {
    SizeHistogram h;
    h.add(1, 99);
    CHECK_THROWS_AS(fit_powerlaw_alpha(h, 1), EmptyTailError);
    CHECK_THROWS_AS(fit_powerlaw_alpha(h, 50), EmptyTailError);
  }
}

TEST_CASE("log-normal MLE") {
  SUBCASE("noiseless self-consistency") {
    auto h = noiseless_hist(LogNormalModel(5.0, 1.0, 1), 50'000);
    auto p = fit_lognormal(h, 1);
    CHECK(p.mu == doctest::Approx(5.0).epsilon(1e-3 / 5.0));
    CHECK(p.sigma == doctest::Approx(1.0).epsilon(1e-3));
  }
  SUBCASE("synthesize and refit") {
    auto h = hist_of_sample(LogNormalModel(7.0, 1.5, 1), 1'000'000, 6);
    auto p = fit_lognormal(h, 1);
    CHECK(std::fabs(p.mu - 7.0) < 0.02);
    CHECK(std::fabs(p.sigma - 1.5) < 0.02);
  }
  SUBCASE("single distinct bin is degenerate") {
    SizeHistogram h;
    h.add(12, 5000);
    CHECK_THROWS_AS(fit_lognormal(h, 1), DegenerateTailError);
  }
}

TEST_CASE("log-likelihood identities") {
  // counts exactly proportional to the pmf: LL/N equals -H
  SizeHistogram h;
  for (BinIndex k = 1; k <= 40; ++k)
    h.add(k, std::uint64_t{1} << (40 - k));
  TailModel ex = ExponentialModel(std::log(2.0), 1);
  double ll = log_likelihood(ex, h);
  double n = static_cast<double>(h.total());
  CHECK(ll / n == doctest::Approx(-2.0 * std::log(2.0)).epsilon(1e-6));

  SizeHistogram single;
  single.add(1, 1);
  CHECK(log_likelihood(ex, single) ==
        doctest::Approx(std::log(0.5)).epsilon(1e-14));

  // data sampled from A scores higher under A than under B
  auto data = hist_of_sample(PowerLawModel(2.0, 1), 100'000, 8);
  TailModel a = PowerLawModel(2.0, 1);
  TailModel b = LogNormalModel(2.0, 1.0, 1);
  CHECK(log_likelihood(a, data) > log_likelihood(b, data));

  SizeHistogram below;
  below.add(1, 10);
  CHECK_THROWS_AS(log_likelihood(TailModel(PowerLawModel(2.0, 5)), below),
                  EmptyTailError);
}

TEST_CASE("rss") {
  SUBCASE("perfect fit scores below 1e-12") {
    SizeHistogram h;
    for (BinIndex k = 1; k <= 40; ++k)
      h.add(k, std::uint64_t{1} << (40 - k));
    CHECK(rss(h, ExponentialModel(std::log(2.0), 1)) < 1e-12);
  }
  SUBCASE("count-scale invariance") {
    auto h = hist_of_sample(PowerLawModel(2.5, 1), 50'000, 9);
    SizeHistogram h7;
    for (const auto& [k, n] : h.counts()) h7.add(k, 7 * n);
    TailModel m = PowerLawModel(2.5, 1);
    CHECK(rss(h, m) == rss(h7, m));
  }
  SUBCASE("zero-count bins contribute") {
    // single far-out bin forces a long run of empty bins into the sum
    SizeHistogram h;
    h.add(1, 1000);
    h.add(1000, 1);
    TailModel m = ExponentialModel(1.0, 1);
    // empirical ccdf stays at 1/1001 across bins 2..1000 while the model
    // ccdf vanishes; those bins alone contribute about 999/1001^2
    CHECK(rss(h, m) > 900.0 / (1001.0 * 1001.0));
  }
  SUBCASE("empty tail") {
    SizeHistogram h;
    h.add(1, 10);
    CHECK_THROWS_AS(rss(h, PowerLawModel(2.0, 5)), EmptyTailError);
  }
}

TEST_CASE("log-spaced grid") {
  auto g = default_kmin_grid();
  CHECK(g.front() == 1);
  CHECK(g.back() == 102400);
  CHECK(g.size() <= 256);
  for (std::size_t i = 1; i < g.size(); ++i) CHECK(g[i] > g[i - 1]);

  auto one = log_spaced_grid(5, 5, 1);
  REQUIRE(one.size() == 1);
  CHECK(one[0] == 5);
  CHECK_THROWS_AS(log_spaced_grid(0, 10, 4), std::domain_error);
}

TEST_CASE("scan_kmin") {
  SUBCASE("grid of one element selects that element") {
    auto h = hist_of_sample(PowerLawModel(2.5, 1), 100'000, 10);
    auto fit = scan_kmin(h, Family::powerlaw, {3});
    CHECK(fit.k_min == 3);
  }
  SUBCASE("pure data: selected k_min at or below truth, alpha accurate") {
    auto h = hist_of_sample(PowerLawModel(2.5, 8), 1'000'000, 11);
    auto fit = scan_kmin(h, Family::powerlaw,
                         log_spaced_grid(1, 10000, 64));
    CHECK(fit.k_min <= 8);
    if (fit.k_min == 8)
      CHECK(std::get<PowerLawModel>(fit.model).alpha() ==
            doctest::Approx(2.5).epsilon(0.05 / 2.5));
    CHECK(fit.tail_fraction > 0.0);
    CHECK(fit.tail_fraction <= 1.0);
  }
  SUBCASE("contaminated head: k_min recovered within factor 2") {
    std::mt19937_64 rng(12);
    auto h = hist_of_sample(PowerLawModel(2.5, 50), 300'000, 12);
    std::uniform_int_distribution<BinIndex> noise(1, 49);
    for (int i = 0; i < 100'000; ++i) h.add(noise(rng));
    auto fit = scan_kmin(h, Family::powerlaw, log_spaced_grid(1, 10000, 64));
    CHECK(fit.k_min >= 25);
    CHECK(fit.k_min <= 100);
  }
  SUBCASE("every candidate failing lists causes") {
    SizeHistogram h;
    h.add(1, 10);
    try {
      scan_kmin(h, Family::powerlaw, {1, 2, 4});
      FAIL("expected NoFitError");
    } catch (const NoFitError& e) {
      std::string msg = e.what();
      CHECK(msg.find("k_min=1") != std::string::npos);
      CHECK(msg.find("k_min=4") != std::string::npos);
    }
  }
  SUBCASE("result independent of worker count") {
    auto h = hist_of_sample(LogNormalModel(4.0, 1.2, 1), 200'000, 13);
    auto grid = log_spaced_grid(1, 10000, 48);
    setenv("TAILFIT_THREADS", "1", 1);
    auto serial = scan_kmin(h, Family::lognormal, grid);
    setenv("TAILFIT_THREADS", "4", 1);
    auto parallel = scan_kmin(h, Family::lognormal, grid);
    unsetenv("TAILFIT_THREADS");
    CHECK(serial.k_min == parallel.k_min);
    CHECK(serial.rss == parallel.rss);
    CHECK(std::get<LogNormalModel>(serial.model).mu() ==
          std::get<LogNormalModel>(parallel.model).mu());
    CHECK(std::get<LogNormalModel>(serial.model).sigma() ==
          std::get<LogNormalModel>(parallel.model).sigma());
  }
}

TEST_CASE("compare_models picks the generating family") {
  auto grid = log_spaced_grid(1, 10000, 48);

  auto pl = hist_of_sample(PowerLawModel(2.0, 1), 100'000, 14);
  CHECK(compare_models(pl, grid).selected_family == "powerlaw");

  auto ln = hist_of_sample(LogNormalModel(5.0, 1.0, 1), 100'000, 15);
  CHECK(compare_models(ln, grid).selected_family == "lognormal");

  auto ex = hist_of_sample(ExponentialModel(0.2, 1), 100'000, 16);
  CHECK(compare_models(ex, grid).selected_family == "exponential");

  auto report = compare_models(pl, grid);
  CHECK(report.rss_ratio <= 1.0);
  CHECK(report.rss_ratio >= 0.0);
}

TEST_CASE("comparison report serialization") {
  auto h = hist_of_sample(PowerLawModel(2.5, 1), 50'000, 17);
  auto grid = log_spaced_grid(1, 1000, 16);
  auto report = compare_models(h, grid);
  std::string a = comparison_report_json(report);
  std::string b = comparison_report_json(compare_models(h, grid));
  CHECK(a == b);
  CHECK(a.find("\"selected_family\"") != std::string::npos);
  CHECK(a.find("\"rss_ratio\"") != std::string::npos);
  CHECK(a.find("\"alpha\"") != std::string::npos);
  CHECK(a.back() == '\n');

  std::ostringstream emp, mod;
  write_empirical_ccdf_csv(emp, h, report.powerlaw->k_min);
  write_model_ccdf_csv(mod, report.powerlaw->model, h);
  CHECK(emp.str().rfind("k,ccdf\n", 0) == 0);
  CHECK(mod.str().rfind("k,ccdf\n", 0) == 0);
}
