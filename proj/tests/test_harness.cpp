#include <doctest.h>

#include <cmath>
#include <sstream>

#include "immkl/harness.hpp"
#include "test_util.hpp"

using namespace immkl;
using testutil::error_kind;

namespace {

ExperimentConfig small(int runs, int horizon = 100) {
  auto cfg = ExperimentConfig::defaults();
  cfg.n_runs = runs;
  cfg.truth.horizon = horizon;
  cfg.threads = 2;
  return cfg;
}

std::vector<std::string> lines_of(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  for (std::string line; std::getline(is, line);) out.push_back(line);
  return out;
}

}  // namespace

TEST_CASE("rmse_position") {
  const Vector x = (Vector(4) << 1, 2, 3, 4).finished();
  CHECK(rmse_position({{x, x}}, {{x, x}}) == std::vector<double>{0.0, 0.0});
  Vector off = x;
  off(0) += 1.0;
  CHECK(rmse_position({{off, off}}, {{x, x}}) == std::vector<double>{1.0, 1.0});
  Vector e3 = x, e4 = x;
  e3(0) += 3.0;
  e4(2) += 4.0;
  CHECK(rmse_position({{e3}, {e4}}, {{x}, {x}})[0] == doctest::Approx(5.0 / std::sqrt(2.0)).epsilon(1e-15));
  CHECK(error_kind([&] { rmse_position({{x}}, {{x, x}}); }) == ErrorKind::DimensionMismatch);
  CHECK(error_kind([&] { rmse_position({{x}}, {{x}, {x}}); }) == ErrorKind::DimensionMismatch);
}

TEST_CASE("cov_error") {
  const Matrix R = true_measurement_cov(200.0);
  CHECK(cov_error({{R, R}}, R) == std::vector<double>{0.0, 0.0});
  CHECK(cov_error({{2.0 * R}}, R)[0] == doctest::Approx(1.0).epsilon(1e-15));
  Matrix est(2, 2);
  est << 210, 10, 10, 190;
  const double want = std::sqrt(200.0) / std::sqrt(80200.0);
  CHECK(cov_error({{est}}, R)[0] == doctest::Approx(want).epsilon(1e-14));
  CHECK(want == doctest::Approx(0.04994).epsilon(1e-4));
}

TEST_CASE("window averaging") {
  const std::vector<double> s{1, 2, 3, 4};
  CHECK(window_average(s, {3, 4}) == 3.5);
  CHECK(window_average(s, {1, 4}) == 2.5);
  CHECK(error_kind([&] { window_average(s, {0, 2}); }) == ErrorKind::InvalidParameter);
  CHECK(error_kind([&] { window_average(s, {2, 5}); }) == ErrorKind::InvalidParameter);
  auto cfg = ExperimentConfig::defaults();
  CHECK(cfg.window().first == 51);
  CHECK(cfg.window().last == 100);
}

TEST_CASE("default experiment") {
  const auto cfg = ExperimentConfig::defaults();
  CHECK(cfg.n_runs == 1000);
  REQUIRE(cfg.filters.size() == 3);
  CHECK(cfg.filters[0].variant == Variant::KL);
  CHECK(cfg.filters[1].variant == Variant::MM);
  CHECK(cfg.filters[2].variant == Variant::KnownR);
  CHECK(cfg.r_sweep == std::vector<double>{50, 100, 200, 400});
  CHECK(cfg.initial_cov_diag == (Vector(4) << 100, 10, 100, 10).finished());
  CHECK_FALSE(error_kind([&] { cfg.validate(); }));
}

TEST_CASE("all variants see the same measurements") {
  const auto cfg = small(1);
  const auto rec = simulate_run(cfg, 0);
  REQUIRE(rec.traces.size() == 3);
  CHECK(rec.traces[0].measurement_hash == rec.traces[1].measurement_hash);
  CHECK(rec.traces[1].measurement_hash == rec.traces[2].measurement_hash);
  const auto other = simulate_run(cfg, 1);
  CHECK(other.traces[0].measurement_hash != rec.traces[0].measurement_hash);
}

TEST_CASE("Monte Carlo output is independent of the thread count") {
  auto one = small(12, 30);
  one.threads = 1;
  auto four = one;
  four.threads = 4;
  std::ostringstream a, b;
  write_metrics_csv(a, run_monte_carlo(one));
  write_metrics_csv(b, run_monte_carlo(four));
  CHECK(a.str() == b.str());
}

TEST_CASE("metrics CSV shape") {
  const auto cfg = small(2, 10);
  const auto result = run_monte_carlo(cfg);
  std::ostringstream os;
  write_metrics_csv(os, result);
  const auto lines = lines_of(os.str());
  CHECK(os.str().find('\r') == std::string::npos);
  REQUIRE(lines.size() == 31);
  CHECK(lines[0] == "step,variant,rmse_pos,cov_err");
  CHECK(lines[1].rfind("1,KL,", 0) == 0);
  CHECK(lines[2].rfind("1,MM,", 0) == 0);
  CHECK(lines[3].rfind("1,KNOWN_R,", 0) == 0);
  CHECK(lines[30].rfind("10,KNOWN_R,", 0) == 0);
  CHECK(lines[3].substr(lines[3].rfind(',') + 1) == "0");
}

TEST_CASE("CSV numbers round-trip exactly") {
  for (double x : {0.1, 1.0 / 3.0, 12345.678901234567, 1e-300, 2.5e17}) {
    CHECK(std::stod(format_double(x)) == x);
  }
  CHECK(format_double(3.0) == "3");
  std::ostringstream os;
  write_sweep_csv(os, {{50.0, Variant::KL, 1.25, 0.5, 0}, {50.0, Variant::KnownR, 1.0, 0.0, 0}});
  CHECK(os.str() == "r,variant,avg_rmse_pos,avg_cov_err\n50,KL,1.25,0.5\n50,KNOWN_R,1,0\n");
}

TEST_CASE("single-value sweep equals a full-horizon average of one run") {
  auto cfg = small(5, 20);
  cfg.r_sweep = {120.0};
  const auto rows = sweep_noise_levels(cfg);
  REQUIRE(rows.size() == 3);
  auto at = cfg;
  at.truth.r = 120.0;
  const auto result = run_monte_carlo(at);
  for (std::size_t v = 0; v < 3; ++v) {
    CHECK(rows[v].r == 120.0);
    CHECK(rows[v].variant == result.metrics[v].variant);
    CHECK(rows[v].avg_rmse_pos == window_average(result.metrics[v].rmse_pos, {1, 20}));
    CHECK(rows[v].avg_cov_err == window_average(result.metrics[v].cov_err, {1, 20}));
  }
}

TEST_CASE("default scenario at moderate scale") {
  const auto result = run_monte_carlo(small(50));
  CHECK(result.runs_excluded == 0);
  CHECK(result.runs_used == 50);
  for (const auto& m : result.metrics) {
    for (std::size_t k = 0; k < m.rmse_pos.size(); ++k) {
      CHECK(std::isfinite(m.rmse_pos[k]));
      CHECK(std::isfinite(m.cov_err[k]));
    }
  }
  // Known R gives the best position accuracy over the first ten steps.
  const auto& kl = result.metrics[0].rmse_pos;
  const auto& mm = result.metrics[1].rmse_pos;
  const auto& kf = result.metrics[2].rmse_pos;
  const SteadyWindow early{1, 10};
  CHECK(window_average(kf, early) < window_average(kl, early));
  CHECK(window_average(kf, early) < window_average(mm, early));
}

TEST_CASE("averaged RMSE grows with the noise level") {
  auto cfg = small(40);
  const auto rows = sweep_noise_levels(cfg);
  REQUIRE(rows.size() == 12);
  for (std::size_t v = 0; v < 3; ++v) {
    for (std::size_t i = 1; i < 4; ++i) {
      CHECK(rows[i * 3 + v].avg_rmse_pos >= rows[(i - 1) * 3 + v].avg_rmse_pos);
    }
  }
}

TEST_CASE("experiment validation") {
  auto cfg = ExperimentConfig::defaults();
  cfg.n_runs = 0;
  CHECK(error_kind([&] { cfg.validate(); }) == ErrorKind::Config);
  cfg = ExperimentConfig::defaults();
  cfg.steady_window = SteadyWindow{10, 200};
  CHECK(error_kind([&] { cfg.validate(); }) == ErrorKind::Config);
  cfg = ExperimentConfig::defaults();
  cfg.r_sweep = {50.0, -1.0};
  CHECK(error_kind([&] { cfg.validate(); }) == ErrorKind::Config);
}
