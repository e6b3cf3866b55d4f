#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "immkl/immkl.h"

namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

immkl_config* load(std::vector<const char*> overrides) {
  immkl_config* cfg = nullptr;
  REQUIRE(immkl_config_load(nullptr, overrides.data(), overrides.size(), &cfg) == IMMKL_OK);
  return cfg;
}

}  // namespace

TEST_CASE("version and error reporting") {
  CHECK(std::string(immkl_version()) == "1.0.0");
  immkl_config* cfg = nullptr;
  const char* bad[] = {"filters.nc=0"};
  CHECK(immkl_config_load(nullptr, bad, 1, &cfg) == IMMKL_ERR_CONFIG);
  CHECK(cfg == nullptr);
  CHECK(std::string(immkl_last_error()).find("filters.nc") != std::string::npos);
  CHECK(immkl_config_load("/nonexistent/x.ini", nullptr, 0, &cfg) == IMMKL_ERR_IO);
  CHECK(immkl_config_load(nullptr, nullptr, 0, nullptr) == IMMKL_ERR_ARGUMENT);
  CHECK(immkl_run(nullptr, nullptr) == IMMKL_ERR_ARGUMENT);
}

TEST_CASE("run through the C interface") {
  immkl_config* cfg = load({"experiment.n_runs=3", "truth.horizon=12"});
  CHECK(immkl_config_runs(cfg) == 3);
  CHECK(immkl_config_horizon(cfg) == 12);
  CHECK(immkl_config_variant_count(cfg) == 3);

  immkl_metrics* m = nullptr;
  REQUIRE(immkl_run(cfg, &m) == IMMKL_OK);
  CHECK(immkl_metrics_variant_count(m) == 3);
  CHECK(immkl_metrics_horizon(m) == 12);
  CHECK(immkl_metrics_runs_used(m) == 3);
  CHECK(immkl_metrics_runs_excluded(m) == 0);
  CHECK(std::string(immkl_metrics_variant_name(m, 2)) == "KNOWN_R");
  CHECK(immkl_metrics_variant_name(m, 3) == nullptr);

  std::vector<double> rmse(12), cov(12);
  REQUIRE(immkl_metrics_series(m, 0, rmse.data(), cov.data()) == IMMKL_OK);
  double avg_rmse = 0.0, avg_cov = 0.0;
  REQUIRE(immkl_metrics_steady_average(m, 0, &avg_rmse, &avg_cov) == IMMKL_OK);
  double s = 0.0;
  for (int k = 6; k < 12; ++k) s += rmse[static_cast<std::size_t>(k)];
  CHECK(avg_rmse == doctest::Approx(s / 6.0).epsilon(1e-14));
  CHECK(immkl_metrics_series(m, 5, rmse.data(), cov.data()) == IMMKL_ERR_ARGUMENT);

  const fs::path csv = fs::temp_directory_path() / "immkl_capi_metrics.csv";
  REQUIRE(immkl_metrics_write_csv(m, csv.string().c_str()) == IMMKL_OK);
  const auto text = slurp(csv);
  CHECK(text.rfind("step,variant,rmse_pos,cov_err\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 37);
  fs::remove(csv);
  CHECK(immkl_metrics_write_csv(m, "/nonexistent/dir/m.csv") == IMMKL_ERR_IO);

  immkl_metrics_free(m);
  immkl_config_free(cfg);
}

TEST_CASE("sweep through the C interface") {
  immkl_config* cfg = load({"experiment.n_runs=2", "truth.horizon=8", "experiment.r_sweep=50, 400"});
  immkl_sweep* sw = nullptr;
  REQUIRE(immkl_sweep_run(cfg, &sw) == IMMKL_OK);
  CHECK(immkl_sweep_row_count(sw) == 6);
  double r = 0.0, rmse = 0.0, cov = 0.0;
  const char* name = nullptr;
  REQUIRE(immkl_sweep_row(sw, 4, &r, &name, &rmse, &cov) == IMMKL_OK);
  CHECK(r == 400.0);
  CHECK(std::string(name) == "MM");
  CHECK(std::isfinite(rmse));
  CHECK(immkl_sweep_row(sw, 6, &r, &name, &rmse, &cov) == IMMKL_ERR_ARGUMENT);
  immkl_sweep_free(sw);
  immkl_config_free(cfg);
}

TEST_CASE("config echo reloads to the same experiment") {
  immkl_config* cfg = load({"truth.r=77", "experiment.n_runs=4"});
  const fs::path ini = fs::temp_directory_path() / "immkl_capi_echo.ini";
  REQUIRE(immkl_config_write(cfg, ini.string().c_str()) == IMMKL_OK);
  immkl_config* again = nullptr;
  REQUIRE(immkl_config_load(ini.string().c_str(), nullptr, 0, &again) == IMMKL_OK);
  CHECK(immkl_config_runs(again) == 4);
  const fs::path ini2 = fs::temp_directory_path() / "immkl_capi_echo2.ini";
  REQUIRE(immkl_config_write(again, ini2.string().c_str()) == IMMKL_OK);
  CHECK(slurp(ini) == slurp(ini2));
  fs::remove(ini);
  fs::remove(ini2);
  immkl_config_free(again);
  immkl_config_free(cfg);
}

TEST_CASE("validate reports every check") {
  int failed = -1;
  int count = 0;
  const auto cb = [](const char*, int passed, const char*, void* user) {
    auto* n = static_cast<int*>(user);
    *n += passed ? 1 : 1000;
  };
  CHECK(immkl_validate(cb, &count, &failed) == IMMKL_OK);
  CHECK(failed == 0);
  CHECK(count == 7);
}

TEST_CASE("streaming filter") {
  immkl_config* cfg = load({});
  const double x0[4] = {0, 10, 0, 10};
  immkl_filter* f = nullptr;
  CHECK(immkl_filter_create(cfg, "UKF", x0, &f) == IMMKL_ERR_ARGUMENT);
  REQUIRE(immkl_filter_create(cfg, "KL", x0, &f) == IMMKL_OK);
  CHECK(immkl_filter_state_dim(f) == 4);
  CHECK(immkl_filter_meas_dim(f) == 2);
  CHECK(immkl_filter_mode_count(f) == 3);
  double state[4], cov[16], r_hat[4], mu[3];
  for (int k = 1; k <= 20; ++k) {
    const double z[2] = {10.0 * k, 10.0 * k};
    REQUIRE(immkl_filter_step(f, z, state, cov, r_hat, mu) == IMMKL_OK);
  }
  CHECK(mu[0] + mu[1] + mu[2] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(cov[1] == cov[4]);
  CHECK(r_hat[1] == r_hat[2]);
  CHECK(r_hat[0] > 0.0);
  CHECK(std::abs(state[0] - 200.0) < 5.0);
  immkl_filter_free(f);

  REQUIRE(immkl_filter_create(cfg, "KNOWN_R", x0, &f) == IMMKL_OK);
  const double z[2] = {10.0, 10.0};
  REQUIRE(immkl_filter_step(f, z, state, nullptr, r_hat, nullptr) == IMMKL_OK);
  CHECK(r_hat[0] == 200.0);
  CHECK(r_hat[1] == 10.0);
  immkl_filter_free(f);
  immkl_config_free(cfg);
}
