#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "immkl/config.hpp"
#include "test_util.hpp"

using namespace immkl;
using testutil::error_kind;
using testutil::error_message;

namespace {

namespace fs = std::filesystem;

struct TempFile {
  fs::path path;
  explicit TempFile(const std::string& content, const std::string& name) {
    path = fs::temp_directory_path() / ("immkl_test_" + name + ".ini");
    std::ofstream(path) << content;
  }
  ~TempFile() { fs::remove(path); }
};

void check_same(const ExperimentConfig& a, const ExperimentConfig& b) {
  CHECK(a.truth.q == b.truth.q);
  CHECK(a.truth.r == b.truth.r);
  CHECK(a.truth.T == b.truth.T);
  CHECK(a.truth.turn_rates == b.truth.turn_rates);
  CHECK(a.truth.horizon == b.truth.horizon);
  CHECK(a.truth.x0 == b.truth.x0);
  CHECK(a.truth.initial_mode == b.truth.initial_mode);
  CHECK(a.truth.stay_probability == b.truth.stay_probability);
  CHECK(a.truth.transition.has_value() == b.truth.transition.has_value());
  REQUIRE(a.filters.size() == b.filters.size());
  for (std::size_t i = 0; i < a.filters.size(); ++i) {
    const auto& fa = a.filters[i];
    const auto& fb = b.filters[i];
    CHECK(fa.variant == fb.variant);
    CHECK(fa.n_vb_iters == fb.n_vb_iters);
    CHECK(fa.forgetting == fb.forgetting);
    CHECK(fa.initial_degrees == fb.initial_degrees);
    REQUIRE(fa.initial_scales.size() == fb.initial_scales.size());
    for (std::size_t j = 0; j < fa.initial_scales.size(); ++j) CHECK(fa.initial_scales[j] == fb.initial_scales[j]);
    CHECK(fa.known_R.has_value() == fb.known_R.has_value());
    CHECK(fa.mode_prob_floor == fb.mode_prob_floor);
    CHECK(fa.equalize_degrees == fb.equalize_degrees);
  }
  CHECK(a.n_runs == b.n_runs);
  CHECK(a.base_seed == b.base_seed);
  CHECK(a.r_sweep == b.r_sweep);
  CHECK(a.window().first == b.window().first);
  CHECK(a.window().last == b.window().last);
  CHECK(a.initial_cov_diag == b.initial_cov_diag);
  CHECK(a.threads == b.threads);
}

}  // namespace

TEST_CASE("empty config gives the default experiment") {
  TempFile f("", "empty");
  const auto cfg = parse_config(f.path.string(), {});
  check_same(cfg, ExperimentConfig::defaults());
  check_same(parse_config("", {}), ExperimentConfig::defaults());
  CHECK(cfg.truth.initial_mode == 1);
  CHECK(cfg.truth.turn_rates[2] == doctest::Approx(4.0 * 3.14159265358979323846 / 180.0).epsilon(1e-15));
}

TEST_CASE("an override changes only its key") {
  const auto cfg = parse_config("", {"truth.r=20"});
  auto want = ExperimentConfig::defaults();
  want.truth.r = 20.0;
  check_same(cfg, want);
}

TEST_CASE("file values then overrides") {
  TempFile f("# comment\n[truth]\nr = 50\nhorizon = 40\n\n[experiment]\nn_runs = 7\n", "values");
  const auto cfg = parse_config(f.path.string(), {"experiment.n_runs=9"});
  CHECK(cfg.truth.r == 50.0);
  CHECK(cfg.truth.horizon == 40);
  CHECK(cfg.n_runs == 9);
  CHECK(cfg.window().first == 21);
  CHECK(cfg.window().last == 40);
}

TEST_CASE("invalid N_c is rejected with the key named") {
  const auto msg = error_message([] { parse_config("", {"filters.nc=0"}); });
  CHECK(msg.find("filters.nc") != std::string::npos);
  CHECK(msg.find("N_c >= 1") != std::string::npos);
  CHECK(error_kind([] { parse_config("", {"filters.nc=0"}); }) == ErrorKind::Config);
}

TEST_CASE("config errors name the key") {
  const std::vector<std::pair<std::string, std::string>> cases = {
      {"truth.q=-1", "truth.q"},
      {"truth.r=abc", "truth.r"},
      {"truth.horizon=1.5", "truth.horizon"},
      {"truth.r0=4", "truth.r0"},
      {"truth.x0=1,2,3", "truth.x0"},
      {"truth.transition=0.5,0.5,0,1", "truth.transition"},
      {"filters.variants=KL,UKF", "filters.variants"},
      {"filters.nu0=5", "filters.nu0"},
      {"filters.sigma0=1,2,3", "filters.sigma0"},
      {"filters.rho=0", "filters.rho"},
      {"filters.equalize_degrees=maybe", "filters.equalize_degrees"},
      {"experiment.n_runs=0", "experiment.n_runs"},
      {"experiment.r_sweep=50,-2", "experiment.r_sweep"},
      {"experiment.steady_last=500", "experiment.steady_first/steady_last"},
      {"truth.colour=red", "truth.colour"},
      {"nonsense", "nonsense"},
  };
  for (const auto& [ov, key] : cases) {
    CAPTURE(ov);
    const std::vector<std::string> ovs{ov};
    CHECK(error_kind([&] { parse_config("", ovs); }) == ErrorKind::Config);
    CHECK(error_message([&] { parse_config("", ovs); }).find(key) != std::string::npos);
  }
}

TEST_CASE("unknown key in a file") {
  TempFile f("[filters]\nbogus = 1\n", "unknown");
  const auto msg = error_message([&] { parse_config(f.path.string(), {}); });
  CHECK(msg.find("filters.bogus") != std::string::npos);
}

TEST_CASE("missing file is an I/O error") {
  CHECK(error_kind([] { parse_config("/nonexistent/dir/cfg.ini", {}); }) == ErrorKind::Io);
}

TEST_CASE("explicit matrices and lists") {
  const auto cfg = parse_config("", {"filters.nu0=20,25,30", "filters.sigma0=50,0,0,50;60,5,5,60;70,0,0,70",
                                     "truth.transition=0.9,0.05,0.05, 0.05,0.9,0.05, 0.05,0.05,0.9",
                                     "filters.known_r=100,0,0,100", "filters.variants=kl, known_r"});
  REQUIRE(cfg.filters.size() == 2);
  CHECK(cfg.filters[0].initial_degrees == std::vector<double>{20, 25, 30});
  CHECK(cfg.filters[0].initial_scales[1](0, 1) == 5.0);
  CHECK(cfg.truth.transition->operator()(1, 1) == 0.9);
  CHECK(cfg.filters[1].variant == Variant::KnownR);
  CHECK(cfg.filters[1].known_R->operator()(0, 0) == 100.0);
  CHECK_FALSE(cfg.filters[0].known_R);
}

TEST_CASE("rendered config parses back to the same experiment") {
  const std::vector<std::string> ovs{"truth.r=123.456", "filters.variants=MM, KL", "filters.nu0=21,22,23",
                                     "experiment.steady_first=30", "experiment.base_seed=99",
                                     "filters.sigma0=50,0,0,50; 60,5,5,60; 70,0,0,70",
                                     "truth.turn_rates_deg=-3, 0, 3.5"};
  const auto table = effective_config_table("", ovs);
  TempFile f(render_config(table), "roundtrip");
  const auto again = effective_config_table(f.path.string(), {});
  CHECK(again == table);
  check_same(to_experiment(again), to_experiment(table));
  // Rendering the defaults lists every key once.
  const auto text = render_config(default_config_table());
  for (const auto& [key, value] : default_config_table()) {
    CHECK(text.find(key.substr(key.find('.') + 1) + " = " + value) != std::string::npos);
  }
}
