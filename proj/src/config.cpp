#include "immkl/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace immkl {

namespace {

[[noreturn]] void config_error(const std::string& key, const std::string& what) {
  throw Error(ErrorKind::Config, key + ": " + what);
}

std::string trimmed(std::string s) {
  boost::algorithm::trim(s);
  return s;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  boost::algorithm::split(parts, s, [sep](char c) { return c == sep; });
  for (auto& p : parts) boost::algorithm::trim(p);
  return parts;
}

class TableReader {
 public:
  explicit TableReader(const ConfigTable& table) : table_(table) {}

  const std::string& raw(const std::string& key) const {
    for (const auto& [k, v] : table_) {
      if (k == key) return v;
    }
    config_error(key, "unknown key");
  }

  bool is_auto(const std::string& key) const { return boost::algorithm::iequals(raw(key), "auto"); }

  double real(const std::string& key) const { return parse_real(key, raw(key)); }

  long long integer(const std::string& key) const {
    const std::string s = raw(key);
    long long v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) config_error(key, "expected an integer, got '" + s + "'");
    return v;
  }

  bool boolean(const std::string& key) const {
    const std::string s = boost::algorithm::to_lower_copy(raw(key));
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    config_error(key, "expected true or false, got '" + s + "'");
  }

  std::vector<double> reals(const std::string& key) const {
    std::vector<double> out;
    for (const auto& part : split(raw(key), ',')) out.push_back(parse_real(key, part));
    return out;
  }

  // Square matrices, row-major, separated by ';'.
  std::vector<Matrix> matrices(const std::string& key) const {
    std::vector<Matrix> out;
    for (const auto& block : split(raw(key), ';')) {
      std::vector<double> vals;
      for (const auto& part : split(block, ',')) vals.push_back(parse_real(key, part));
      const auto n = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(vals.size()))));
      if (n == 0 || n * n != static_cast<Eigen::Index>(vals.size())) {
        config_error(key, "expected a square matrix in row-major order");
      }
      Matrix m(n, n);
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) m(i, j) = vals[static_cast<std::size_t>(i * n + j)];
      out.push_back(std::move(m));
    }
    return out;
  }

 private:
  static double parse_real(const std::string& key, const std::string& s) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size() || !std::isfinite(v)) {
      config_error(key, "expected a real number, got '" + s + "'");
    }
    return v;
  }

  const ConfigTable& table_;
};

void set_value(ConfigTable& table, const std::string& key, const std::string& value) {
  for (auto& [k, v] : table) {
    if (k == key) {
      v = value;
      return;
    }
  }
  config_error(key, "unknown key");
}

Vector to_vector(const std::vector<double>& v) { return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())); }

}  // namespace

const ConfigTable& default_config_table() {
  static const ConfigTable table = {
      {"truth.q", "0.09"},
      {"truth.r", "200"},
      {"truth.T", "1"},
      {"truth.turn_rates_deg", "-4, 0, 4"},
      {"truth.horizon", "100"},
      {"truth.x0", "0, 10, 0, 10"},
      {"truth.r0", "2"},
      {"truth.pi_stay", "0.8"},
      {"truth.transition", "auto"},
      {"filters.variants", "KL, MM, KNOWN_R"},
      {"filters.nc", "2"},
      {"filters.rho", "1"},
      {"filters.nu0", "20"},
      {"filters.sigma0", "50, 0, 0, 50"},
      {"filters.known_r", "auto"},
      {"filters.p0_diag", "100, 10, 100, 10"},
      {"filters.mode_prob_floor", "0"},
      {"filters.equalize_degrees", "false"},
      {"experiment.n_runs", "1000"},
      {"experiment.base_seed", "1"},
      {"experiment.r_sweep", "50, 100, 200, 400"},
      {"experiment.steady_first", "auto"},
      {"experiment.steady_last", "auto"},
      {"experiment.threads", "0"},
  };
  return table;
}

ConfigTable effective_config_table(const std::string& path, const std::vector<std::string>& overrides) {
  ConfigTable table = default_config_table();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot read config file '" + path + "'");
    boost::property_tree::ptree tree;
    try {
      boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw Error(ErrorKind::Config, std::string("config syntax: ") + e.what());
    }
    for (const auto& [section, entries] : tree) {
      if (entries.empty()) config_error(section, "keys must appear inside a [section]");
      for (const auto& [key, value] : entries) set_value(table, section + "." + key, trimmed(value.data()));
    }
  }
  for (const auto& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos) config_error(ov, "override must have the form section.key=value");
    set_value(table, trimmed(ov.substr(0, eq)), trimmed(ov.substr(eq + 1)));
  }
  return table;
}

ExperimentConfig to_experiment(const ConfigTable& table) {
  const TableReader in(table);
  ExperimentConfig cfg = ExperimentConfig::defaults();
  auto& t = cfg.truth;

  t.q = in.real("truth.q");
  if (!(t.q > 0.0)) config_error("truth.q", "must be > 0");
  t.r = in.real("truth.r");
  if (!(t.r > 0.0)) config_error("truth.r", "must be > 0");
  t.T = in.real("truth.T");
  if (!(t.T > 0.0)) config_error("truth.T", "must be > 0");
  t.turn_rates.clear();
  for (double deg : in.reals("truth.turn_rates_deg")) t.turn_rates.push_back(deg * std::numbers::pi / 180.0);
  const int n_modes = static_cast<int>(t.turn_rates.size());
  const auto horizon = in.integer("truth.horizon");
  if (horizon < 1 || horizon > 10'000'000) config_error("truth.horizon", "must be >= 1");
  t.horizon = static_cast<int>(horizon);
  const auto x0 = in.reals("truth.x0");
  if (x0.size() != 4) config_error("truth.x0", "expected 4 values (p_x, v_x, p_y, v_y)");
  t.x0 = to_vector(x0);
  const auto r0 = in.integer("truth.r0");
  if (r0 < 1 || r0 > n_modes) config_error("truth.r0", "initial mode must lie in 1..M (1-based)");
  t.initial_mode = static_cast<int>(r0 - 1);
  t.stay_probability = in.real("truth.pi_stay");
  if (t.stay_probability < 0.0 || t.stay_probability > 1.0) config_error("truth.pi_stay", "must lie in [0, 1]");
  if (!in.is_auto("truth.transition")) {
    const auto m = in.matrices("truth.transition");
    if (m.size() != 1 || m.front().rows() != n_modes) config_error("truth.transition", "expected one M x M matrix");
    try {
      MarkovChain check(m.front());
    } catch (const Error& e) {
      config_error("truth.transition", e.what());
    }
    t.transition = m.front();
  }

  FilterConfig base = FilterConfig::defaults(Variant::KL);
  const auto nc = in.integer("filters.nc");
  if (nc < 1) config_error("filters.nc", "number of VB iterations must satisfy N_c >= 1");
  base.n_vb_iters = static_cast<int>(std::min<long long>(nc, 1'000'000));
  base.forgetting = in.real("filters.rho");
  if (!(base.forgetting > 0.0 && base.forgetting <= 1.0)) config_error("filters.rho", "must lie in (0, 1]");
  base.initial_degrees = in.reals("filters.nu0");
  base.initial_scales = in.matrices("filters.sigma0");
  if (!in.is_auto("filters.known_r")) {
    const auto m = in.matrices("filters.known_r");
    if (m.size() != 1) config_error("filters.known_r", "expected a single matrix");
    base.known_R = m.front();
  }
  base.mode_prob_floor = in.real("filters.mode_prob_floor");
  base.equalize_degrees = in.boolean("filters.equalize_degrees");
  cfg.initial_cov_diag = to_vector(in.reals("filters.p0_diag"));

  cfg.filters.clear();
  for (const auto& name : split(in.raw("filters.variants"), ',')) {
    const auto v = parse_variant(name);
    if (!v) config_error("filters.variants", "unknown variant '" + name + "' (expected KL, MM or KNOWN_R)");
    for (const auto& f : cfg.filters) {
      if (f.variant == *v) config_error("filters.variants", "variant '" + name + "' listed twice");
    }
    FilterConfig f = base;
    f.variant = *v;
    if (*v != Variant::KnownR) f.known_R.reset();
    cfg.filters.push_back(std::move(f));
  }

  const auto runs = in.integer("experiment.n_runs");
  if (runs < 1 || runs > 100'000'000) config_error("experiment.n_runs", "must be >= 1");
  cfg.n_runs = static_cast<int>(runs);
  const auto seed = in.integer("experiment.base_seed");
  if (seed < 0) config_error("experiment.base_seed", "must be >= 0");
  cfg.base_seed = static_cast<std::uint64_t>(seed);
  cfg.r_sweep = in.reals("experiment.r_sweep");
  for (double r : cfg.r_sweep) {
    if (!(r > 0.0)) config_error("experiment.r_sweep", "values must be > 0");
  }
  const bool first_auto = in.is_auto("experiment.steady_first");
  const bool last_auto = in.is_auto("experiment.steady_last");
  if (!first_auto || !last_auto) {
    SteadyWindow w = cfg.window();
    if (!first_auto) w.first = static_cast<int>(in.integer("experiment.steady_first"));
    if (!last_auto) w.last = static_cast<int>(in.integer("experiment.steady_last"));
    cfg.steady_window = w;
  }
  const auto threads = in.integer("experiment.threads");
  if (threads < 0 || threads > 4096) config_error("experiment.threads", "must lie in 0..4096");
  cfg.threads = static_cast<int>(threads);

  try {
    cfg.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::Config, e.what());
  }
  return cfg;
}

ExperimentConfig parse_config(const std::string& path, const std::vector<std::string>& overrides) {
  return to_experiment(effective_config_table(path, overrides));
}

std::string render_config(const ConfigTable& table) {
  std::ostringstream os;
  std::string section;
  for (const auto& [key, value] : table) {
    const auto dot = key.find('.');
    const std::string sec = key.substr(0, dot);
    if (sec != section) {
      if (!section.empty()) os << '\n';
      os << '[' << sec << "]\n";
      section = sec;
    }
    os << key.substr(dot + 1) << " = " << value << '\n';
  }
  return os.str();
}

}  // namespace immkl
