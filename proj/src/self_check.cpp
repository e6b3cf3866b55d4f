#include "immkl/self_check.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "immkl/distributions.hpp"
#include "immkl/imm.hpp"
#include "immkl/jmls.hpp"

namespace immkl {

namespace {

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

CheckResult kl_grid() {
  const WeightedInverseWisharts wc{{0.5, 0.5}, {InverseWishart(6.0, scalar(2.0)), InverseWishart(10.0, scalar(4.0))}};
  const auto fused = kl_fuse_iw(wc);
  double best = std::numeric_limits<double>::infinity();
  double best_nu = 0.0;
  double best_s = 0.0;
  for (int i = 0; i <= 318; ++i) {
    const double nu = 4.1 + 0.05 * i;
    for (int j = 0; j <= 198; ++j) {
      const double s = 0.1 + 0.05 * j;
      const double v = weighted_kl_objective(InverseWishart(nu, scalar(s)), wc);
      if (v < best) {
        best = v;
        best_nu = nu;
        best_s = s;
      }
    }
  }
  const bool ok = std::abs(best_nu - fused.degree()) <= 0.05 && std::abs(best_s - fused.scale()(0, 0)) <= 0.05;
  return {"kl_fusion_grid_argmin", ok, "grid argmin (" + fmt(best_nu) + ", " + fmt(best_s) + "), closed form (" +
                                      fmt(fused.degree()) + ", " + fmt(fused.scale()(0, 0)) + ")"};
}

CheckResult kl_probe() {
  Rng rng(7);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double worst = std::numeric_limits<double>::infinity();
  for (int set = 0; set < 5; ++set) {
    WeightedInverseWisharts wc;
    double wsum = 0.0;
    for (int i = 0; i < 3; ++i) {
      Matrix a(2, 2);
      a << unif(rng) - 0.5, unif(rng) - 0.5, unif(rng) - 0.5, unif(rng) - 0.5;
      Matrix s = a * a.transpose() + Matrix::Identity(2, 2) * (1.0 + 10.0 * unif(rng));
      const double nu = 7.0 + 20.0 * unif(rng);
      wc.components.emplace_back(nu, s);
      wc.weights.push_back(0.1 + unif(rng));
      wsum += wc.weights.back();
    }
    for (double& w : wc.weights) w /= wsum;
    const auto fused = kl_fuse_iw(wc);
    const double base = weighted_kl_objective(fused, wc);
    for (double delta : {0.01, 0.1}) {
      for (int sn : {-1, 0, 1}) {
        for (int ss : {-1, 0, 1}) {
          if (sn == 0 && ss == 0) continue;
          const InverseWishart cand(fused.degree() + sn * delta, fused.scale() * (1.0 + ss * delta));
          worst = std::min(worst, weighted_kl_objective(cand, wc) - base);
        }
        for (int e = 0; e < 3; ++e) {
          Matrix dir = Matrix::Zero(2, 2);
          if (e == 2) {
            dir(0, 1) = dir(1, 0) = 1.0;
          } else {
            dir(e, e) = 1.0;
          }
          for (double sign : {-1.0, 1.0}) {
            const InverseWishart cand(fused.degree(), fused.scale() + sign * delta * dir);
            worst = std::min(worst, weighted_kl_objective(cand, wc) - base);
          }
        }
      }
    }
  }
  return {"kl_fusion_local_probe", worst >= -1e-9, "min objective increase " + fmt(worst)};
}

CheckResult normalization() {
  double worst = 0.0;
  for (double nu : {4.0, 8.0, 20.0}) {
    for (double s : {0.5, 2.0, 50.0}) {
      const InverseWishart iw(nu, scalar(s));
      const double z = integrate_half_line([&](double r) { return std::exp(iw_logpdf(iw, scalar(r))); });
      worst = std::max(worst, std::abs(z - 1.0));
    }
  }
  return {"iw_normalization", worst <= 1e-6, "max |integral - 1| = " + fmt(worst)};
}

CheckResult geometric_mean() {
  const WeightedInverseWisharts wc{{0.3, 0.7}, {InverseWishart(6.0, scalar(2.0)), InverseWishart(12.0, scalar(9.0))}};
  const auto fused = kl_fuse_iw(wc);
  const auto log_geo = [&](double r) {
    double s = 0.0;
    for (std::size_t i = 0; i < wc.components.size(); ++i) s += wc.weights[i] * iw_logpdf(wc.components[i], scalar(r));
    return s;
  };
  const double log_z = std::log(integrate_half_line([&](double r) { return std::exp(log_geo(r)); }));
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double r = 0.01 * std::pow(1e4, i / 999.0);
    worst = std::max(worst, std::abs(log_geo(r) - log_z - iw_logpdf(fused, scalar(r))));
  }
  return {"geometric_mean_density", worst <= 1e-8, "max log-density gap " + fmt(worst)};
}

CheckResult equal_degree_fusion() {
  const auto diag = [](double v) { return Matrix(Matrix::Identity(2, 2) * v); };
  const WeightedInverseWisharts equal{{0.4, 0.6}, {InverseWishart(15.0, diag(4.0)), InverseWishart(15.0, diag(30.0))}};
  const auto kl = kl_fuse_iw(equal);
  const auto mm = mm_fuse_iw(equal);
  const bool same = kl.degree() == mm.degree() && kl.scale() == mm.scale();

  ModeBank bank;
  bank.mode_probs = Vector::Constant(2, 0.5);
  for (auto [nu, s] : {std::pair{10.0, 4.0}, std::pair{20.0, 28.0}}) {
    bank.estimates.push_back({{Vector::Zero(4), Matrix::Identity(4, 4)}, InverseWishart(nu, diag(s))});
  }
  const Matrix r_kl = fuse_output(bank, Variant::KL).fused_R;
  const Matrix r_mm = fuse_output(bank, Variant::MM).fused_R;
  const bool differ = (r_kl - diag(16.0 / 9.0)).cwiseAbs().maxCoeff() < 1e-12 &&
                      (r_mm - diag(1.5)).cwiseAbs().maxCoeff() < 1e-12;
  return {"equal_degree_fusion", same && differ,
          "equal degrees identical: " + std::string(same ? "yes" : "no") + "; unequal R_hat KL " + fmt(r_kl(0, 0)) +
              " vs MM " + fmt(r_mm(0, 0))};
}

CheckResult equal_degree_trajectories() {
  TruthConfig truth = TruthConfig::defaults();
  const auto model = build_ct_scenario(truth);
  Rng rng(11);
  const auto traj = simulate_truth(model, truth, rng);
  const GaussianEstimate init{truth.x0, Vector(Vector::Ones(4) * 10.0).asDiagonal()};

  const auto run = [&](Variant v, bool equalize) {
    FilterConfig cfg = FilterConfig::defaults(v);
    cfg.initial_degrees = {20.0, 25.0, 30.0};
    cfg.equalize_degrees = equalize;
    ModeBank bank = initial_bank(cfg, model.n_modes(), model.meas_dim(), init);
    std::vector<Matrix> rs;
    for (const auto& z : traj.measurements) {
      auto step = imm_step(bank, model, z, cfg);
      rs.push_back(step.output.fused_R);
      bank = std::move(step.bank);
    }
    return rs;
  };
  const auto gap = [](const std::vector<Matrix>& a, const std::vector<Matrix>& b) {
    double g = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) g = std::max(g, (a[k] - b[k]).cwiseAbs().maxCoeff());
    return g;
  };
  const double forced = gap(run(Variant::KL, true), run(Variant::MM, true));
  const double free = gap(run(Variant::KL, false), run(Variant::MM, false));
  return {"equal_degree_trajectories", forced <= 1e-10 && free > 1e-10,
          "max R_hat gap with equal degrees " + fmt(forced) + ", with unequal degrees " + fmt(free)};
}

CheckResult vb_regression() {
  const GIWEstimate pred{{Vector::Zero(1), scalar(1.0)}, InverseWishart(6.0, scalar(2.0))};
  const auto res = vb_measurement_update(pred, Vector::Ones(1), scalar(1.0), 2);
  // Two hand iterations: K = 1/(1 + 2.56/3), Sigma = 2 + (1-K)^2 + (1-K).
  const double k = 1.0 / (1.0 + 2.56 / 3.0);
  const double expected = 2.0 + (1.0 - k) * (1.0 - k) + (1.0 - k);
  const bool ok = res.estimate.iw->degree() == 7.0 && std::abs(res.estimate.iw->scale()(0, 0) - expected) <= 1e-9;
  return {"vb_update_regression", ok, "nu " + fmt(res.estimate.iw->degree()) + ", Sigma " + fmt(res.estimate.iw->scale()(0, 0))};
}

}  // namespace

double integrate_half_line(const std::function<double(double)>& f) {
  const double tol = 1e-13;
  boost::math::quadrature::tanh_sinh<double> inner;
  boost::math::quadrature::exp_sinh<double> outer;
  return inner.integrate(f, 0.0, 1.0, tol) + outer.integrate(f, 1.0, std::numeric_limits<double>::infinity(), tol);
}

std::vector<CheckResult> run_self_checks() {
  std::vector<CheckResult> out;
  for (auto check : {kl_grid, kl_probe, normalization, geometric_mean, equal_degree_fusion, equal_degree_trajectories,
                     vb_regression}) {
    try {
      out.push_back(check());
    } catch (const std::exception& e) {
      out.push_back({"exception", false, e.what()});
    }
  }
  return out;
}

}  // namespace immkl
