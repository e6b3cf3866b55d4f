#include "immkl/imm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <sstream>

namespace immkl {

namespace {

void require(bool ok, ErrorKind kind, const std::string& what) {
  if (!ok) throw Error(kind, what);
}

double mean_of(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

void equalize_bank_degrees(ModeBank& bank) {
  std::vector<double> degrees;
  for (const auto& e : bank.estimates) {
    if (!e.iw) return;
    degrees.push_back(e.iw->degree());
  }
  const double common = mean_of(degrees);
  for (auto& e : bank.estimates) e.iw = InverseWishart(common, e.iw->scale());
}

WeightedInverseWisharts iw_components(const ModeBank& bank, std::vector<double> weights) {
  WeightedInverseWisharts wc;
  wc.weights = std::move(weights);
  for (const auto& e : bank.estimates) {
    require(e.iw.has_value(), ErrorKind::InvalidParameter, "mode estimate lacks an inverse-Wishart part");
    wc.components.push_back(*e.iw);
  }
  return wc;
}

// Renormalizes away accumulated rounding so the weights pass validate_weights.
std::vector<double> as_weights(const Eigen::Ref<const Vector>& v) {
  std::vector<double> w(v.data(), v.data() + v.size());
  double s = 0.0;
  for (double x : w) s += x;
  for (double& x : w) x /= s;
  return w;
}

struct KalmanGain {
  Matrix S;
  Matrix K;
};

KalmanGain kalman_gain(const Matrix& P, const Matrix& H, const Matrix& R) {
  Matrix S = symmetrized(H * P * H.transpose() + R);
  Eigen::LLT<Matrix> llt(S);
  require(llt.info() == Eigen::Success && S.allFinite(), ErrorKind::InnovationCovariance,
          "innovation covariance is not positive definite");
  // K = P H^T S^{-1}
  Matrix K = llt.solve(H * P.transpose()).transpose();
  return {std::move(S), std::move(K)};
}

}  // namespace

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::KL: return "KL";
    case Variant::MM: return "MM";
    case Variant::KnownR: return "KNOWN_R";
  }
  return "?";
}

std::optional<Variant> parse_variant(std::string_view s) {
  std::string up;
  for (char c : s) up.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  if (up == "KL") return Variant::KL;
  if (up == "MM") return Variant::MM;
  if (up == "KNOWN_R" || up == "KNOWNR" || up == "KF") return Variant::KnownR;
  return std::nullopt;
}

void ModeBank::validate() const {
  require(!estimates.empty() && mode_probs.size() == size(), ErrorKind::DimensionMismatch,
          "mode bank: probability vector length differs from estimate count");
  for (Eigen::Index i = 0; i < mode_probs.size(); ++i) {
    require(mode_probs(i) >= 0.0 && mode_probs(i) <= 1.0, ErrorKind::InvalidParameter,
            "mode probabilities must lie in [0, 1]");
  }
  require(std::abs(mode_probs.sum() - 1.0) <= 1e-10, ErrorKind::InvalidParameter,
          "mode probabilities must sum to 1");
}

FilterConfig FilterConfig::defaults(Variant v) {
  FilterConfig cfg;
  cfg.variant = v;
  cfg.initial_scales = {Matrix::Identity(2, 2) * 50.0};
  return cfg;
}

void FilterConfig::validate(int n_modes, Eigen::Index meas_dim) const {
  require(n_vb_iters >= 1, ErrorKind::Config, "filters.nc: number of VB iterations N_c must be >= 1");
  require(forgetting > 0.0 && forgetting <= 1.0, ErrorKind::Config, "filters.rho: forgetting must lie in (0, 1]");
  require(mode_prob_floor >= 0.0 && mode_prob_floor * n_modes < 1.0, ErrorKind::Config,
          "filters.mode_prob_floor: floor must be >= 0 and below 1/M");
  if (variant == Variant::KnownR) {
    require(known_R.has_value(), ErrorKind::Config, "known_R is required for the KNOWN_R variant");
    require(known_R->rows() == meas_dim && known_R->cols() == meas_dim, ErrorKind::Config,
            "known_R dimension differs from measurement dimension");
    require(Eigen::LLT<Matrix>(*known_R).info() == Eigen::Success, ErrorKind::Config,
            "known_R must be positive definite");
    return;
  }
  const auto per_mode_ok = [&](std::size_t n) { return n == 1 || n == static_cast<std::size_t>(n_modes); };
  require(per_mode_ok(initial_degrees.size()), ErrorKind::Config,
          "filters.nu0: give one degree or one per mode");
  require(per_mode_ok(initial_scales.size()), ErrorKind::Config,
          "filters.sigma0: give one scale or one per mode");
  for (double nu : initial_degrees) {
    std::ostringstream os;
    os << "filters.nu0: initial degree " << nu << " must exceed 2m + 2 = " << 2 * meas_dim + 2;
    require(nu > 2.0 * static_cast<double>(meas_dim) + 2.0, ErrorKind::Config, os.str());
  }
  for (const auto& s : initial_scales) {
    require(s.rows() == meas_dim && s.cols() == meas_dim, ErrorKind::Config,
            "filters.sigma0: scale dimension differs from measurement dimension");
    require(Eigen::LLT<Matrix>(s).info() == Eigen::Success, ErrorKind::Config,
            "filters.sigma0: scale must be positive definite");
  }
}

ModeBank initial_bank(const FilterConfig& cfg, int n_modes, Eigen::Index meas_dim,
                      const GaussianEstimate& initial) {
  cfg.validate(n_modes, meas_dim);
  ModeBank bank;
  bank.mode_probs = Vector::Constant(n_modes, 1.0 / n_modes);
  for (int j = 0; j < n_modes; ++j) {
    GIWEstimate e{initial, std::nullopt};
    if (cfg.variant != Variant::KnownR) {
      const auto pick = [j](const auto& v) { return v.size() == 1 ? v.front() : v[static_cast<std::size_t>(j)]; };
      e.iw = InverseWishart(pick(cfg.initial_degrees), pick(cfg.initial_scales));
    }
    bank.estimates.push_back(std::move(e));
  }
  return bank;
}

MixingProbabilities mixing_probabilities(const MarkovChain& chain, const Vector& mu) {
  const int M = chain.size();
  require(mu.size() == M, ErrorKind::DimensionMismatch, "mixing: mode probability length differs from chain");
  const Matrix& pi = chain.transition();
  MixingProbabilities out{Matrix(M, M), Vector(M)};
  for (int j = 0; j < M; ++j) {
    double c = 0.0;
    for (int l = 0; l < M; ++l) c += pi(l, j) * mu(l);
    if (c == 0.0) {
      std::ostringstream os;
      os << "mode " << j << " is unreachable: mixing normalizer is zero";
      throw Error(ErrorKind::DegenerateMode, os.str());
    }
    out.normalizers(j) = c;
    for (int i = 0; i < M; ++i) out.weights(i, j) = pi(i, j) * mu(i) / c;
  }
  return out;
}

std::vector<GIWEstimate> mix_states(const ModeBank& bank, const Matrix& mixing, Variant variant) {
  const int M = bank.size();
  require(mixing.rows() == M && mixing.cols() == M, ErrorKind::DimensionMismatch,
          "mix_states: mixing matrix size differs from bank");
  std::vector<GIWEstimate> out;
  out.reserve(static_cast<std::size_t>(M));
  for (int j = 0; j < M; ++j) {
    const auto weights = as_weights(mixing.col(j));
    WeightedGaussians wg{weights, {}};
    for (const auto& e : bank.estimates) wg.components.push_back(e.gaussian);
    GIWEstimate mixed{moment_match_gaussians(wg), std::nullopt};
    if (variant == Variant::KL) {
      mixed.iw = kl_fuse_iw(iw_components(bank, weights));
    } else if (variant == Variant::MM) {
      mixed.iw = mm_fuse_iw(iw_components(bank, weights));
    }
    out.push_back(std::move(mixed));
  }
  return out;
}

GIWEstimate time_update(const GIWEstimate& est, const LinearMode& mode, double forgetting) {
  GIWEstimate out;
  out.gaussian.mean = mode.F * est.gaussian.mean;
  out.gaussian.cov = symmetrized(mode.F * est.gaussian.cov * mode.F.transpose() +
                                 mode.G * mode.Q * mode.G.transpose());
  if (est.iw) {
    if (forgetting == 1.0) {
      out.iw = est.iw;
    } else {
      const double offset = 2.0 * est.iw->dim() + 2.0;
      out.iw = InverseWishart(forgetting * (est.iw->degree() - offset) + offset, forgetting * est.iw->scale());
    }
  }
  return out;
}

UpdateResult vb_measurement_update(const GIWEstimate& pred, const Vector& z, const Matrix& H, int n_iters) {
  require(pred.iw.has_value(), ErrorKind::InvalidParameter, "vb_measurement_update needs an inverse-Wishart part");
  require(n_iters >= 1, ErrorKind::InvalidParameter, "vb_measurement_update: N_c must be >= 1");
  const InverseWishart& iw = *pred.iw;
  const int m = iw.dim();
  require(z.size() == m && H.rows() == m && H.cols() == pred.gaussian.dim(), ErrorKind::DimensionMismatch,
          "vb_measurement_update: dimension mismatch");
  const Vector& x_pred = pred.gaussian.mean;
  const Matrix& P_pred = pred.gaussian.cov;
  const double offset = 2.0 * m + 2.0;

  // Predictive likelihood with R at the predicted inverse-Wishart mean.
  const Matrix R_pred = iw_mean(iw);
  const GaussianEstimate predictive{H * x_pred, symmetrized(H * P_pred * H.transpose() + R_pred)};
  double log_lik = 0.0;
  try {
    log_lik = gaussian_logpdf(predictive, z);
  } catch (const Error& e) {
    throw Error(ErrorKind::InnovationCovariance, e.what());
  }

  const double degree = iw.degree() + 1.0;
  Matrix scale = iw.scale();
  Vector x = x_pred;
  Matrix P = P_pred;
  for (int l = 0; l < n_iters; ++l) {
    const Matrix R_hat = scale / (degree - offset);
    const auto [S, K] = kalman_gain(P_pred, H, R_hat);
    x = x_pred + K * (z - H * x_pred);
    P = symmetrized(P_pred - K * S * K.transpose());
    const Vector resid = z - H * x;
    scale = symmetrized(iw.scale() + resid * resid.transpose() + H * P * H.transpose());
  }
  return {GIWEstimate{{std::move(x), std::move(P)}, InverseWishart(degree, std::move(scale))}, std::exp(log_lik),
          log_lik};
}

UpdateResult kf_measurement_update(const GaussianEstimate& pred, const Vector& z, const Matrix& H,
                                   const Matrix& R) {
  require(z.size() == H.rows() && H.cols() == pred.dim() && R.rows() == H.rows() && R.cols() == H.rows(),
          ErrorKind::DimensionMismatch, "kf_measurement_update: dimension mismatch");
  const auto [S, K] = kalman_gain(pred.cov, H, R);
  const double log_lik = gaussian_logpdf({H * pred.mean, S}, z);
  GaussianEstimate post{pred.mean + K * (z - H * pred.mean), symmetrized(pred.cov - K * S * K.transpose())};
  return {GIWEstimate{std::move(post), std::nullopt}, std::exp(log_lik), log_lik};
}

Vector update_mode_probabilities(std::span<const double> likelihoods, const MarkovChain& chain,
                                 const Vector& mu_prev) {
  const int M = chain.size();
  require(static_cast<int>(likelihoods.size()) == M && mu_prev.size() == M, ErrorKind::DimensionMismatch,
          "update_mode_probabilities: length mismatch");
  double max_lik = 0.0;
  for (double l : likelihoods) {
    require(l >= 0.0 && !std::isnan(l), ErrorKind::InvalidParameter, "likelihoods must be nonnegative");
    max_lik = std::max(max_lik, l);
  }
  require(max_lik > 0.0 && std::isfinite(max_lik), ErrorKind::Underflow,
          "all mode likelihoods vanished; mode probabilities are undefined");
  const Vector predicted = chain.transition().transpose() * mu_prev;
  Vector mu(M);
  for (int j = 0; j < M; ++j) mu(j) = likelihoods[static_cast<std::size_t>(j)] / max_lik * predicted(j);
  const double denom = mu.sum();
  require(denom > 0.0, ErrorKind::Underflow, "mode probability normalizer is zero");
  return mu / denom;
}

StepOutput fuse_output(const ModeBank& bank, Variant variant, const std::optional<Matrix>& known_R) {
  bank.validate();
  const auto weights = as_weights(bank.mode_probs);
  WeightedGaussians wg{weights, {}};
  for (const auto& e : bank.estimates) wg.components.push_back(e.gaussian);

  StepOutput out;
  out.fused_state = moment_match_gaussians(wg);
  out.mode_probs = bank.mode_probs;
  out.per_mode = bank;
  switch (variant) {
    case Variant::KL:
      out.fused_iw = kl_fuse_iw(iw_components(bank, weights));
      out.fused_R = iw_mean(*out.fused_iw);
      break;
    case Variant::MM: {
      const auto wc = iw_components(bank, weights);
      out.fused_iw = mm_fuse_iw(wc);
      const int m = wc.components.front().dim();
      out.fused_R = Matrix::Zero(m, m);
      for (std::size_t j = 0; j < weights.size(); ++j) {
        if (weights[j] > 0.0) out.fused_R += weights[j] * iw_mean(wc.components[j]);
      }
      break;
    }
    case Variant::KnownR:
      if (known_R) out.fused_R = *known_R;
      break;
  }
  return out;
}

StepResult imm_step(const ModeBank& bank_in, const JumpMarkovModel& model, const Vector& z,
                    const FilterConfig& cfg) {
  require(bank_in.size() == model.n_modes(), ErrorKind::DimensionMismatch, "bank size differs from mode count");
  bank_in.validate();
  ModeBank bank = bank_in;
  if (cfg.equalize_degrees) equalize_bank_degrees(bank);

  // Step 1: interaction.
  const auto mixing = mixing_probabilities(model.chain, bank.mode_probs);
  const auto mixed = mix_states(bank, mixing.weights, cfg.variant);

  // Step 2: mode-matched filtering.
  ModeBank next;
  std::vector<double> log_liks;
  for (int j = 0; j < model.n_modes(); ++j) {
    const GIWEstimate pred = time_update(mixed[static_cast<std::size_t>(j)],
                                         model.modes[static_cast<std::size_t>(j)], cfg.forgetting);
    UpdateResult upd = cfg.variant == Variant::KnownR
                           ? kf_measurement_update(pred.gaussian, z, model.H, *cfg.known_R)
                           : vb_measurement_update(pred, z, model.H, cfg.n_vb_iters);
    log_liks.push_back(upd.log_likelihood);
    next.estimates.push_back(std::move(upd.estimate));
  }

  // Step 3: mode probabilities, with likelihoods rescaled by their maximum.
  const double max_log = *std::max_element(log_liks.begin(), log_liks.end());
  require(std::isfinite(max_log), ErrorKind::Underflow, "mode log-likelihoods are not finite");
  std::vector<double> scaled;
  for (double ll : log_liks) scaled.push_back(std::exp(ll - max_log));
  next.mode_probs = update_mode_probabilities(scaled, model.chain, bank.mode_probs);
  if (cfg.mode_prob_floor > 0.0) {
    next.mode_probs = next.mode_probs.cwiseMax(cfg.mode_prob_floor);
    next.mode_probs /= next.mode_probs.sum();
  }
  if (cfg.equalize_degrees) equalize_bank_degrees(next);

  // Step 4: fusion.
  StepOutput out = fuse_output(next, cfg.variant, cfg.known_R);
  return {std::move(next), std::move(out)};
}

}  // namespace immkl
