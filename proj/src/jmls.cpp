#include "immkl/jmls.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace immkl {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorKind::InvalidParameter, what);
}

// L with L L^T = cov; falls back to a pivoted LDL^T for singular PSD input.
Matrix sampling_factor(const Matrix& cov) {
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::LDLT<Matrix> ldlt(cov);
  if (ldlt.info() != Eigen::Success) {
    throw Error(ErrorKind::SingularMatrix, "sampling covariance is not positive semidefinite");
  }
  const Vector d = ldlt.vectorD().cwiseMax(0.0).cwiseSqrt();
  Matrix l = ldlt.matrixL();
  l = ldlt.transpositionsP().transpose() * l;
  return l * d.asDiagonal();
}

}  // namespace

void LinearMode::validate() const {
  const auto n = F.rows();
  require(n > 0 && F.cols() == n, "mode F must be square");
  require(G.rows() == n, "mode G must have as many rows as F");
  require(Q.rows() == G.cols() && Q.cols() == G.cols(), "mode Q must be p x p with p = cols(G)");
  require((Q - Q.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, Q.cwiseAbs().maxCoeff()),
          "mode Q must be symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> es(Q, Eigen::EigenvaluesOnly);
  require(es.eigenvalues().minCoeff() >= -1e-10 * std::max(1.0, Q.trace()), "mode Q must be PSD");
}

MarkovChain::MarkovChain(Matrix transition) : pi_(std::move(transition)) {
  require(pi_.rows() > 0 && pi_.rows() == pi_.cols(), "transition matrix must be square and non-empty");
  for (Eigen::Index i = 0; i < pi_.rows(); ++i) {
    for (Eigen::Index j = 0; j < pi_.cols(); ++j) {
      require(pi_(i, j) >= 0.0 && pi_(i, j) <= 1.0, "transition probabilities must lie in [0, 1]");
    }
    if (std::abs(pi_.row(i).sum() - 1.0) > 1e-12) {
      std::ostringstream os;
      os << "transition matrix row " << i << " sums to " << pi_.row(i).sum();
      throw Error(ErrorKind::InvalidParameter, os.str());
    }
  }
}

MarkovChain MarkovChain::uniform_switching(int n_modes, double stay) {
  require(n_modes >= 1, "need at least one mode");
  if (n_modes == 1) return MarkovChain(Matrix::Ones(1, 1));
  require(stay >= 0.0 && stay <= 1.0, "stay probability must lie in [0, 1]");
  Matrix pi = Matrix::Constant(n_modes, n_modes, (1.0 - stay) / (n_modes - 1));
  pi.diagonal().setConstant(stay);
  return MarkovChain(std::move(pi));
}

void JumpMarkovModel::validate() const {
  require(!modes.empty(), "model needs at least one mode");
  require(chain.size() == n_modes(), "transition matrix size differs from mode count");
  for (const auto& mode : modes) {
    mode.validate();
    require(mode.F.rows() == H.cols(), "H column count differs from state dimension");
  }
}

TruthConfig TruthConfig::defaults() {
  TruthConfig cfg;
  cfg.turn_rates = {-4.0 * kDeg, 0.0, 4.0 * kDeg};
  cfg.x0 = Vector(4);
  cfg.x0 << 0.0, 10.0, 0.0, 10.0;
  return cfg;
}

void TruthConfig::validate() const {
  require(T > 0.0, "T must be positive");
  require(q > 0.0, "q must be positive");
  require(r > 0.0, "r must be positive");
  require(horizon >= 1, "horizon must be at least 1");
  if (turn_rates.empty()) throw Error(ErrorKind::Config, "turn-rate list is empty");
  require(x0.size() == 4, "x0 must have 4 entries (p_x, v_x, p_y, v_y)");
  require(initial_mode >= 0 && initial_mode < static_cast<int>(turn_rates.size()),
          "initial mode index out of range");
  if (transition) {
    require(transition->rows() == static_cast<Eigen::Index>(turn_rates.size()),
            "transition matrix size differs from turn-rate count");
  }
}

Matrix ct_transition(double omega, double T) {
  double s_over_w = T;   // sin(wT)/w
  double c_over_w = 0.0; // (1 - cos(wT))/w
  const double wt = omega * T;
  if (std::abs(wt) >= 1e-9) {
    s_over_w = std::sin(wt) / omega;
    c_over_w = (1.0 - std::cos(wt)) / omega;
  }
  const double c = std::cos(wt);
  const double s = std::sin(wt);
  Matrix F(4, 4);
  F << 1.0, s_over_w, 0.0, -c_over_w,
       0.0, c,        0.0, -s,
       0.0, c_over_w, 1.0, s_over_w,
       0.0, s,        0.0, c;
  return F;
}

Matrix ct_process_noise(double q, double T) {
  Eigen::Matrix2d block;
  block << std::pow(T, 4) / 4.0, std::pow(T, 3) / 2.0,
           std::pow(T, 3) / 2.0, T * T;
  Matrix Q = Matrix::Zero(4, 4);
  Q.block<2, 2>(0, 0) = q * block;
  Q.block<2, 2>(2, 2) = q * block;
  return Q;
}

Matrix true_measurement_cov(double r) {
  Matrix R(2, 2);
  R << r, r / 20.0,
       r / 20.0, r;
  return R;
}

Matrix ct_measurement_map() {
  Matrix H = Matrix::Zero(2, 4);
  H(0, 0) = 1.0;
  H(1, 2) = 1.0;
  return H;
}

JumpMarkovModel build_ct_scenario(const TruthConfig& cfg) {
  cfg.validate();
  const Matrix Q = ct_process_noise(cfg.q, cfg.T);
  std::vector<LinearMode> modes;
  for (double omega : cfg.turn_rates) {
    modes.push_back({ct_transition(omega, cfg.T), Matrix::Identity(4, 4), Q, omega});
  }
  const int n = static_cast<int>(modes.size());
  MarkovChain chain = cfg.transition ? MarkovChain(*cfg.transition)
                                     : MarkovChain::uniform_switching(n, cfg.stay_probability);
  JumpMarkovModel model{std::move(modes), std::move(chain), ct_measurement_map()};
  model.validate();
  return model;
}

std::vector<int> sample_mode_sequence(const MarkovChain& chain, int initial, int horizon, Rng& rng) {
  require(initial >= 0 && initial < chain.size(), "initial mode index out of range");
  std::vector<int> seq;
  seq.reserve(static_cast<std::size_t>(std::max(horizon, 0)));
  int current = initial;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int k = 0; k < horizon; ++k) {
    if (k > 0) {
      const double u = unif(rng);
      double acc = 0.0;
      int next = chain.size() - 1;
      for (int j = 0; j < chain.size(); ++j) {
        acc += chain.transition()(current, j);
        if (u < acc) {
          next = j;
          break;
        }
      }
      // Guard against round-off in the last cumulative sum landing on a zero-probability state.
      while (chain.transition()(current, next) == 0.0 && next > 0) --next;
      current = next;
    }
    seq.push_back(current);
  }
  return seq;
}

Vector sample_gaussian(const Vector& mean, const Matrix& cov, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector e(mean.size());
  for (Eigen::Index i = 0; i < e.size(); ++i) e(i) = normal(rng);
  return mean + sampling_factor(cov) * e;
}

Trajectory simulate_truth(const JumpMarkovModel& model, const TruthConfig& cfg, Rng& rng) {
  require(model.state_dim() == cfg.x0.size(), "x0 dimension differs from model state dimension");
  const Matrix R = true_measurement_cov(cfg.r);
  require(R.rows() == model.meas_dim(), "measurement dimension differs from noise covariance");

  Trajectory out;
  out.modes = sample_mode_sequence(model.chain, cfg.initial_mode, cfg.horizon, rng);
  out.states.reserve(out.modes.size());
  out.measurements.reserve(out.modes.size());

  Vector x = cfg.x0;
  const Vector zero_w = Vector::Zero(model.modes.front().Q.rows());
  const Vector zero_v = Vector::Zero(model.meas_dim());
  for (int mode : out.modes) {
    const LinearMode& lm = model.modes[static_cast<std::size_t>(mode)];
    x = lm.F * x + lm.G * sample_gaussian(zero_w, lm.Q, rng);
    out.states.push_back(x);
    out.measurements.push_back(model.H * x + sample_gaussian(zero_v, R, rng));
  }
  return out;
}

}  // namespace immkl
