#pragma once

// Jump Markov linear systems and the coordinated-turn benchmark scenario.

#include <optional>
#include <random>
#include <vector>

#include "immkl/distributions.hpp"

namespace immkl {

using Rng = std::mt19937_64;

// x_k = F x_{k-1} + G w_{k-1},  w ~ N(0, Q)
struct LinearMode {
  Matrix F;
  Matrix G;
  Matrix Q;
  double turn_rate = 0.0;  // rad/s, metadata only

  // Throws InvalidParameter on inconsistent shapes or non-PSD Q.
  void validate() const;
};

class MarkovChain {
 public:
  // Entry (i, j) is P{r_k = j | r_{k-1} = i}; rows must sum to one.
  explicit MarkovChain(Matrix transition);

  const Matrix& transition() const { return pi_; }
  int size() const { return static_cast<int>(pi_.rows()); }

  // pi_ii = stay, off-diagonals share 1 - stay evenly.
  static MarkovChain uniform_switching(int n_modes, double stay);

 private:
  Matrix pi_;
};

struct JumpMarkovModel {
  std::vector<LinearMode> modes;
  MarkovChain chain;
  Matrix H;

  Eigen::Index state_dim() const { return H.cols(); }
  Eigen::Index meas_dim() const { return H.rows(); }
  int n_modes() const { return static_cast<int>(modes.size()); }

  void validate() const;
};

struct TruthConfig {
  double q = 0.09;
  double r = 200.0;
  double T = 1.0;
  std::vector<double> turn_rates;  // rad/s
  int horizon = 100;
  Vector x0;
  int initial_mode = 1;  // 0-based
  double stay_probability = 0.8;
  std::optional<Matrix> transition;  // replaces the stay/switch pattern when set

  // Scenario defaults: turn rates -4, 0, 4 deg/s, x0 = (0, 10, 0, 10).
  static TruthConfig defaults();

  void validate() const;
};

// Coordinated-turn transition over (p_x, v_x, p_y, v_y).
Matrix ct_transition(double omega, double T);

// q * I_2 kron [[T^4/4, T^3/2], [T^3/2, T^2]]
Matrix ct_process_noise(double q, double T);

// [[r, r/20], [r/20, r]]
Matrix true_measurement_cov(double r);

// Position-only measurement map for the CT state.
Matrix ct_measurement_map();

JumpMarkovModel build_ct_scenario(const TruthConfig& cfg);

// Returns r_0 = initial, r_1, ..., r_{horizon-1}; 0-based indices.
std::vector<int> sample_mode_sequence(const MarkovChain& chain, int initial, int horizon, Rng& rng);

// Draw from N(mean, cov) for PSD cov.
Vector sample_gaussian(const Vector& mean, const Matrix& cov, Rng& rng);

struct Trajectory {
  std::vector<Vector> states;        // x_1 .. x_K
  std::vector<int> modes;            // mode active for each step
  std::vector<Vector> measurements;  // z_1 .. z_K
};

Trajectory simulate_truth(const JumpMarkovModel& model, const TruthConfig& cfg, Rng& rng);

}  // namespace immkl
