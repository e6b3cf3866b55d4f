#pragma once

// Interacting multiple model filtering with an inverse-Wishart model of the
// unknown measurement-noise covariance.
//
// One cycle: mix the mode-conditioned estimates, run a variational-Bayes
// (or known-R Kalman) update per mode, update the mode probabilities, and
// fuse the mode-conditioned posteriors. The three variants differ only in
// how weighted inverse-Wishart sets are reduced to one:
//
//   KL      - weighted KL barycenter (convex combination of nu and Sigma)
//   MM      - mean matching, see mm_fuse_iw
//   KnownR  - no covariance estimation; R is given

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "immkl/distributions.hpp"
#include "immkl/jmls.hpp"

namespace immkl {

enum class Variant { KL, MM, KnownR };

std::string_view to_string(Variant v);
// Accepts "KL", "MM", "KNOWN_R" (case-insensitive).
std::optional<Variant> parse_variant(std::string_view s);

struct GIWEstimate {
  GaussianEstimate gaussian;
  std::optional<InverseWishart> iw;  // absent for Variant::KnownR
};

struct ModeBank {
  std::vector<GIWEstimate> estimates;
  Vector mode_probs;

  int size() const { return static_cast<int>(estimates.size()); }
  void validate() const;
};

struct FilterConfig {
  Variant variant = Variant::KL;
  int n_vb_iters = 2;
  double forgetting = 1.0;
  std::optional<Matrix> known_R;  // required iff variant == KnownR

  // Either one entry shared by all modes or one per mode.
  std::vector<double> initial_degrees{20.0};
  std::vector<Matrix> initial_scales;
  double mode_prob_floor = 0.0;

  // Test hook: replace every per-mode degree by their mean before each
  // inverse-Wishart fusion.
  bool equalize_degrees = false;

  // initial_scales defaults to diag(50, 50).
  static FilterConfig defaults(Variant v);

  void validate(int n_modes, Eigen::Index meas_dim) const;
};

// Bank at k = 0: every mode starts from `initial` with uniform mode
// probabilities and the configured inverse-Wishart prior.
ModeBank initial_bank(const FilterConfig& cfg, int n_modes, Eigen::Index meas_dim,
                      const GaussianEstimate& initial);

struct MixingProbabilities {
  Matrix weights;      // column j holds mu^{i|j}
  Vector normalizers;  // c_j = sum_l pi_lj mu^l
};

MixingProbabilities mixing_probabilities(const MarkovChain& chain, const Vector& mu);

std::vector<GIWEstimate> mix_states(const ModeBank& bank, const Matrix& mixing, Variant variant);

GIWEstimate time_update(const GIWEstimate& est, const LinearMode& mode, double forgetting);

struct UpdateResult {
  GIWEstimate estimate;
  double likelihood = 0.0;
  double log_likelihood = 0.0;
};

UpdateResult vb_measurement_update(const GIWEstimate& pred, const Vector& z, const Matrix& H, int n_iters);

UpdateResult kf_measurement_update(const GaussianEstimate& pred, const Vector& z, const Matrix& H,
                                   const Matrix& R);

// Throws Underflow when every likelihood-weighted prediction is zero.
Vector update_mode_probabilities(std::span<const double> likelihoods, const MarkovChain& chain,
                                 const Vector& mu_prev);

struct StepOutput {
  GaussianEstimate fused_state;
  Matrix fused_R;
  std::optional<InverseWishart> fused_iw;
  Vector mode_probs;
  ModeBank per_mode;
};

// For KnownR pass the known matrix so fused_R is populated.
StepOutput fuse_output(const ModeBank& bank, Variant variant, const std::optional<Matrix>& known_R = {});

struct StepResult {
  ModeBank bank;
  StepOutput output;
};

StepResult imm_step(const ModeBank& bank, const JumpMarkovModel& model, const Vector& z,
                    const FilterConfig& cfg);

}  // namespace immkl
