#pragma once

// Gaussian and inverse-Wishart primitives used by the IMM filters.
//
// Inverse-Wishart parameterization: IW_m(R; nu, Sigma) with density
//
//   2^{-(nu-m-1)m/2} |Sigma|^{(nu-m-1)/2}
//   ------------------------------------- exp(-tr(R^{-1} Sigma) / 2)
//        Gamma_m((nu-m-1)/2) |R|^{nu/2}
//
// which is the conventional IW(Psi, d) with Psi = Sigma and d = nu - m - 1.
// The density is proper for nu > 2m and the mean Sigma / (nu - 2m - 2) exists
// for nu > 2m + 2.

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "immkl/error.hpp"

namespace immkl {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct GaussianEstimate {
  Vector mean;
  Matrix cov;

  Eigen::Index dim() const { return mean.size(); }
};

class InverseWishart {
 public:
  // Throws InvalidParameter unless scale is SPD and degree > 2 * dim.
  InverseWishart(double degree, Matrix scale);

  double degree() const { return degree_; }
  const Matrix& scale() const { return scale_; }
  int dim() const { return static_cast<int>(scale_.rows()); }

  // Conventional degrees of freedom d = nu - m - 1.
  double conventional_dof() const { return degree_ - dim() - 1.0; }

  bool has_mean() const { return degree_ > 2.0 * dim() + 2.0; }

 private:
  double degree_;
  Matrix scale_;
};

// Convex weights with a list of components. Components with zero weight are
// kept here; the fusion operations drop them before combining.
template <typename T>
struct WeightedComponents {
  std::vector<double> weights;
  std::vector<T> components;
};

using WeightedGaussians = WeightedComponents<GaussianEstimate>;
using WeightedInverseWisharts = WeightedComponents<InverseWishart>;

// Throws InvalidParameter if weights are negative, do not sum to one within
// 1e-12, or do not match the component count.
void validate_weights(std::span<const double> weights, std::size_t n_components);

// (P + P^T) / 2
Matrix symmetrized(const Matrix& m);

double gaussian_logpdf(const GaussianEstimate& g, const Vector& x);

// log Gamma_m(a); requires a > (m - 1) / 2.
double multivariate_log_gamma(int m, double a);

// Multivariate digamma psi_m(a) = sum_j psi(a + (1 - j) / 2).
double multivariate_digamma(int m, double a);

double iw_logpdf(const InverseWishart& iw, const Matrix& r);

// Sigma / (nu - 2m - 2); MeanUndefined when nu <= 2m + 2.
Matrix iw_mean(const InverseWishart& iw);

// Minimizer of sum_i w_i KL(p || p_i): degree and scale combine convexly.
InverseWishart kl_fuse_iw(const WeightedInverseWisharts& wc);

// Closed-form D_KL(p || q).
double iw_kl_divergence(const InverseWishart& p, const InverseWishart& q);

// sum_i w_i D_KL(candidate || p_i)
double weighted_kl_objective(const InverseWishart& candidate,
                             const WeightedInverseWisharts& wc);

GaussianEstimate moment_match_gaussians(const WeightedGaussians& wc);

// Mean-matching reduction used by the moment-matching competitor: the degree
// is the convex combination of component degrees and the scale is chosen so
// that iw_mean(result) = sum_i w_i iw_mean(p_i).
InverseWishart mm_fuse_iw(const WeightedInverseWisharts& wc);

}  // namespace immkl
