#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>

namespace stlmine {

struct GpConfig {
  double noise = 1e-6;  // observation noise variance floor
  bool optimize_hyperparams = true;
  std::size_t restarts = 4;
  std::size_t max_opt_iters = 40;
  std::uint64_t seed = 1234;
  // used as-is when optimization is off, and as one of the starts otherwise
  double lengthscale = 1.0;
  double signal_var = 1.0;
};

/// Gaussian process regression with a Matern 5/2 kernel:
///   k(r) = s^2 (1 + u + u^2/3) exp(-u),  u = sqrt(5) r / ell.
/// Targets are standardized internally; posterior moments are returned on
/// the original scale. Hyperparameters (ell, s^2) maximize the log marginal
/// likelihood by multi-start gradient ascent; noise stays at the floor.
class GpModel {
 public:
  static GpModel fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GpConfig& cfg);

  /// Latent mean and variance (variance clamped at >= 0).
  std::pair<double, double> posterior(const Eigen::VectorXd& x) const;
  void posterior_batch(const Eigen::MatrixXd& Xq, Eigen::VectorXd& mean,
                       Eigen::VectorXd& var) const;

  double ucb(const Eigen::VectorXd& x, double beta) const;
  /// Analytic gradient of the UCB surface at x.
  Eigen::VectorXd ucb_gradient(const Eigen::VectorXd& x, double beta) const;

  const Eigen::MatrixXd& X() const { return X_; }
  double lengthscale() const { return ell_; }
  double signal_var() const { return s2_; }
  double noise() const { return noise_; }
  double log_marginal_likelihood() const { return lml_; }

 private:
  Eigen::MatrixXd X_;
  Eigen::VectorXd alpha_;  // (K + noise I)^-1 y_std
  Eigen::LLT<Eigen::MatrixXd> llt_;
  double ell_ = 1.0;
  double s2_ = 1.0;
  double noise_ = 1e-6;
  double y_mean_ = 0.0;
  double y_std_ = 1.0;
  double lml_ = 0.0;

  Eigen::VectorXd kvec(const Eigen::VectorXd& x) const;
};

}  // namespace stlmine
