#include "stlmine/gp.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "stlmine/rng.hpp"

namespace stlmine {

namespace {

constexpr double kSqrt5 = 2.2360679774997896964091736687747;

// Pairwise Euclidean distances between rows of A and rows of B.
Eigen::MatrixXd pairwise_dist(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  Eigen::VectorXd an = A.rowwise().squaredNorm();
  Eigen::VectorXd bn = B.rowwise().squaredNorm();
  Eigen::MatrixXd d2 = an.replicate(1, B.rows()) + bn.transpose().replicate(A.rows(), 1) -
                       2.0 * (A * B.transpose());
  return d2.cwiseMax(0.0).cwiseSqrt();
}

Eigen::MatrixXd matern52(const Eigen::MatrixXd& r, double ell, double s2) {
  Eigen::MatrixXd u = (kSqrt5 / ell) * r;
  return s2 * ((1.0 + u.array() + u.array().square() / 3.0) * (-u.array()).exp()).matrix();
}

// d k / d log(ell), elementwise.
Eigen::MatrixXd matern52_dlogell(const Eigen::MatrixXd& r, double ell, double s2) {
  Eigen::MatrixXd u = (kSqrt5 / ell) * r;
  return s2 * ((u.array().square() / 3.0) * (1.0 + u.array()) * (-u.array()).exp()).matrix();
}

struct LmlResult {
  double value = -std::numeric_limits<double>::infinity();
  double d_logell = 0.0;
  double d_logs2 = 0.0;
  bool ok = false;
};

LmlResult eval_lml(const Eigen::MatrixXd& r, const Eigen::VectorXd& y, double logell,
                   double logs2, double noise, bool want_grad) {
  LmlResult out;
  const auto n = r.rows();
  double ell = std::exp(logell);
  double s2 = std::exp(logs2);
  Eigen::MatrixXd Ks = matern52(r, ell, s2);
  Eigen::MatrixXd K = Ks + noise * Eigen::MatrixXd::Identity(n, n);
  Eigen::LLT<Eigen::MatrixXd> llt(K);
  if (llt.info() != Eigen::Success) return out;
  Eigen::VectorXd alpha = llt.solve(y);
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) logdet += std::log(llt.matrixL()(i, i));
  out.value = -0.5 * y.dot(alpha) - logdet - 0.5 * static_cast<double>(n) * std::log(2.0 * M_PI);
  out.ok = std::isfinite(out.value);
  if (!out.ok || !want_grad) return out;
  // dLML/dtheta = 0.5 tr((alpha alpha^T - K^-1) dK/dtheta)
  Eigen::MatrixXd Kinv = llt.solve(Eigen::MatrixXd::Identity(n, n));
  Eigen::MatrixXd A = alpha * alpha.transpose() - Kinv;
  Eigen::MatrixXd dKl = matern52_dlogell(r, ell, s2);
  out.d_logell = 0.5 * A.cwiseProduct(dKl).sum();
  out.d_logs2 = 0.5 * A.cwiseProduct(Ks).sum();
  return out;
}

}  // namespace

GpModel GpModel::fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GpConfig& cfg) {
  if (X.rows() == 0) throw std::invalid_argument("gp_fit: empty training set");
  if (X.rows() != y.size()) throw std::invalid_argument("gp_fit: X and y size mismatch");
  if (!(cfg.noise > 0.0)) throw std::invalid_argument("gp_fit: noise must be positive");

  GpModel m;
  m.X_ = X;
  m.noise_ = cfg.noise;

  const auto n = X.rows();
  m.y_mean_ = y.mean();
  double var = (y.array() - m.y_mean_).square().sum() / static_cast<double>(n);
  m.y_std_ = std::sqrt(var);
  if (m.y_std_ < 1e-12) m.y_std_ = 1.0;
  Eigen::VectorXd ys = (y.array() - m.y_mean_) / m.y_std_;

  Eigen::MatrixXd r = pairwise_dist(X, X);

  // Near-duplicate rows make K singular at the noise floor; bump the jitter.
  double min_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) min_d = std::min(min_d, r(i, j));
  if (n > 1 && min_d < 1e-12) m.noise_ = std::max(m.noise_, 1e-8);

  // Median pairwise distance as the length-scale anchor.
  double dmed = 1.0;
  if (n > 1) {
    std::vector<double> ds;
    ds.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j) ds.push_back(r(i, j));
    std::nth_element(ds.begin(), ds.begin() + ds.size() / 2, ds.end());
    dmed = std::max(ds[ds.size() / 2], 1e-6);
  }

  double best_logell = std::log(std::max(cfg.lengthscale, 1e-12));
  double best_logs2 = std::log(std::max(cfg.signal_var, 1e-12));
  if (cfg.optimize_hyperparams) {
    std::vector<std::pair<double, double>> starts;
    starts.emplace_back(std::log(dmed), 0.0);
    starts.emplace_back(std::log(dmed) - std::log(4.0), 0.0);
    starts.emplace_back(std::log(dmed) + std::log(4.0), 0.0);
    starts.emplace_back(std::log(std::max(cfg.lengthscale, 1e-12)),
                        std::log(std::max(cfg.signal_var, 1e-12)));
    auto rng = make_rng(derive_seed(cfg.seed, 0x6B11));
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    while (starts.size() < cfg.restarts + 4) {
      double a = unit(rng);
      double b = unit(rng);
      starts.emplace_back(std::log(dmed) + 2.0 * a, b);
    }

    double best_val = -std::numeric_limits<double>::infinity();
    for (auto [logell, logs2] : starts) {
      double step = 0.1;
      LmlResult cur = eval_lml(r, ys, logell, logs2, m.noise_, true);
      if (!cur.ok) continue;
      for (std::size_t it = 0; it < cfg.max_opt_iters; ++it) {
        double gnorm = std::hypot(cur.d_logell, cur.d_logs2);
        if (gnorm < 1e-8) break;
        bool advanced = false;
        for (int half = 0; half < 12; ++half) {
          double nl = logell + step * cur.d_logell / gnorm;
          double ns = logs2 + step * cur.d_logs2 / gnorm;
          nl = std::clamp(nl, std::log(1e-4), std::log(1e4));
          ns = std::clamp(ns, std::log(1e-6), std::log(1e6));
          LmlResult nxt = eval_lml(r, ys, nl, ns, m.noise_, true);
          if (nxt.ok && nxt.value > cur.value) {
            logell = nl;
            logs2 = ns;
            cur = nxt;
            step = std::min(step * 1.5, 1.0);
            advanced = true;
            break;
          }
          step *= 0.5;
        }
        if (!advanced) break;
      }
      if (cur.value > best_val) {
        best_val = cur.value;
        best_logell = logell;
        best_logs2 = logs2;
      }
    }
    if (!std::isfinite(best_val))
      throw std::runtime_error("gp_fit: log marginal likelihood not finite at any start");
  }

  m.ell_ = std::exp(best_logell);
  m.s2_ = std::exp(best_logs2);

  Eigen::MatrixXd K = matern52(r, m.ell_, m.s2_);
  double jitter = 0.0;
  for (;;) {
    Eigen::MatrixXd Kn =
        K + (m.noise_ + jitter) * Eigen::MatrixXd::Identity(n, n);
    m.llt_.compute(Kn);
    if (m.llt_.info() == Eigen::Success) break;
    jitter = (jitter == 0.0) ? 1e-12 : jitter * 10.0;
    if (jitter > 1e-4) throw std::runtime_error("gp_fit: kernel matrix is not positive definite");
  }
  m.noise_ += jitter;
  m.alpha_ = m.llt_.solve(ys);
  LmlResult final_lml = eval_lml(r, ys, best_logell, best_logs2, m.noise_, false);
  m.lml_ = final_lml.value;
  return m;
}

Eigen::VectorXd GpModel::kvec(const Eigen::VectorXd& x) const {
  const auto n = X_.rows();
  Eigen::VectorXd k(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double rr = (x - X_.row(i).transpose()).norm();
    double u = kSqrt5 * rr / ell_;
    k(i) = s2_ * (1.0 + u + u * u / 3.0) * std::exp(-u);
  }
  return k;
}

std::pair<double, double> GpModel::posterior(const Eigen::VectorXd& x) const {
  if (x.size() != X_.cols()) throw std::invalid_argument("gp_posterior: dimension mismatch");
  Eigen::VectorXd k = kvec(x);
  double mean_s = k.dot(alpha_);
  Eigen::VectorXd v = llt_.matrixL().solve(k);
  double var_s = s2_ - v.squaredNorm();
  if (var_s < 0.0) {
    if (var_s < -1e-6) throw std::runtime_error("gp_posterior: negative variance");
    var_s = 0.0;
  }
  return {y_mean_ + y_std_ * mean_s, y_std_ * y_std_ * var_s};
}

void GpModel::posterior_batch(const Eigen::MatrixXd& Xq, Eigen::VectorXd& mean,
                              Eigen::VectorXd& var) const {
  if (Xq.cols() != X_.cols()) throw std::invalid_argument("gp_posterior: dimension mismatch");
  Eigen::MatrixXd r = pairwise_dist(Xq, X_);
  Eigen::MatrixXd Kq = matern52(r, ell_, s2_);
  Eigen::VectorXd mean_s = Kq * alpha_;
  Eigen::MatrixXd V = llt_.matrixL().solve(Kq.transpose());
  Eigen::VectorXd var_s =
      (s2_ - V.colwise().squaredNorm().transpose().array()).cwiseMax(0.0).matrix();
  mean = (y_mean_ + y_std_ * mean_s.array()).matrix();
  var = (y_std_ * y_std_ * var_s.array()).matrix();
}

double GpModel::ucb(const Eigen::VectorXd& x, double beta) const {
  auto [mu, v] = posterior(x);
  return mu + std::sqrt(beta) * std::sqrt(v);
}

Eigen::VectorXd GpModel::ucb_gradient(const Eigen::VectorXd& x, double beta) const {
  if (x.size() != X_.cols()) throw std::invalid_argument("ucb_gradient: dimension mismatch");
  const auto n = X_.rows();
  Eigen::VectorXd k = kvec(x);
  // grad of k(x, x_i) wrt x: -(5 s^2 / (3 ell^2)) (1 + u) exp(-u) (x - x_i)
  Eigen::MatrixXd gk(n, X_.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd diff = x - X_.row(i).transpose();
    double rr = diff.norm();
    double u = kSqrt5 * rr / ell_;
    double c = -(5.0 * s2_ / (3.0 * ell_ * ell_)) * (1.0 + u) * std::exp(-u);
    gk.row(i) = (c * diff).transpose();
  }
  Eigen::VectorXd grad_mean = gk.transpose() * alpha_;
  Eigen::VectorXd kinv_k = llt_.solve(k);
  double var_s = std::max(s2_ - k.dot(kinv_k), 0.0);
  Eigen::VectorXd grad_var = -2.0 * (gk.transpose() * kinv_k);
  double sigma = std::sqrt(var_s);
  Eigen::VectorXd grad_std = sigma > 1e-12
                                 ? (grad_var / (2.0 * sigma)).eval()
                                 : Eigen::VectorXd::Zero(X_.cols()).eval();
  return y_std_ * (grad_mean + std::sqrt(beta) * grad_std);
}

}  // namespace stlmine
