#pragma once

// Deliberately naive reference implementations used to cross-check the
// optimized library code. Everything here favors obviousness over speed:
// explicit window enumeration for the temporal operators, O(n^2) filtering,
// full scans for nearest neighbors, dense inverses for GP posteriors.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "stlmine/embedding.hpp"
#include "stlmine/formula.hpp"
#include "stlmine/trajectory.hpp"
#include "stlmine/vectordb.hpp"

namespace oracle {

using stlmine::Cmp;
using stlmine::Formula;
using stlmine::Op;
using stlmine::Trajectory;

struct Window {
  long lo = 0;  // first index, relative to trace start
  long hi = 0;  // last index (inclusive)
};

// Same index convention as the library: lower bound rounded up, upper bound
// rounded down, clipped at the final sample; empty windows are an error.
inline Window window_at(const stlmine::Interval& iv, double dt, long n, long t,
                        const char* what) {
  long lo = static_cast<long>(std::ceil(iv.lo / dt - 1e-9));
  long hi;
  if (std::isinf(iv.hi))
    hi = n - 1 - t;
  else
    hi = static_cast<long>(std::floor(iv.hi / dt + 1e-9));
  long wlo = t + lo;
  long whi = std::min(t + hi, n - 1);
  if (wlo > whi || wlo > n - 1)
    throw std::runtime_error(std::string("oracle: empty window for ") + what);
  return Window{wlo, whi};
}

inline double rho(const Formula::Node* f, const Trajectory& tr, long t) {
  const long n = static_cast<long>(tr.n_points());
  if (t < 0 || t >= n) throw std::out_of_range("oracle: t outside trace");
  switch (f->op) {
    case Op::True:
      return std::numeric_limits<double>::infinity();
    case Op::Atom: {
      if (f->pred.var >= tr.dim()) throw std::invalid_argument("oracle: missing dimension");
      double x = tr.channel(f->pred.var)[static_cast<std::size_t>(t)];
      return f->pred.cmp == Cmp::Le ? f->pred.threshold - x : x - f->pred.threshold;
    }
    case Op::Not:
      return -rho(f->left.get(), tr, t);
    case Op::And:
      return std::min(rho(f->left.get(), tr, t), rho(f->right.get(), tr, t));
    case Op::Or:
      return std::max(rho(f->left.get(), tr, t), rho(f->right.get(), tr, t));
    case Op::Eventually: {
      Window w = window_at(f->window, tr.dt(), n, t, "F");
      double best = -std::numeric_limits<double>::infinity();
      for (long u = w.lo; u <= w.hi; ++u) best = std::max(best, rho(f->left.get(), tr, u));
      return best;
    }
    case Op::Globally: {
      Window w = window_at(f->window, tr.dt(), n, t, "G");
      double best = std::numeric_limits<double>::infinity();
      for (long u = w.lo; u <= w.hi; ++u) best = std::min(best, rho(f->left.get(), tr, u));
      return best;
    }
    case Op::Until: {
      Window w = window_at(f->window, tr.dt(), n, t, "U");
      double best = -std::numeric_limits<double>::infinity();
      for (long u = w.lo; u <= w.hi; ++u) {
        double m = rho(f->right.get(), tr, u);
        for (long v = t; v <= u; ++v) m = std::min(m, rho(f->left.get(), tr, v));
        best = std::max(best, m);
      }
      return best;
    }
  }
  throw std::logic_error("oracle: unknown op");
}

inline bool sat(const Formula::Node* f, const Trajectory& tr, long t) {
  const long n = static_cast<long>(tr.n_points());
  if (t < 0 || t >= n) throw std::out_of_range("oracle: t outside trace");
  switch (f->op) {
    case Op::True:
      return true;
    case Op::Atom: {
      if (f->pred.var >= tr.dim()) throw std::invalid_argument("oracle: missing dimension");
      double x = tr.channel(f->pred.var)[static_cast<std::size_t>(t)];
      return f->pred.cmp == Cmp::Le ? x <= f->pred.threshold : x >= f->pred.threshold;
    }
    case Op::Not:
      return !sat(f->left.get(), tr, t);
    case Op::And:
      return sat(f->left.get(), tr, t) && sat(f->right.get(), tr, t);
    case Op::Or:
      return sat(f->left.get(), tr, t) || sat(f->right.get(), tr, t);
    case Op::Eventually: {
      Window w = window_at(f->window, tr.dt(), n, t, "F");
      for (long u = w.lo; u <= w.hi; ++u)
        if (sat(f->left.get(), tr, u)) return true;
      return false;
    }
    case Op::Globally: {
      Window w = window_at(f->window, tr.dt(), n, t, "G");
      for (long u = w.lo; u <= w.hi; ++u)
        if (!sat(f->left.get(), tr, u)) return false;
      return true;
    }
    case Op::Until: {
      Window w = window_at(f->window, tr.dt(), n, t, "U");
      for (long u = w.lo; u <= w.hi; ++u) {
        if (!sat(f->right.get(), tr, u)) continue;
        bool all = true;
        for (long v = t; v <= u; ++v)
          if (!sat(f->left.get(), tr, v)) {
            all = false;
            break;
          }
        if (all) return true;
      }
      return false;
    }
  }
  throw std::logic_error("oracle: unknown op");
}

inline double rho(const Formula& f, const Trajectory& tr, long t = 0) {
  return rho(f.raw(), tr, t);
}
inline bool sat(const Formula& f, const Trajectory& tr, long t = 0) {
  return sat(f.raw(), tr, t);
}

// Template count recurrence: 2N atoms at size 1; every size-(m-1) tree under
// each of the 3 unary operators; ordered pairs over the splits l + r = m - 1
// with l <= r (both orders only when l = r) under each of the 3 binary ones.
inline std::uint64_t template_count(std::size_t max_nodes, std::size_t n_vars) {
  std::vector<std::uint64_t> c(max_nodes + 1, 0);
  if (max_nodes >= 1) c[1] = 2 * static_cast<std::uint64_t>(n_vars);
  for (std::size_t m = 2; m <= max_nodes; ++m) {
    std::uint64_t total = 3 * c[m - 1];
    for (std::size_t l = 1; 2 * l <= m - 1; ++l) {
      std::size_t r = m - 1 - l;
      total += 3 * (l == r ? c[l] * c[l] : c[l] * c[r]);
    }
    c[m] = total;
  }
  std::uint64_t sum = 0;
  for (std::size_t m = 1; m <= max_nodes; ++m) sum += c[m];
  return sum;
}

// O(candidates^2) greedy signature filter with explicit cosine similarity.
inline std::vector<std::size_t> filter_indices(const std::vector<Eigen::VectorXd>& sigs,
                                               double tau) {
  std::vector<std::size_t> kept;
  bool kept_zero = false;
  for (std::size_t i = 0; i < sigs.size(); ++i) {
    double ni = sigs[i].norm();
    if (ni < 1e-12) {
      if (!kept_zero) {
        kept_zero = true;
        kept.push_back(i);
      }
      continue;
    }
    bool ok = true;
    for (std::size_t j : kept) {
      double nj = sigs[j].norm();
      if (nj < 1e-12) continue;
      double cosim = sigs[i].dot(sigs[j]) / (ni * nj);
      if (cosim >= tau) {
        ok = false;
        break;
      }
    }
    if (ok) kept.push_back(i);
  }
  return kept;
}

struct ScanHit {
  double distance = 0.0;
  std::uint32_t node_count = 0;
  std::string formula;
};

// Full linear scan over the given shards with the library's tie-break rule
// but independent bookkeeping. Distances use the same canonical accumulation
// (double sum over float32 values) so "identical" can mean bit-identical.
inline std::vector<ScanHit> scan_query(const stlmine::SemanticDb& db,
                                       const Eigen::VectorXd& e, std::size_t k,
                                       const std::vector<stlmine::ShardKey>& keys) {
  std::vector<float> q(static_cast<std::size_t>(e.size()));
  for (std::size_t i = 0; i < q.size(); ++i) q[i] = static_cast<float>(e(static_cast<long>(i)));
  std::vector<ScanHit> all;
  for (const auto& key : keys) {
    const auto* s = db.find(key);
    if (!s) throw std::invalid_argument("oracle: unknown shard");
    for (std::size_t r = 0; r < s->size(); ++r) {
      const float* row = s->embeddings.row(static_cast<long>(r)).data();
      double acc = 0.0;
      for (std::size_t d = 0; d < q.size(); ++d) {
        double diff = static_cast<double>(q[d]) - static_cast<double>(row[d]);
        acc += diff * diff;
      }
      all.push_back(ScanHit{acc, s->node_counts[r], s->formulas[r]});
    }
  }
  std::sort(all.begin(), all.end(), [](const ScanHit& a, const ScanHit& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    if (a.node_count != b.node_count) return a.node_count < b.node_count;
    return a.formula < b.formula;
  });
  if (all.size() > k) all.resize(k);
  for (auto& h : all) h.distance = std::sqrt(h.distance);
  return all;
}

// Dense no-cache GP posterior: explicit kernel matrix inverse, standard
// conditional formulas, standardization recomputed from scratch.
struct DenseGp {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  double ell, s2, noise;

  static double matern(double r, double ell, double s2) {
    double u = std::sqrt(5.0) * r / ell;
    return s2 * (1.0 + u + u * u / 3.0) * std::exp(-u);
  }

  std::pair<double, double> posterior(const Eigen::VectorXd& x) const {
    const auto n = X.rows();
    double ym = y.mean();
    double ys = std::sqrt((y.array() - ym).square().sum() / static_cast<double>(n));
    if (ys < 1e-12) ys = 1.0;
    Eigen::VectorXd yt = (y.array() - ym) / ys;
    Eigen::MatrixXd K(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        K(i, j) = matern((X.row(i) - X.row(j)).norm(), ell, s2);
    K += noise * Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd Kinv = K.inverse();
    Eigen::VectorXd kv(n);
    for (Eigen::Index i = 0; i < n; ++i)
      kv(i) = matern((x.transpose() - X.row(i)).norm(), ell, s2);
    double mean = kv.dot(Kinv * yt);
    double var = s2 - kv.dot(Kinv * kv);
    if (var < 0.0) var = 0.0;
    return {ym + ys * mean, ys * ys * var};
  }
};

}  // namespace oracle
