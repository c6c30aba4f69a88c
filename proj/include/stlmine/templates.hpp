#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "stlmine/evaluate.hpp"
#include "stlmine/formula.hpp"
#include "stlmine/trajectory.hpp"

namespace stlmine {

/// Formula skeleton whose atom thresholds and interval endpoints are
/// parameter slots. Nodes are stored in pre-order; slots are numbered in
/// pre-order as well. The flat parameter layout of instantiate() is all
/// threshold values first (one per value slot), then (a, b) pairs (two
/// entries per time slot).
class Template {
 public:
  struct Node {
    Op op = Op::Atom;
    std::size_t var = 0;  // Atom only
    Cmp cmp = Cmp::Le;    // Atom only
    int value_slot = -1;  // Atom only
    int time_slot = -1;   // F, G, U only
    int left = -1;
    int right = -1;
  };

  static Template leaf(std::size_t var, Cmp cmp);
  static Template unary(Op op, const Template& t);                      // Not, F, G
  static Template binary(Op op, const Template& l, const Template& r);  // And, Or, U

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t value_slots() const { return n_value_slots_; }
  std::size_t time_slots() const { return n_time_slots_; }
  std::size_t arity() const { return n_value_slots_ + 2 * n_time_slots_; }
  std::size_t var_count() const;
  const std::vector<Node>& nodes() const { return nodes_; }

  /// Canonical placeholder text, also the structural-dedup key.
  std::string skeleton() const;

  Formula instantiate(std::span<const double> params) const;

 private:
  std::vector<Node> nodes_;  // pre-order, root at 0
  std::size_t n_value_slots_ = 0;
  std::size_t n_time_slots_ = 0;

  void assign_slots();
};

/// All templates reachable with at most M nodes over variables x0..x(N-1):
/// atoms for every variable and direction; unary growth by F, G, not;
/// binary growth by and, or, U over node splits l + r = m - 1 with l <= r.
/// Structurally deduplicated, ordered by node count.
std::vector<Template> enumerate_templates(std::size_t M, std::size_t N);

struct ParameterGrid {
  std::vector<double> values;  // thresholds, sorted
  std::vector<double> times;   // interval endpoints, sorted, >= 0

  void validate() const;
  static std::vector<double> linspace(double lo, double hi, std::size_t n);
  /// Ordered (a, b) pairs with a < b drawn from times.
  std::vector<std::pair<double, double>> time_pairs() const;
};

/// Every grid instantiation of t in lexicographic slot order, subsampled
/// down to cap instances (seeded, sorted by instance index) when the full
/// product exceeds cap. cap = 0 means unlimited.
std::vector<Formula> instantiate_grid(const Template& t, const ParameterGrid& grid,
                                      std::size_t cap, std::uint64_t seed);

using Signature = Eigen::VectorXd;

/// Entry j = robustness(f, trajs[j], 0).
Signature signature(const Formula& f, std::span<const Trajectory> trajs, Evaluator& ev);

/// Incremental greedy signature filter: offer() returns true iff the
/// signature's maximum cosine similarity against all previously kept
/// signatures is below tau_sim. Zero-norm signatures count as similar only
/// to other zero-norm signatures.
class SignatureFilter {
 public:
  SignatureFilter(double tau_sim, std::size_t sig_len);

  bool offer(const Signature& sig);
  std::size_t kept() const { return inv_norms_.size() + (has_zero_ ? 1 : 0); }

 private:
  double tau_;
  std::size_t len_;
  std::vector<double> rows_;       // kept signatures, flattened
  std::vector<double> inv_norms_;  // 1/norm per kept row
  bool has_zero_ = false;
};

/// Batch form of the greedy filter, in candidate order.
std::vector<Formula> signature_filter(std::span<const Formula> candidates,
                                      std::span<const Trajectory> trajs, double tau_sim);

}  // namespace stlmine
