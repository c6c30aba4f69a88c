#pragma once

#include <cstdint>
#include <random>

#include "stlmine/formula.hpp"
#include "stlmine/trajectory.hpp"

namespace stlmine {

/// Base-measure trajectory sampler parameters. A trajectory over [a, b]
/// with step delta starts at xi_0 ~ N(m_start, s_start), has total
/// variation K ~ (N(m_tv, s_tv))^2 split uniformly into increments, and
/// changes slope sign with probability q at each step.
struct Mu0Params {
  double delta = 1.0;
  double a = 0.0;
  double b = 100.0;
  double m_start = 0.0;
  double s_start = 1.0;
  double m_tv = 0.0;
  double s_tv = 1.0;
  double q = 0.1;

  void validate() const;  // throws std::invalid_argument
  std::size_t n_points() const;
};

Trajectory sample_mu0(const Mu0Params& p, std::size_t dim, std::uint64_t seed);
Trajectory sample_mu0(const Mu0Params& p, std::size_t dim, std::mt19937_64& rng);

struct LinearGenConfig {
  std::size_t n_pos = 100;
  std::size_t n_neg = 100;
  std::size_t n_points = 100;
  double x0 = 1.0;
  double drift = 0.03;
  double noise_std = 0.2;  // white noise with variance 0.04
};

/// Positives follow x_{k+1} = x_k + drift*x_k + w_k, negatives use -drift;
/// w_k ~ N(0, noise_std^2), Euler step dt = 1.
LabeledDataset gen_linear_dataset(const LinearGenConfig& cfg, std::uint64_t seed);

/// Random formula distribution: each node is an atom with probability
/// p_leaf, otherwise an operator drawn uniformly from {not, and, or, F, G, U}.
/// Nodes at max_depth are forced to atoms.
struct FDistParams {
  double p_leaf = 0.5;
  std::size_t max_vars = 3;
  double value_lo = -4.0;
  double value_hi = 4.0;
  double time_lo = 0.0;
  double time_hi = 100.0;
  std::size_t max_depth = 12;

  void validate() const;
};

Formula sample_formula(const FDistParams& p, std::uint64_t seed);
Formula sample_formula(const FDistParams& p, std::mt19937_64& rng);

}  // namespace stlmine
