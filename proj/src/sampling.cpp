#include "stlmine/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "stlmine/rng.hpp"

namespace stlmine {

void Mu0Params::validate() const {
  if (!(delta > 0.0)) throw std::invalid_argument("mu0: delta must be positive");
  if (!(b > a)) throw std::invalid_argument("mu0: b must exceed a");
  if (!(s_start > 0.0) || !(s_tv > 0.0))
    throw std::invalid_argument("mu0: sigma parameters must be positive");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("mu0: q must lie in [0,1]");
  if (n_points() < 2) throw std::invalid_argument("mu0: interval shorter than two samples");
}

std::size_t Mu0Params::n_points() const {
  return static_cast<std::size_t>(std::floor((b - a) / delta + 1e-9));
}

Trajectory sample_mu0(const Mu0Params& p, std::size_t dim, std::uint64_t seed) {
  auto rng = make_rng(seed);
  return sample_mu0(p, dim, rng);
}

Trajectory sample_mu0(const Mu0Params& p, std::size_t dim, std::mt19937_64& rng) {
  p.validate();
  const std::size_t n = p.n_points();  // N+1 sample points, N increments
  const std::size_t N = n - 1;
  Trajectory traj(dim, n, p.delta);

  std::normal_distribution<double> start_dist(p.m_start, p.s_start);
  std::normal_distribution<double> tv_dist(p.m_tv, p.s_tv);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<double> levels(N + 1);
  for (std::size_t d = 0; d < dim; ++d) {
    auto x = traj.channel(d);
    x[0] = start_dist(rng);
    const double k_root = tv_dist(rng);
    const double K = k_root * k_root;
    levels[0] = 0.0;
    levels[N] = K;
    for (std::size_t i = 1; i < N; ++i) levels[i] = K * unit(rng);
    std::sort(levels.begin() + 1, levels.begin() + static_cast<long>(N));
    double sign = unit(rng) < 0.5 ? -1.0 : 1.0;
    for (std::size_t i = 1; i <= N; ++i) {
      if (i > 1 && unit(rng) < p.q) sign = -sign;
      x[i] = x[i - 1] + sign * (levels[i] - levels[i - 1]);
    }
  }
  return traj;
}

LabeledDataset gen_linear_dataset(const LinearGenConfig& cfg, std::uint64_t seed) {
  if (cfg.n_points < 2) throw std::invalid_argument("linear benchmark needs >= 2 points");
  LabeledDataset data;
  auto rng = make_rng(seed);
  std::normal_distribution<double> noise(0.0, cfg.noise_std);
  auto gen = [&](double drift) {
    Trajectory traj(1, cfg.n_points, 1.0);
    auto x = traj.channel(0);
    x[0] = cfg.x0;
    for (std::size_t k = 1; k < cfg.n_points; ++k) {
      double w = cfg.noise_std > 0.0 ? noise(rng) : 0.0;
      x[k] = x[k - 1] + drift * x[k - 1] + w;
    }
    return traj;
  };
  data.positives.reserve(cfg.n_pos);
  data.negatives.reserve(cfg.n_neg);
  for (std::size_t i = 0; i < cfg.n_pos; ++i) data.positives.push_back(gen(cfg.drift));
  for (std::size_t i = 0; i < cfg.n_neg; ++i) data.negatives.push_back(gen(-cfg.drift));
  return data;
}

void FDistParams::validate() const {
  if (!(p_leaf > 0.0 && p_leaf < 1.0))
    throw std::invalid_argument("fdist: p_leaf must lie in (0,1)");
  if (max_vars == 0) throw std::invalid_argument("fdist: max_vars must be >= 1");
  if (!(value_hi > value_lo)) throw std::invalid_argument("fdist: empty value range");
  if (!(time_hi > time_lo) || time_lo < 0.0)
    throw std::invalid_argument("fdist: bad time range");
  if (max_depth == 0) throw std::invalid_argument("fdist: max_depth must be >= 1");
}

namespace {

Formula sample_node(const FDistParams& p, std::mt19937_64& rng, std::size_t depth) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (depth + 1 >= p.max_depth || unit(rng) < p.p_leaf) {
    std::uniform_int_distribution<std::size_t> var_dist(0, p.max_vars - 1);
    std::size_t var = var_dist(rng);
    Cmp cmp = unit(rng) < 0.5 ? Cmp::Le : Cmp::Ge;
    std::uniform_real_distribution<double> value(p.value_lo, p.value_hi);
    return Formula::atom(var, cmp, value(rng));
  }
  std::uniform_int_distribution<int> op_dist(0, 5);
  const int op = op_dist(rng);
  auto window = [&]() {
    std::uniform_real_distribution<double> time(p.time_lo, p.time_hi);
    double a = time(rng), b = time(rng);
    while (a == b) b = time(rng);
    if (a > b) std::swap(a, b);
    return Interval(a, b);
  };
  // draws are sequenced explicitly: argument evaluation order is unspecified
  switch (op) {
    case 0:
      return Formula::negation(sample_node(p, rng, depth + 1));
    case 1: {
      Formula l = sample_node(p, rng, depth + 1);
      Formula r = sample_node(p, rng, depth + 1);
      return Formula::conjunction(l, r);
    }
    case 2: {
      Formula l = sample_node(p, rng, depth + 1);
      Formula r = sample_node(p, rng, depth + 1);
      return Formula::disjunction(l, r);
    }
    case 3: {
      Interval w = window();
      return Formula::eventually(w, sample_node(p, rng, depth + 1));
    }
    case 4: {
      Interval w = window();
      return Formula::globally(w, sample_node(p, rng, depth + 1));
    }
    default: {
      Interval w = window();
      Formula l = sample_node(p, rng, depth + 1);
      Formula r = sample_node(p, rng, depth + 1);
      return Formula::until(w, l, r);
    }
  }
}

}  // namespace

Formula sample_formula(const FDistParams& p, std::uint64_t seed) {
  auto rng = make_rng(seed);
  return sample_formula(p, rng);
}

Formula sample_formula(const FDistParams& p, std::mt19937_64& rng) {
  p.validate();
  return sample_node(p, rng, 0);
}

}  // namespace stlmine
