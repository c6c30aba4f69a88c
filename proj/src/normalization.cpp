#include "stlmine/normalization.hpp"

#include <cmath>
#include <stdexcept>

namespace stlmine {

namespace {

template <typename Fn>
void for_each_traj(const LabeledDataset& d, Fn&& fn) {
  for (const auto& t : d.positives) fn(t);
  for (const auto& t : d.negatives) fn(t);
}

}  // namespace

DatasetStats compute_stats(const LabeledDataset& d) {
  const std::size_t dim = d.dim();
  if (dim == 0) throw std::invalid_argument("cannot compute stats of an empty dataset");
  DatasetStats s;
  s.mean.assign(dim, 0.0);
  s.std.assign(dim, 0.0);
  std::size_t count = 0;
  for_each_traj(d, [&](const Trajectory& t) {
    count += t.n_points();
    for (std::size_t k = 0; k < dim; ++k)
      for (double v : t.channel(k)) s.mean[k] += v;
  });
  for (std::size_t k = 0; k < dim; ++k) s.mean[k] /= static_cast<double>(count);
  for_each_traj(d, [&](const Trajectory& t) {
    for (std::size_t k = 0; k < dim; ++k)
      for (double v : t.channel(k)) s.std[k] += (v - s.mean[k]) * (v - s.mean[k]);
  });
  for (std::size_t k = 0; k < dim; ++k) {
    s.std[k] = std::sqrt(s.std[k] / static_cast<double>(count));
    if (!(s.std[k] > 1e-12))
      throw std::invalid_argument("zero-variance dimension x" + std::to_string(k));
  }
  return s;
}

Trajectory normalize_trajectory(const Trajectory& t, const DatasetStats& s) {
  if (t.dim() != s.dim()) throw std::invalid_argument("stats dimension mismatch");
  Trajectory out = t;
  for (std::size_t k = 0; k < t.dim(); ++k)
    for (double& v : out.channel(k)) v = (v - s.mean[k]) / s.std[k];
  return out;
}

std::pair<LabeledDataset, DatasetStats> normalize(const LabeledDataset& d) {
  DatasetStats s = compute_stats(d);
  LabeledDataset out;
  out.positives.reserve(d.positives.size());
  out.negatives.reserve(d.negatives.size());
  for (const auto& t : d.positives) out.positives.push_back(normalize_trajectory(t, s));
  for (const auto& t : d.negatives) out.negatives.push_back(normalize_trajectory(t, s));
  return {std::move(out), std::move(s)};
}

LabeledDataset denormalize(const LabeledDataset& d, const DatasetStats& s) {
  if (d.dim() != s.dim()) throw std::invalid_argument("stats dimension mismatch");
  LabeledDataset out = d;
  auto undo = [&](Trajectory& t) {
    for (std::size_t k = 0; k < t.dim(); ++k)
      for (double& v : t.channel(k)) v = v * s.std[k] + s.mean[k];
  };
  for (auto& t : out.positives) undo(t);
  for (auto& t : out.negatives) undo(t);
  return out;
}

namespace {

Formula map_formula(const Formula& f, const DatasetStats* stats, double scale,
                    std::size_t n_test) {
  const bool rescale = stats == nullptr;
  switch (f.op()) {
    case Op::True:
      return f;
    case Op::Atom: {
      if (rescale) return f;
      const auto& a = f.atom();
      if (a.var >= stats->dim())
        throw std::invalid_argument("no stats for variable x" + std::to_string(a.var));
      return Formula::atom(a.var, a.cmp, a.threshold * stats->std[a.var] + stats->mean[a.var]);
    }
    case Op::Not:
      return Formula::negation(map_formula(f.left(), stats, scale, n_test));
    case Op::And:
      return Formula::conjunction(map_formula(f.left(), stats, scale, n_test),
                                  map_formula(f.right(), stats, scale, n_test));
    case Op::Or:
      return Formula::disjunction(map_formula(f.left(), stats, scale, n_test),
                                  map_formula(f.right(), stats, scale, n_test));
    case Op::Eventually:
    case Op::Globally:
    case Op::Until: {
      Interval w = f.window();
      if (rescale) {
        const bool was_unbounded = w.unbounded();
        const double hi = was_unbounded ? 100.0 : w.hi;
        const double lo_scaled = std::floor(w.lo * scale);
        double hi_scaled = lo_scaled + std::ceil((hi - w.lo) * scale);
        if (was_unbounded && hi_scaled >= static_cast<double>(n_test) - 1.0)
          hi_scaled = std::numeric_limits<double>::infinity();
        w = Interval(lo_scaled, hi_scaled);
      }
      if (f.op() == Op::Eventually)
        return Formula::eventually(w, map_formula(f.left(), stats, scale, n_test));
      if (f.op() == Op::Globally)
        return Formula::globally(w, map_formula(f.left(), stats, scale, n_test));
      return Formula::until(w, map_formula(f.left(), stats, scale, n_test),
                            map_formula(f.right(), stats, scale, n_test));
    }
  }
  throw std::logic_error("unreachable");
}

}  // namespace

Formula denormalize_thresholds(const Formula& f, const DatasetStats& s) {
  return map_formula(f, &s, 1.0, 0);
}

Formula rescale_time_bounds(const Formula& f, std::size_t n_test) {
  if (n_test == 0) throw std::invalid_argument("n_test must be >= 1");
  return map_formula(f, nullptr, static_cast<double>(n_test) / 100.0, n_test);
}

}  // namespace stlmine
