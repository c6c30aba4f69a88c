#include "stlmine/templates.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "stlmine/rng.hpp"
#include "stlmine/threading.hpp"

namespace stlmine {

Template Template::leaf(std::size_t var, Cmp cmp) {
  Template t;
  Node n;
  n.op = Op::Atom;
  n.var = var;
  n.cmp = cmp;
  t.nodes_.push_back(n);
  t.assign_slots();
  return t;
}

Template Template::unary(Op op, const Template& inner) {
  if (op != Op::Not && op != Op::Eventually && op != Op::Globally)
    throw std::invalid_argument("unary template op must be not, F or G");
  Template t;
  Node root;
  root.op = op;
  root.left = 1;
  t.nodes_.push_back(root);
  for (const Node& n : inner.nodes_) {
    Node c = n;
    if (c.left >= 0) c.left += 1;
    if (c.right >= 0) c.right += 1;
    t.nodes_.push_back(c);
  }
  t.assign_slots();
  return t;
}

Template Template::binary(Op op, const Template& l, const Template& r) {
  if (op != Op::And && op != Op::Or && op != Op::Until)
    throw std::invalid_argument("binary template op must be and, or or U");
  Template t;
  Node root;
  root.op = op;
  root.left = 1;
  root.right = static_cast<int>(1 + l.nodes_.size());
  t.nodes_.push_back(root);
  for (const Node& n : l.nodes_) {
    Node c = n;
    if (c.left >= 0) c.left += 1;
    if (c.right >= 0) c.right += 1;
    t.nodes_.push_back(c);
  }
  const int off = static_cast<int>(1 + l.nodes_.size());
  for (const Node& n : r.nodes_) {
    Node c = n;
    if (c.left >= 0) c.left += off;
    if (c.right >= 0) c.right += off;
    t.nodes_.push_back(c);
  }
  t.assign_slots();
  return t;
}

void Template::assign_slots() {
  int value_slot = 0;
  int time_slot = 0;
  for (Node& n : nodes_) {
    switch (n.op) {
      case Op::Atom:
        n.value_slot = value_slot++;
        break;
      case Op::Eventually:
      case Op::Globally:
      case Op::Until:
        n.time_slot = time_slot++;
        break;
      default:
        break;
    }
  }
  n_value_slots_ = static_cast<std::size_t>(value_slot);
  n_time_slots_ = static_cast<std::size_t>(time_slot);
}

std::size_t Template::var_count() const {
  std::unordered_set<std::size_t> vars;
  for (const Node& n : nodes_)
    if (n.op == Op::Atom) vars.insert(n.var);
  return vars.size();
}

namespace {

void skeleton_node(const std::vector<Template::Node>& nodes, int idx, std::string& out) {
  const auto& n = nodes[static_cast<std::size_t>(idx)];
  switch (n.op) {
    case Op::True:
      out += "true";
      return;
    case Op::Atom:
      out += 'x';
      out += std::to_string(n.var);
      out += n.cmp == Cmp::Le ? " <= ?" : " >= ?";
      return;
    case Op::Not:
      out += "not (";
      skeleton_node(nodes, n.left, out);
      out += ')';
      return;
    case Op::Eventually:
    case Op::Globally:
      out += n.op == Op::Eventually ? 'F' : 'G';
      out += "[?] (";
      skeleton_node(nodes, n.left, out);
      out += ')';
      return;
    case Op::And:
    case Op::Or:
    case Op::Until:
      out += '(';
      skeleton_node(nodes, n.left, out);
      out += ") ";
      out += n.op == Op::And ? "and" : n.op == Op::Or ? "or" : "U[?]";
      out += " (";
      skeleton_node(nodes, n.right, out);
      out += ')';
      return;
  }
}

Formula build_node(const std::vector<Template::Node>& nodes, int idx,
                   std::span<const double> params, std::size_t n_value_slots) {
  const auto& n = nodes[static_cast<std::size_t>(idx)];
  auto window = [&]() {
    const std::size_t base = n_value_slots + 2 * static_cast<std::size_t>(n.time_slot);
    const double a = params[base];
    const double b = params[base + 1];
    if (!(a < b))
      throw std::invalid_argument("invalid time pair: a must be < b");
    return Interval(a, b);
  };
  switch (n.op) {
    case Op::True:
      return Formula::tt();
    case Op::Atom:
      return Formula::atom(n.var, n.cmp, params[static_cast<std::size_t>(n.value_slot)]);
    case Op::Not:
      return Formula::negation(build_node(nodes, n.left, params, n_value_slots));
    case Op::Eventually:
      return Formula::eventually(window(), build_node(nodes, n.left, params, n_value_slots));
    case Op::Globally:
      return Formula::globally(window(), build_node(nodes, n.left, params, n_value_slots));
    case Op::And:
      return Formula::conjunction(build_node(nodes, n.left, params, n_value_slots),
                                  build_node(nodes, n.right, params, n_value_slots));
    case Op::Or:
      return Formula::disjunction(build_node(nodes, n.left, params, n_value_slots),
                                  build_node(nodes, n.right, params, n_value_slots));
    case Op::Until:
      return Formula::until(window(), build_node(nodes, n.left, params, n_value_slots),
                            build_node(nodes, n.right, params, n_value_slots));
  }
  throw std::logic_error("unreachable");
}

}  // namespace

std::string Template::skeleton() const {
  std::string out;
  skeleton_node(nodes_, 0, out);
  return out;
}

Formula Template::instantiate(std::span<const double> params) const {
  if (params.size() != arity())
    throw std::invalid_argument("template arity " + std::to_string(arity()) + ", got " +
                                std::to_string(params.size()) + " parameters");
  return build_node(nodes_, 0, params, n_value_slots_);
}

std::vector<Template> enumerate_templates(std::size_t M, std::size_t N) {
  if (M < 1 || N < 1) throw std::invalid_argument("enumerate_templates needs M, N >= 1");
  std::vector<std::vector<Template>> by_size(M + 1);
  for (std::size_t i = 0; i < N; ++i) {
    by_size[1].push_back(Template::leaf(i, Cmp::Le));
    by_size[1].push_back(Template::leaf(i, Cmp::Ge));
  }
  for (std::size_t m = 2; m <= M; ++m) {
    auto& out = by_size[m];
    for (Op op : {Op::Eventually, Op::Globally, Op::Not})
      for (const Template& t : by_size[m - 1]) out.push_back(Template::unary(op, t));
    for (Op op : {Op::And, Op::Or, Op::Until})
      for (std::size_t l = 1; 2 * l <= m - 1; ++l) {
        const std::size_t r = m - 1 - l;
        for (const Template& tl : by_size[l])
          for (const Template& tr : by_size[r]) out.push_back(Template::binary(op, tl, tr));
      }
  }
  std::vector<Template> result;
  std::unordered_set<std::string> seen;
  for (std::size_t m = 1; m <= M; ++m)
    for (Template& t : by_size[m])
      if (seen.insert(t.skeleton()).second) result.push_back(std::move(t));
  return result;
}

void ParameterGrid::validate() const {
  if (values.empty() || times.empty()) throw std::invalid_argument("empty parameter grid");
  if (!std::is_sorted(values.begin(), values.end()) ||
      !std::is_sorted(times.begin(), times.end()))
    throw std::invalid_argument("parameter grids must be sorted");
  if (times.front() < 0.0) throw std::invalid_argument("time grid must be non-negative");
}

std::vector<double> ParameterGrid::linspace(double lo, double hi, std::size_t n) {
  if (n < 2 || !(hi > lo)) throw std::invalid_argument("bad linspace");
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return out;
}

std::vector<std::pair<double, double>> ParameterGrid::time_pairs() const {
  std::vector<std::pair<double, double>> pairs;
  for (std::size_t i = 0; i < times.size(); ++i)
    for (std::size_t j = i + 1; j < times.size(); ++j)
      if (times[i] < times[j]) pairs.emplace_back(times[i], times[j]);
  return pairs;
}

std::vector<Formula> instantiate_grid(const Template& t, const ParameterGrid& grid,
                                      std::size_t cap, std::uint64_t seed) {
  grid.validate();
  const auto pairs = grid.time_pairs();
  if (t.time_slots() > 0 && pairs.empty())
    throw std::invalid_argument("time grid yields no valid (a, b) pairs");

  const std::size_t nv = t.value_slots();
  const std::size_t nt = t.time_slots();
  double total_d = 1.0;
  for (std::size_t i = 0; i < nv; ++i) total_d *= static_cast<double>(grid.values.size());
  for (std::size_t i = 0; i < nt; ++i) total_d *= static_cast<double>(pairs.size());
  if (total_d > 1e18) throw std::invalid_argument("parameter grid too large to index");
  const std::uint64_t total = static_cast<std::uint64_t>(total_d);

  std::vector<std::uint64_t> indices;
  if (cap == 0 || total <= cap) {
    indices.resize(total);
    for (std::uint64_t i = 0; i < total; ++i) indices[i] = i;
  } else {
    // seeded distinct subsample, sorted so output order follows instance index
    std::unordered_set<std::uint64_t> picked;
    picked.reserve(cap * 2);
    auto rng = make_rng(seed);
    std::uniform_int_distribution<std::uint64_t> dist(0, total - 1);
    while (picked.size() < cap) picked.insert(dist(rng));
    indices.assign(picked.begin(), picked.end());
    std::sort(indices.begin(), indices.end());
  }

  std::vector<double> params(t.arity());
  std::vector<Formula> out;
  out.reserve(indices.size());
  for (std::uint64_t idx : indices) {
    std::uint64_t rem = idx;
    // least-significant digit = last slot
    for (std::size_t k = nt; k-- > 0;) {
      const std::uint64_t radix = pairs.size();
      const auto& pr = pairs[static_cast<std::size_t>(rem % radix)];
      params[nv + 2 * k] = pr.first;
      params[nv + 2 * k + 1] = pr.second;
      rem /= radix;
    }
    for (std::size_t k = nv; k-- > 0;) {
      const std::uint64_t radix = grid.values.size();
      params[k] = grid.values[static_cast<std::size_t>(rem % radix)];
      rem /= radix;
    }
    out.push_back(t.instantiate(params));
  }
  return out;
}

Signature signature(const Formula& f, std::span<const Trajectory> trajs, Evaluator& ev) {
  Signature sig(trajs.size());
  for (std::size_t j = 0; j < trajs.size(); ++j)
    sig[static_cast<long>(j)] = ev.robustness(f, trajs[j]);
  return sig;
}

SignatureFilter::SignatureFilter(double tau_sim, std::size_t sig_len)
    : tau_(tau_sim), len_(sig_len) {
  if (!(tau_sim > 0.0 && tau_sim <= 1.0))
    throw std::invalid_argument("tau_sim must lie in (0, 1]");
  if (sig_len == 0) throw std::invalid_argument("signature length must be >= 1");
}

bool SignatureFilter::offer(const Signature& sig) {
  if (static_cast<std::size_t>(sig.size()) != len_)
    throw std::invalid_argument("signature length mismatch");
  double sq = 0.0;
  for (long j = 0; j < sig.size(); ++j) sq += sig[j] * sig[j];
  const double norm = std::sqrt(sq);
  if (norm < 1e-12) {
    if (has_zero_) return false;
    has_zero_ = true;
    return true;
  }
  const double inv = 1.0 / norm;
  const std::size_t kept_rows = inv_norms_.size();
  for (std::size_t r = 0; r < kept_rows; ++r) {
    const double* row = rows_.data() + r * len_;
    double dot = 0.0;
    for (std::size_t j = 0; j < len_; ++j) dot += row[j] * sig[static_cast<long>(j)];
    if (dot * inv * inv_norms_[r] >= tau_) return false;
  }
  rows_.insert(rows_.end(), sig.data(), sig.data() + sig.size());
  inv_norms_.push_back(inv);
  return true;
}

std::vector<Formula> signature_filter(std::span<const Formula> candidates,
                                      std::span<const Trajectory> trajs, double tau_sim) {
  std::vector<Signature> sigs(candidates.size());
  parallel_for(candidates.size(), [&](std::size_t begin, std::size_t end, std::size_t) {
    Evaluator ev;
    for (std::size_t i = begin; i < end; ++i) sigs[i] = signature(candidates[i], trajs, ev);
  });
  SignatureFilter filter(tau_sim, trajs.size());
  std::vector<Formula> kept;
  for (std::size_t i = 0; i < candidates.size(); ++i)
    if (filter.offer(sigs[i])) kept.push_back(candidates[i]);
  return kept;
}

}  // namespace stlmine
