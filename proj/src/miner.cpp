#include "stlmine/miner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>

#include "stlmine/parser.hpp"
#include "stlmine/rng.hpp"

namespace stlmine {

namespace {
constexpr std::uint64_t kInitSalt = 0x1B170000ull;
constexpr std::uint64_t kAcquireSalt = 0xAC000000ull;
}  // namespace

double objective_g(const Formula& f, const LabeledDataset& data, Evaluator& ev) {
  if (data.positives.empty() || data.negatives.empty())
    throw std::invalid_argument("objective_g: both classes must be non-empty");
  auto moments = [&](const std::vector<Trajectory>& trajs) {
    double mean = 0.0;
    std::vector<double> rho(trajs.size());
    for (std::size_t i = 0; i < trajs.size(); ++i) {
      rho[i] = ev.robustness(f, trajs[i], 0);
      mean += rho[i];
    }
    mean /= static_cast<double>(trajs.size());
    double var = 0.0;
    for (double r : rho) var += (r - mean) * (r - mean);
    var /= static_cast<double>(trajs.size());
    return std::pair<double, double>{mean, std::sqrt(var)};
  };
  auto [mp, sp] = moments(data.positives);
  auto [mn, sn] = moments(data.negatives);
  return (mp - mn) / (sp + sn + 1e-9);
}

double beta_schedule(std::size_t t, double cap) {
  if (t == 0) throw std::invalid_argument("beta_schedule: t is 1-based");
  double tt = static_cast<double>(t);
  return std::min(2.0 * std::log(tt * tt * M_PI * M_PI / 0.6), cap);
}

void BoConfig::validate() const {
  if (maxiter == 0) throw std::invalid_argument("bo config: maxiter must be positive");
  if (epsilon < 0.0) throw std::invalid_argument("bo config: epsilon must be >= 0");
  if (initial_batch < 2)
    throw std::invalid_argument("bo config: initial_batch must be at least 2");
  if (q == 0) throw std::invalid_argument("bo config: q must be positive");
  if (retrieval_depth == 0)
    throw std::invalid_argument("bo config: retrieval_depth must be positive");
  if (candidate_pool == 0)
    throw std::invalid_argument("bo config: candidate_pool must be positive");
  if (patience == 0) throw std::invalid_argument("bo config: patience must be positive");
  if (beta_cap <= 0.0) throw std::invalid_argument("bo config: beta_cap must be positive");
  if (acquisition == Acquisition::Gradient) {
    if (grad_starts == 0 || grad_steps == 0)
      throw std::invalid_argument("bo config: gradient mode needs starts and steps");
    if (!(grad_lr > 0.0)) throw std::invalid_argument("bo config: grad_lr must be positive");
  }
}

namespace {

struct ShardView {
  std::vector<std::size_t> shard_idx;  // indices into db.shards()
  std::vector<std::size_t> offsets;    // prefix sums, offsets.back() = total
  std::vector<ShardKey> keys;

  std::pair<std::size_t, std::size_t> locate(std::size_t flat) const {
    auto it = std::upper_bound(offsets.begin(), offsets.end(), flat);
    std::size_t si = static_cast<std::size_t>(it - offsets.begin()) - 1;
    return {shard_idx[si], flat - offsets[si]};
  }
};

ShardView select_shards(const SemanticDb& db, std::uint32_t level, std::size_t max_vars) {
  ShardView v;
  v.offsets.push_back(0);
  const auto& shards = db.shards();
  for (std::size_t i = 0; i < shards.size(); ++i) {
    const auto& s = shards[i];
    if (s.key.max_nodes != level || s.key.n_vars > max_vars || s.size() == 0) continue;
    v.shard_idx.push_back(i);
    v.keys.push_back(s.key);
    v.offsets.push_back(v.offsets.back() + s.size());
  }
  return v;
}

}  // namespace

std::vector<AcquireResult> acquire(const SemanticDb& db, const GpModel& gp, double beta,
                                   std::span<const ShardKey> keys, const AcquireOptions& opt) {
  if (opt.q == 0) throw std::invalid_argument("acquire: q must be positive");
  if (beta < 0.0) throw std::invalid_argument("acquire: beta must be >= 0");

  ShardView view;
  view.offsets.push_back(0);
  const auto& shards = db.shards();
  for (const auto& key : keys) {
    for (std::size_t i = 0; i < shards.size(); ++i) {
      if (!(shards[i].key == key)) continue;
      if (shards[i].size() == 0) break;
      view.shard_idx.push_back(i);
      view.offsets.push_back(view.offsets.back() + shards[i].size());
      break;
    }
  }
  std::size_t total = view.offsets.back();
  if (total == 0) throw std::invalid_argument("acquire: no stored rows under the given keys");

  std::set<std::pair<std::size_t, std::size_t>> pool;
  if (opt.pool >= total) {
    for (std::size_t flat = 0; flat < total; ++flat) pool.insert(view.locate(flat));
  } else {
    // seeded subsample without replacement
    std::vector<std::size_t> idx(total);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    auto rng = make_rng(derive_seed(opt.seed, kAcquireSalt));
    for (std::size_t i = 0; i < opt.pool; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, total - 1);
      std::swap(idx[i], idx[pick(rng)]);
      pool.insert(view.locate(idx[i]));
    }
  }
  for (const auto& sr : opt.include_rows) pool.insert(sr);

  std::vector<std::pair<std::size_t, std::size_t>> cand;
  cand.reserve(pool.size());
  for (const auto& sr : pool) {
    const auto& text = shards[sr.first].formulas.at(sr.second);
    if (opt.exclude && opt.exclude->count(text)) continue;
    cand.push_back(sr);
  }
  if (cand.empty()) return {};

  Eigen::MatrixXd Xq(cand.size(), db.dim());
  for (std::size_t i = 0; i < cand.size(); ++i)
    Xq.row(static_cast<long>(i)) =
        db.stored_embedding(cand[i].first, cand[i].second).transpose();
  Eigen::VectorXd mean, var;
  gp.posterior_batch(Xq, mean, var);

  std::vector<std::size_t> order(cand.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<double> score(cand.size());
  for (std::size_t i = 0; i < cand.size(); ++i)
    score[i] = mean(static_cast<long>(i)) +
               std::sqrt(beta) * std::sqrt(std::max(var(static_cast<long>(i)), 0.0));
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (score[a] != score[b]) return score[a] > score[b];
    return cand[a] < cand[b];
  });

  std::vector<AcquireResult> out;
  for (std::size_t i = 0; i < order.size() && out.size() < opt.q; ++i) {
    const auto& sr = cand[order[i]];
    out.push_back(AcquireResult{sr.first, sr.second, shards[sr.first].formulas[sr.second],
                                score[order[i]]});
  }
  return out;
}

namespace {

struct Evaluated {
  Eigen::VectorXd x;
  double g = 0.0;
  std::string text;
};

}  // namespace

MiningResult mine(const LabeledDataset& train, const SemanticDb& db, const ReferenceSet& ref,
                  const BoConfig& cfg, std::uint64_t seed, const LabeledDataset* test) {
  cfg.validate();
  if (train.positives.empty() || train.negatives.empty())
    throw std::invalid_argument("mine: training set needs both classes");
  if (ref.n_train() != db.dim())
    throw std::invalid_argument("mine: reference set does not match the database dimension");

  auto [norm, stats] = normalize(train);
  const std::size_t n_points = norm.n_points();
  const std::size_t dim = norm.dim();

  ShardView view = select_shards(db, cfg.shard_level, dim);
  std::size_t total = view.offsets.back();
  if (total == 0)
    throw std::invalid_argument("mine: no stored formula fits the dataset dimension");

  Evaluator ev;
  // Returns nothing when the formula cannot be scored on this dataset
  // (references a missing dimension, or a window that is empty after
  // rescaling); such texts are recorded as seen and never retried.
  auto eval_g = [&](const std::string& text) -> std::optional<double> {
    Formula f = parse_formula(text);
    if (f.min_dim() > dim) return std::nullopt;
    try {
      Formula ft = rescale_time_bounds(f, n_points);
      return objective_g(ft, norm, ev);
    } catch (const std::exception&) {
      return std::nullopt;
    }
  };

  MiningResult res;
  res.stats = stats;
  std::vector<Evaluated> evaluated;
  std::unordered_set<std::string> seen;
  double best = -std::numeric_limits<double>::infinity();

  auto record = [&](std::size_t iter, std::size_t shard, std::size_t row, double g,
                    const std::string& text) {
    best = std::max(best, g);
    evaluated.push_back(Evaluated{db.stored_embedding(shard, row), g, text});
    res.trace.push_back(TraceEntry{iter, text, g, best});
  };

  // Initial batch: uniform rows over the eligible shards.
  {
    auto rng = make_rng(derive_seed(seed, kInitSalt));
    std::uniform_int_distribution<std::size_t> pick(0, total - 1);
    std::size_t attempts = 0;
    const std::size_t max_attempts = 1000 * cfg.initial_batch + 1000;
    while (evaluated.size() < std::min(cfg.initial_batch, total) &&
           attempts++ < max_attempts) {
      auto [s, r] = view.locate(pick(rng));
      const std::string& text = db.shards()[s].formulas[r];
      if (!seen.insert(text).second) continue;
      auto g = eval_g(text);
      if (!g) continue;
      record(0, s, r, *g, text);
    }
    if (evaluated.size() < 2)
      throw std::runtime_error("mine: could not evaluate an initial batch of formulae");
  }

  // Neighbors of evaluated points stay in the acquisition pool.
  std::vector<std::pair<std::size_t, std::size_t>> neighbor_rows;
  auto add_neighbors = [&](const Eigen::VectorXd& x) {
    auto hits =
        query(db, x, std::min(cfg.retrieval_depth, total), view.keys, SearchMode::Exact);
    for (const auto& h : hits) neighbor_rows.emplace_back(h.shard, h.row);
  };
  for (const auto& e : evaluated) add_neighbors(e.x);

  std::vector<double> opt_trace{best};
  res.stop_reason = "maxiter";
  std::size_t t = 0;
  while (t < cfg.maxiter) {
    ++t;

    Eigen::MatrixXd X(evaluated.size(), db.dim());
    Eigen::VectorXd y(evaluated.size());
    for (std::size_t i = 0; i < evaluated.size(); ++i) {
      X.row(static_cast<long>(i)) = evaluated[i].x.transpose();
      y(static_cast<long>(i)) = evaluated[i].g;
    }
    GpModel gp = GpModel::fit(X, y, cfg.gp);
    double beta = cfg.beta_const >= 0.0 ? cfg.beta_const : beta_schedule(t, cfg.beta_cap);

    bool accepted = false;
    if (cfg.acquisition == BoConfig::Acquisition::CandidateSet) {
      AcquireOptions opt;
      opt.q = total;  // ranked list; we take the first q evaluable candidates
      opt.pool = cfg.candidate_pool;
      opt.seed = derive_seed(seed, kAcquireSalt + t);
      opt.include_rows = neighbor_rows;
      opt.exclude = &seen;
      auto ranked = acquire(db, gp, beta, view.keys, opt);
      std::size_t taken = 0;
      for (const auto& c : ranked) {
        if (taken >= cfg.q) break;
        if (!seen.insert(c.text).second) continue;
        auto g = eval_g(c.text);
        if (!g) continue;
        record(t, c.shard, c.row, *g, c.text);
        add_neighbors(evaluated.back().x);
        ++taken;
      }
      accepted = taken > 0;
    } else {
      // Gradient ascent on the UCB surface from the best evaluated points,
      // then snap to stored rows by nearest-neighbor retrieval.
      std::vector<std::size_t> starts(evaluated.size());
      for (std::size_t i = 0; i < starts.size(); ++i) starts[i] = i;
      std::stable_sort(starts.begin(), starts.end(),
                       [&](std::size_t a, std::size_t b) { return evaluated[a].g > evaluated[b].g; });
      starts.resize(std::min(cfg.grad_starts, starts.size()));
      Eigen::VectorXd best_x;
      double best_ucb = -std::numeric_limits<double>::infinity();
      for (std::size_t si : starts) {
        Eigen::VectorXd x = evaluated[si].x;
        for (std::size_t step = 1; step <= cfg.grad_steps; ++step) {
          Eigen::VectorXd grad = gp.ucb_gradient(x, beta);
          double gn = grad.norm();
          if (gn < 1e-12) break;
          x += (cfg.grad_lr / std::sqrt(static_cast<double>(step))) * grad / gn;
        }
        double u = gp.ucb(x, beta);
        if (u > best_ucb) {
          best_ucb = u;
          best_x = x;
        }
      }
      std::size_t taken = 0;
      for (std::size_t k = std::min(cfg.retrieval_depth, total); taken < cfg.q;
           k = std::min(k * 2, total)) {
        auto hits = query(db, best_x, k, view.keys, SearchMode::Exact);
        for (const auto& h : hits) {
          if (taken >= cfg.q) break;
          if (seen.count(h.formula)) continue;
          seen.insert(h.formula);
          auto g = eval_g(h.formula);
          if (!g) continue;
          record(t, h.shard, h.row, *g, h.formula);
          add_neighbors(evaluated.back().x);
          ++taken;
        }
        if (k == total) break;
      }
      accepted = taken > 0;
    }

    if (!accepted) {
      res.stop_reason = "exhausted";
      break;
    }
    opt_trace.push_back(best);

    if (t > cfg.burn_in && opt_trace.size() > cfg.patience) {
      double gain = opt_trace.back() - opt_trace[opt_trace.size() - 1 - cfg.patience];
      if (gain < cfg.epsilon) {
        res.stop_reason = "converged";
        break;
      }
    }
  }
  res.iterations = t;

  // G is invariant to threshold shifts for single-atom formulae, so the top
  // of the trace often holds a group of G-ties differing only in thresholds.
  // Resolve near-ties by training misclassification, then size, then text.
  double max_g = -std::numeric_limits<double>::infinity();
  for (const auto& e : evaluated) max_g = std::max(max_g, e.g);
  const double tie_tol = 1e-9 * std::max(1.0, std::abs(max_g));
  std::size_t best_i = evaluated.size();
  double best_mcr = std::numeric_limits<double>::infinity();
  Formula best_denorm;
  for (std::size_t i = 0; i < evaluated.size(); ++i) {
    if (evaluated[i].g < max_g - tie_tol) continue;
    Formula cand = denormalize_thresholds(
        rescale_time_bounds(parse_formula(evaluated[i].text), train.n_points()), stats);
    double mcr = classify_metrics(cand, train).mcr;
    bool better = best_i == evaluated.size();
    if (!better && mcr != best_mcr) better = mcr < best_mcr;
    else if (!better) {
      auto lhs = std::make_pair(cand.node_count(), evaluated[i].text);
      auto rhs = std::make_pair(best_denorm.node_count(), evaluated[best_i].text);
      better = lhs < rhs;
    }
    if (better) {
      best_i = i;
      best_mcr = mcr;
      best_denorm = cand;
    }
  }
  res.best_text = evaluated[best_i].text;
  res.best_g = evaluated[best_i].g;
  res.best_formula = best_denorm;
  res.train_report = classify_metrics(res.best_formula, train);
  Formula raw = parse_formula(res.best_text);
  if (test) {
    Formula ftest =
        denormalize_thresholds(rescale_time_bounds(raw, test->n_points()), stats);
    res.test_report = classify_metrics(ftest, *test);
  }
  return res;
}

std::string mining_report(const MiningResult& r) {
  std::string s = "mining report\n";
  s += "best_formula=" + format_formula(r.best_formula) + "\n";
  s += "best_text=" + r.best_text + "\n";
  s += "best_g=" + format_number(r.best_g) + "\n";
  s += "iterations=" + std::to_string(r.iterations) + "\n";
  s += "stop_reason=" + r.stop_reason + "\n";
  s += "evaluations=" + std::to_string(r.trace.size()) + "\n";
  s += "train " + summary_line(r.train_report) + "\n";
  if (r.test_report) s += "test " + summary_line(*r.test_report) + "\n";
  for (std::size_t i = 0; i < r.stats.dim(); ++i)
    s += "stats x" + std::to_string(i) + " mean=" + format_number(r.stats.mean[i]) +
         " std=" + format_number(r.stats.std[i]) + "\n";
  for (const auto& e : r.trace)
    s += "trace it=" + std::to_string(e.iteration) + " g=" + format_number(e.g) +
         " best=" + format_number(e.best_g) + " formula=" + e.formula + "\n";
  return s;
}

}  // namespace stlmine
