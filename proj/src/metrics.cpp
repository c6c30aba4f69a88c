#include "stlmine/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

#include "stlmine/parser.hpp"
#include "stlmine/rng.hpp"
#include "stlmine/threading.hpp"

namespace stlmine {

namespace {
constexpr std::uint64_t kProbeSalt = 0x52450000;
constexpr std::uint64_t kQuerySalt = 0x52510000;
}  // namespace

ClassificationReport classify_metrics(const Formula& f, const LabeledDataset& data) {
  if (data.positives.empty() && data.negatives.empty())
    throw std::invalid_argument("classify_metrics: empty dataset");
  ClassificationReport rep;
  Evaluator ev;
  for (const auto& traj : data.positives) {
    double rho = ev.robustness(f, traj, 0);
    if (rho > 0.0)
      ++rep.counts.tp;
    else if (rho < 0.0)
      ++rep.counts.fn;
    else
      ++rep.counts.zero_pos;
  }
  for (const auto& traj : data.negatives) {
    double rho = ev.robustness(f, traj, 0);
    if (rho < 0.0)
      ++rep.counts.tn;
    else if (rho > 0.0)
      ++rep.counts.fp;
    else
      ++rep.counts.zero_neg;
  }
  const auto& c = rep.counts;
  std::size_t total = data.size();
  rep.mcr = static_cast<double>(c.fn + c.fp + c.zero_pos + c.zero_neg) /
            static_cast<double>(total);
  if (c.tp + c.fp > 0)
    rep.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  if (c.tp + c.fn > 0)
    rep.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  return rep;
}

std::string summary_line(const ClassificationReport& r) {
  std::string s = "mcr=" + format_number(r.mcr);
  s += " precision=" + (r.precision ? format_number(*r.precision) : std::string("none"));
  s += " recall=" + (r.recall ? format_number(*r.recall) : std::string("none"));
  const auto& c = r.counts;
  s += " tp=" + std::to_string(c.tp) + " tn=" + std::to_string(c.tn);
  s += " fp=" + std::to_string(c.fp) + " fn=" + std::to_string(c.fn);
  s += " zero_pos=" + std::to_string(c.zero_pos) + " zero_neg=" + std::to_string(c.zero_neg);
  return s;
}

bool relevant(const Formula& query, const Formula& hit, std::span<const Trajectory> trajs,
              double omega, Evaluator& ev) {
  if (trajs.empty()) throw std::invalid_argument("relevant: no probe trajectories");
  if (!(omega >= 0.0 && omega <= 1.0))
    throw std::invalid_argument("relevant: omega must lie in [0, 1]");
  std::size_t agree = 0;
  for (const auto& traj : trajs) {
    bool a = ev.satisfies(query, traj, 0);
    bool b = ev.satisfies(hit, traj, 0);
    if (a == b) ++agree;
  }
  return static_cast<double>(agree) / static_cast<double>(trajs.size()) >= omega;
}

double ap_at_k(std::span<const char> rels, std::size_t k) {
  if (k == 0) throw std::invalid_argument("ap_at_k: K must be positive");
  if (k > rels.size()) throw std::invalid_argument("ap_at_k: K exceeds the result count");
  std::size_t seen = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    if (!rels[i]) continue;
    ++seen;
    sum += static_cast<double>(seen) / static_cast<double>(i + 1);
  }
  if (seen == 0) return 0.0;
  return sum / static_cast<double>(seen);
}

double ndcg_at_k(std::span<const double> gains, std::size_t k) {
  if (k == 0) throw std::invalid_argument("ndcg_at_k: K must be positive");
  if (k > gains.size()) throw std::invalid_argument("ndcg_at_k: K exceeds the result count");
  double dcg = 0.0;
  for (std::size_t i = 0; i < k; ++i)
    dcg += gains[i] / std::log2(static_cast<double>(i) + 2.0);
  std::vector<double> ideal(gains.begin(), gains.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  double idcg = 0.0;
  for (std::size_t i = 0; i < k; ++i)
    idcg += ideal[i] / std::log2(static_cast<double>(i) + 2.0);
  if (idcg == 0.0) return 1.0;
  return dcg / idcg;
}

double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw std::invalid_argument("quantile: empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("quantile: p must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  double h = p * static_cast<double>(values.size() - 1);
  auto lo = static_cast<std::size_t>(std::floor(h));
  auto hi = static_cast<std::size_t>(std::ceil(h));
  if (lo == hi) return values[lo];
  double w = h - static_cast<double>(lo);
  return values[lo] * (1.0 - w) + values[hi] * w;
}

void RetrievalEvalConfig::validate() const {
  if (n_queries == 0) throw std::invalid_argument("eval config: n_queries must be positive");
  if (k == 0) throw std::invalid_argument("eval config: k must be positive");
  if (n_traj == 0) throw std::invalid_argument("eval config: n_traj must be positive");
  if (!(omega >= 0.0 && omega <= 1.0))
    throw std::invalid_argument("eval config: omega must lie in [0, 1]");
  if (max_query_nodes == 0)
    throw std::invalid_argument("eval config: max_query_nodes must be positive");
  fdist.validate();
  mu0.validate();
}

namespace {

std::vector<double> column(const std::vector<RetrievalQueryRow>& rows,
                           double RetrievalQueryRow::* field,
                           std::size_t bucket /* 0 = all */) {
  std::vector<double> out;
  for (const auto& r : rows)
    if (bucket == 0 || r.node_count == bucket) out.push_back(r.*field);
  return out;
}

void summary_line(std::ostringstream& os, const std::string& label,
                  const std::vector<RetrievalQueryRow>& rows, std::size_t bucket,
                  std::size_t k) {
  struct Metric {
    const char* name;
    double RetrievalQueryRow::* field;
  };
  const Metric metrics[] = {{"AP", &RetrievalQueryRow::ap},
                            {"NDCG", &RetrievalQueryRow::ndcg},
                            {"kernel", &RetrievalQueryRow::top_kernel}};
  std::size_t n = column(rows, &RetrievalQueryRow::ap, bucket).size();
  os << label << " (n=" << n << ")";
  for (const auto& m : metrics) {
    auto vals = column(rows, m.field, bucket);
    os << "  " << m.name;
    if (m.field != &RetrievalQueryRow::top_kernel) os << "@" << k;
    os << " q25=" << quantile(vals, 0.25) << " med=" << quantile(vals, 0.5)
       << " q75=" << quantile(vals, 0.75) << " p99=" << quantile(vals, 0.99);
  }
  os << "\n";
}

}  // namespace

double RetrievalReport::median_ap() const {
  return quantile(column(rows, &RetrievalQueryRow::ap, 0), 0.5);
}

double RetrievalReport::median_ndcg() const {
  return quantile(column(rows, &RetrievalQueryRow::ndcg, 0), 0.5);
}

double RetrievalReport::median_top_kernel() const {
  return quantile(column(rows, &RetrievalQueryRow::top_kernel, 0), 0.5);
}

std::string RetrievalReport::to_csv() const {
  std::ostringstream os;
  os << "query_idx,nodes,retrieved,ap,ndcg,top_kernel,query\n";
  for (const auto& r : rows) {
    os << r.index << ',' << r.node_count << ',' << r.retrieved << ','
       << format_number(r.ap) << ',' << format_number(r.ndcg) << ','
       << format_number(r.top_kernel) << ",\"" << r.query << "\"\n";
  }
  return os.str();
}

std::string RetrievalReport::summary() const {
  if (rows.empty()) return "no queries\n";
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(4);
  std::map<std::size_t, std::size_t> buckets;
  for (const auto& r : rows) ++buckets[r.node_count];
  for (const auto& [nodes, n] : buckets) {
    (void)n;
    summary_line(os, "nodes=" + std::to_string(nodes), rows, nodes, k);
  }
  summary_line(os, "all", rows, 0, k);
  return os.str();
}

RetrievalReport retrieval_effectiveness(const SemanticDb& db, const ReferenceSet& ref,
                                        const RetrievalEvalConfig& cfg) {
  cfg.validate();

  std::vector<ShardKey> keys;
  std::uint32_t max_shard_vars = 0;
  for (const auto& s : db.shards()) {
    if (s.key.max_nodes == cfg.shard_level && s.size() > 0) {
      keys.push_back(s.key);
      max_shard_vars = std::max(max_shard_vars, s.key.n_vars);
    }
  }
  if (keys.empty())
    throw std::invalid_argument("retrieval_effectiveness: no shard at the requested level");

  std::size_t probe_dim = std::max<std::size_t>(cfg.fdist.max_vars, max_shard_vars);
  std::vector<Trajectory> probes;
  probes.reserve(cfg.n_traj);
  for (std::size_t j = 0; j < cfg.n_traj; ++j)
    probes.push_back(sample_mu0(cfg.mu0, probe_dim, derive_seed(cfg.seed, kProbeSalt + j)));

  // Sample embeddable queries up front (sequential, cheap relative to the
  // scoring pass); rejected draws keep the stream deterministic per index.
  std::vector<Formula> queries;
  std::vector<Eigen::VectorXd> query_emb;
  queries.reserve(cfg.n_queries);
  Evaluator sev;
  for (std::size_t i = 0; i < cfg.n_queries; ++i) {
    bool found = false;
    for (std::uint64_t attempt = 0; attempt < 1000 && !found; ++attempt) {
      std::uint64_t s = derive_seed(derive_seed(cfg.seed, kQuerySalt + i), attempt);
      Formula f = sample_formula(cfg.fdist, s);
      if (f.node_count() > cfg.max_query_nodes) continue;
      if (f.min_dim() > probe_dim) continue;
      try {
        Eigen::VectorXd rho = rho_vector(f, ref, sev);
        double self = mean_dot(rho.data(), rho.data(), rho.size());
        if (!(self > 1e-18)) continue;
        query_emb.push_back(embed_rho(rho, ref));
        queries.push_back(std::move(f));
        found = true;
      } catch (const std::exception&) {
        continue;
      }
    }
    if (!found)
      throw std::runtime_error("retrieval_effectiveness: could not sample an embeddable query");
  }

  RetrievalReport rep;
  rep.k = cfg.k;
  rep.rows.resize(queries.size());
  parallel_for(queries.size(), [&](std::size_t begin, std::size_t end, std::size_t) {
    Evaluator ev;
    for (std::size_t i = begin; i < end; ++i) {
      auto hits = query(db, query_emb[i], cfg.k, keys, SearchMode::Exact);
      RetrievalQueryRow row;
      row.index = i;
      row.query = format_formula(queries[i]);
      row.node_count = queries[i].node_count();
      row.retrieved = hits.size();
      if (!hits.empty()) {
        std::vector<char> rels(hits.size());
        std::vector<double> gains(hits.size());
        for (std::size_t h = 0; h < hits.size(); ++h) {
          Formula hf = parse_formula(hits[h].formula);
          rels[h] = relevant(queries[i], hf, probes, cfg.omega, ev) ? 1 : 0;
          gains[h] = rels[h] ? 1.0 : 0.0;
        }
        row.ap = ap_at_k(rels, hits.size());
        row.ndcg = ndcg_at_k(gains, hits.size());
        row.top_kernel = kernel(queries[i], parse_formula(hits[0].formula), ref);
      }
      rep.rows[i] = std::move(row);
    }
  });
  return rep;
}

}  // namespace stlmine
