#include "stlmine/vectordb.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <iostream>
#include <limits>
#include <stdexcept>
#include <unordered_map>

#include "stlmine/binio.hpp"
#include "stlmine/rng.hpp"
#include "stlmine/threading.hpp"

namespace stlmine {

namespace {

constexpr char kMagic[5] = {'S', 'T', 'L', 'D', 'B'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint64_t kSigTrajSalt = 0x516E0000ull;
constexpr std::uint64_t kInstanceSalt = 0x14570000ull;

// Canonical query-path distance: double accumulation over float32 inputs.
// The naive-scan oracle in the tests mirrors this loop exactly.
double dist_sq(const float* a, const float* b, std::size_t dim) {
  double acc = 0.0;
  for (std::size_t k = 0; k < dim; ++k) {
    const double d = static_cast<double>(a[k]) - static_cast<double>(b[k]);
    acc += d * d;
  }
  return acc;
}

struct BuildEntry {
  std::string text;
  std::uint32_t node_count = 0;
  std::uint32_t var_count = 0;
  std::size_t row = 0;  // row in the build-time embedding matrix
  bool alive = true;
};

std::string join_numbers(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += format_number(v[i]);
  }
  return out;
}

}  // namespace

void DbBuildConfig::validate() const {
  if (max_nodes < 1 || max_vars < 1)
    throw std::invalid_argument("db config: max_nodes and max_vars must be >= 1");
  grid.validate();
  if (!(tau_sim > 0.0 && tau_sim <= 1.0))
    throw std::invalid_argument("db config: tau_sim must lie in (0, 1]");
  if (signature_trajs == 0)
    throw std::invalid_argument("db config: signature_trajs must be >= 1");
  mu0.validate();
}

const SemanticDb::Shard* SemanticDb::find(const ShardKey& key) const {
  for (const auto& s : shards_)
    if (s.key == key) return &s;
  return nullptr;
}

std::size_t SemanticDb::total() const {
  std::size_t n = 0;
  for (const auto& s : shards_) n += s.size();
  return n;
}

Eigen::VectorXd SemanticDb::stored_embedding(std::size_t shard, std::size_t row) const {
  const auto& s = shards_.at(shard);
  Eigen::VectorXd e(dim_);
  for (std::size_t k = 0; k < dim_; ++k)
    e[static_cast<long>(k)] = static_cast<double>(s.embeddings(static_cast<long>(row),
                                                               static_cast<long>(k)));
  return e;
}

SemanticDb build_db(const DbBuildConfig& cfg, const ReferenceSet& R) {
  cfg.validate();
  const std::size_t dim = R.n_train();

  std::vector<Trajectory> sig_trajs(cfg.signature_trajs);
  for (std::size_t j = 0; j < sig_trajs.size(); ++j)
    sig_trajs[j] = sample_mu0(cfg.mu0, cfg.max_vars, derive_seed(cfg.seed, kSigTrajSalt + j));

  const auto templates = enumerate_templates(cfg.max_nodes, cfg.max_vars);

  // instantiate + greedy per-template signature filter
  std::vector<Formula> kept;
  std::uint64_t offered = 0;
  std::uint64_t uneval_dropped = 0;
  for (std::size_t ti = 0; ti < templates.size(); ++ti) {
    if (cfg.max_total != 0 && kept.size() >= cfg.max_total) break;
    const auto instances = instantiate_grid(templates[ti], cfg.grid, cfg.per_template_cap,
                                            derive_seed(cfg.seed, kInstanceSalt + ti));
    offered += instances.size();
    std::vector<Signature> sigs(instances.size());
    std::vector<char> sig_ok(instances.size(), 0);
    parallel_for(instances.size(), [&](std::size_t begin, std::size_t end, std::size_t) {
      Evaluator ev;
      for (std::size_t i = begin; i < end; ++i) {
        try {
          sigs[i] = signature(instances[i], sig_trajs, ev);
          sig_ok[i] = 1;
        } catch (const std::exception&) {
          // nested windows can overrun the horizon; such instances are unusable
        }
      }
    });
    SignatureFilter filter(cfg.tau_sim, sig_trajs.size());
    for (std::size_t i = 0; i < instances.size(); ++i) {
      if (!sig_ok[i]) {
        ++uneval_dropped;
        continue;
      }
      if (filter.offer(sigs[i])) kept.push_back(instances[i]);
    }
  }

  // embeddings for every kept formula; drop zero-self-norm rows
  RowMajorXf emb(static_cast<long>(kept.size()), static_cast<long>(dim));
  std::vector<char> emb_ok(kept.size(), 0);
  parallel_for(kept.size(), [&](std::size_t begin, std::size_t end, std::size_t) {
    Evaluator ev;
    for (std::size_t i = begin; i < end; ++i) {
      Eigen::VectorXd rho;
      try {
        rho = rho_vector(kept[i], R, ev);
      } catch (const std::exception&) {
        continue;  // reference horizon may differ from the signature horizon
      }
      double self = 0.0;
      for (long j = 0; j < rho.size(); ++j) self += rho[j] * rho[j];
      if (!(std::sqrt(self / static_cast<double>(rho.size())) >= 1e-9)) continue;
      Eigen::VectorXd e = embed_rho(rho, R);
      for (std::size_t k = 0; k < dim; ++k)
        emb(static_cast<long>(i), static_cast<long>(k)) = static_cast<float>(e[static_cast<long>(k)]);
      emb_ok[i] = 1;
    }
  });

  std::size_t zero_norm_dropped = 0;
  std::vector<BuildEntry> entries;
  entries.reserve(kept.size());
  std::unordered_map<std::string, std::size_t> by_bits;  // embedding bytes -> entries index
  std::size_t dedup_dropped = 0;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    if (!emb_ok[i]) {
      ++zero_norm_dropped;
      continue;
    }
    BuildEntry e;
    e.text = format_formula(kept[i]);
    e.node_count = static_cast<std::uint32_t>(kept[i].node_count());
    e.var_count = static_cast<std::uint32_t>(kept[i].var_count());
    e.row = i;
    std::string bits(reinterpret_cast<const char*>(emb.row(static_cast<long>(i)).data()),
                     dim * sizeof(float));
    auto [it, inserted] = by_bits.emplace(std::move(bits), entries.size());
    if (inserted) {
      entries.push_back(std::move(e));
    } else {
      // bit-identical embedding: keep the syntactically simpler formula
      ++dedup_dropped;
      BuildEntry& old = entries[it->second];
      if (std::tie(e.node_count, e.text) < std::tie(old.node_count, old.text)) old = std::move(e);
    }
  }

  SemanticDb db;
  db.dim_ = dim;
  db.seed_ = cfg.seed;
  std::vector<std::uint32_t> levels =
      cfg.max_nodes >= 5 ? std::vector<std::uint32_t>{4, 5} : std::vector<std::uint32_t>{4};
  for (std::uint32_t v = 1; v <= cfg.max_vars; ++v) {
    for (std::uint32_t lvl : levels) {
      SemanticDb::Shard s;
      s.key = ShardKey{v, lvl};
      std::vector<std::size_t> rows;
      for (std::size_t i = 0; i < entries.size(); ++i)
        if (entries[i].var_count == v && entries[i].node_count <= lvl) rows.push_back(i);
      s.formulas.reserve(rows.size());
      s.node_counts.reserve(rows.size());
      s.embeddings.resize(static_cast<long>(rows.size()), static_cast<long>(dim));
      for (std::size_t r = 0; r < rows.size(); ++r) {
        const BuildEntry& e = entries[rows[r]];
        s.formulas.push_back(e.text);
        s.node_counts.push_back(e.node_count);
        s.embeddings.row(static_cast<long>(r)) = emb.row(static_cast<long>(e.row));
      }
      if (s.size() == 0)
        std::cerr << "warning: shard (n_vars=" << v << ", max_nodes=" << lvl
                  << ") is empty\n";
      db.shards_.push_back(std::move(s));
    }
  }

  std::string m;
  m += "stldb manifest\n";
  m += "dim=" + std::to_string(dim) + "\n";
  m += "seed=" + std::to_string(cfg.seed) + "\n";
  m += "max_nodes=" + std::to_string(cfg.max_nodes) + "\n";
  m += "max_vars=" + std::to_string(cfg.max_vars) + "\n";
  m += "value_grid=" + join_numbers(cfg.grid.values) + "\n";
  m += "time_grid=" + join_numbers(cfg.grid.times) + "\n";
  m += "tau_sim=" + format_number(cfg.tau_sim) + "\n";
  m += "per_template_cap=" + std::to_string(cfg.per_template_cap) + "\n";
  m += "max_total=" + std::to_string(cfg.max_total) + "\n";
  m += "signature_trajs=" + std::to_string(cfg.signature_trajs) + "\n";
  m += "templates=" + std::to_string(templates.size()) + "\n";
  m += "offered=" + std::to_string(offered) + "\n";
  m += "unevaluable_dropped=" + std::to_string(uneval_dropped) + "\n";
  m += "kept=" + std::to_string(kept.size()) + "\n";
  m += "zero_norm_dropped=" + std::to_string(zero_norm_dropped) + "\n";
  m += "dedup_dropped=" + std::to_string(dedup_dropped) + "\n";
  for (const auto& s : db.shards_)
    m += "shard n_vars=" + std::to_string(s.key.n_vars) +
         " max_nodes=" + std::to_string(s.key.max_nodes) +
         " count=" + std::to_string(s.size()) + "\n";
  db.manifest_ = std::move(m);
  return db;
}

std::vector<QueryResult> query(const SemanticDb& db, const Eigen::VectorXd& e, std::size_t k,
                               std::span<const ShardKey> keys, SearchMode mode,
                               std::size_t nprobe_override) {
  if (static_cast<std::size_t>(e.size()) != db.dim())
    throw std::invalid_argument("query embedding dimension mismatch");
  if (k == 0) throw std::invalid_argument("k must be >= 1");
  if (keys.empty()) throw std::invalid_argument("query needs at least one shard key");

  std::vector<float> q(db.dim());
  for (std::size_t i = 0; i < db.dim(); ++i) q[i] = static_cast<float>(e[static_cast<long>(i)]);

  struct Hit {
    double dist;
    std::uint32_t node_count;
    const std::string* text;
    std::size_t shard;
    std::size_t row;
  };
  std::vector<Hit> hits;

  for (const ShardKey& key : keys) {
    const SemanticDb::Shard* s = db.find(key);
    if (!s)
      throw std::invalid_argument("no shard (n_vars=" + std::to_string(key.n_vars) +
                                  ", max_nodes=" + std::to_string(key.max_nodes) + ")");
    const std::size_t shard_idx = static_cast<std::size_t>(s - db.shards().data());
    auto scan_row = [&](std::size_t r) {
      const float* row = s->embeddings.row(static_cast<long>(r)).data();
      hits.push_back(Hit{dist_sq(q.data(), row, db.dim()), s->node_counts[r],
                         &s->formulas[r], shard_idx, r});
    };
    if (mode == SearchMode::Exact) {
      for (std::size_t r = 0; r < s->size(); ++r) scan_row(r);
    } else {
      if (!s->has_ivf)
        throw std::runtime_error("shard has no IVF index; run train_ivf first");
      const std::size_t nlist = s->cells.size();
      std::size_t nprobe = nprobe_override ? nprobe_override : s->nprobe;
      nprobe = std::min(std::max<std::size_t>(nprobe, 1), nlist);
      std::vector<std::pair<double, std::size_t>> cd(nlist);
      for (std::size_t c = 0; c < nlist; ++c)
        cd[c] = {dist_sq(q.data(), s->centroids.row(static_cast<long>(c)).data(), db.dim()), c};
      std::partial_sort(cd.begin(), cd.begin() + static_cast<long>(nprobe), cd.end());
      for (std::size_t p = 0; p < nprobe; ++p)
        for (std::uint32_t r : s->cells[cd[p].second]) scan_row(r);
    }
  }

  auto better = [](const Hit& a, const Hit& b) {
    if (a.dist != b.dist) return a.dist < b.dist;
    if (a.node_count != b.node_count) return a.node_count < b.node_count;
    return *a.text < *b.text;
  };
  const std::size_t out_n = std::min(k, hits.size());
  if (hits.size() > out_n) {
    std::nth_element(hits.begin(), hits.begin() + static_cast<long>(out_n - 1), hits.end(),
                     better);
    hits.resize(out_n);
  }
  std::sort(hits.begin(), hits.end(), better);

  std::vector<QueryResult> out;
  out.reserve(out_n);
  for (std::size_t i = 0; i < out_n; ++i) {
    QueryResult qr;
    qr.formula = *hits[i].text;
    qr.distance = std::sqrt(hits[i].dist);
    qr.rank = i + 1;
    qr.shard = hits[i].shard;
    qr.row = hits[i].row;
    qr.node_count = hits[i].node_count;
    out.push_back(std::move(qr));
  }
  return out;
}

void train_ivf(SemanticDb& db, std::size_t nlist, std::size_t nprobe, std::uint64_t seed) {
  if (nlist == 0) throw std::invalid_argument("nlist must be >= 1");
  std::size_t trained = 0;
  for (auto& s : db.shards_) {
    const std::size_t n = s.size();
    if (n < nlist) continue;  // exact scan stays the only mode for tiny shards
    ++trained;
    const std::size_t dim = db.dim_;

    // double-precision working copies
    Eigen::MatrixXd X(n, dim);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < dim; ++j)
        X(static_cast<long>(i), static_cast<long>(j)) =
            static_cast<double>(s.embeddings(static_cast<long>(i), static_cast<long>(j)));
    Eigen::VectorXd xsq = X.rowwise().squaredNorm();

    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    auto rng = make_rng(derive_seed(seed, s.key.n_vars * 131 + s.key.max_nodes));
    std::shuffle(perm.begin(), perm.end(), rng);

    Eigen::MatrixXd C(nlist, dim);
    for (std::size_t c = 0; c < nlist; ++c) C.row(static_cast<long>(c)) = X.row(static_cast<long>(perm[c]));

    std::vector<std::size_t> assign(n);
    constexpr int kIters = 20;
    for (int it = 0; it < kIters; ++it) {
      Eigen::VectorXd csq = C.rowwise().squaredNorm();
      Eigen::MatrixXd S = X * C.transpose();  // n x nlist
      std::vector<double> best_d(n);
      for (std::size_t i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t arg = 0;
        for (std::size_t c = 0; c < nlist; ++c) {
          const double d = xsq[static_cast<long>(i)] - 2.0 * S(static_cast<long>(i), static_cast<long>(c)) + csq[static_cast<long>(c)];
          if (d < best) { best = d; arg = c; }
        }
        assign[i] = arg;
        best_d[i] = best;
      }
      std::vector<std::size_t> counts(nlist, 0);
      for (std::size_t i = 0; i < n; ++i) ++counts[assign[i]];
      // empty cluster: seize the point farthest from its centroid
      for (std::size_t c = 0; c < nlist; ++c) {
        if (counts[c] != 0) continue;
        std::size_t far = 0;
        double far_d = -1.0;
        for (std::size_t i = 0; i < n; ++i)
          if (counts[assign[i]] > 1 && best_d[i] > far_d) { far_d = best_d[i]; far = i; }
        --counts[assign[far]];
        assign[far] = c;
        counts[c] = 1;
        best_d[far] = 0.0;
      }
      C.setZero();
      for (std::size_t i = 0; i < n; ++i) C.row(static_cast<long>(assign[i])) += X.row(static_cast<long>(i));
      for (std::size_t c = 0; c < nlist; ++c) C.row(static_cast<long>(c)) /= static_cast<double>(counts[c]);
    }

    // freeze centroids at float32 and build cells against the stored values
    s.centroids.resize(static_cast<long>(nlist), static_cast<long>(dim));
    for (std::size_t c = 0; c < nlist; ++c)
      for (std::size_t j = 0; j < dim; ++j)
        s.centroids(static_cast<long>(c), static_cast<long>(j)) =
            static_cast<float>(C(static_cast<long>(c), static_cast<long>(j)));
    s.cells.assign(nlist, {});
    for (std::size_t i = 0; i < n; ++i) {
      const float* row = s.embeddings.row(static_cast<long>(i)).data();
      double best = std::numeric_limits<double>::infinity();
      std::size_t arg = 0;
      for (std::size_t c = 0; c < nlist; ++c) {
        const double d = dist_sq(row, s.centroids.row(static_cast<long>(c)).data(), dim);
        if (d < best) { best = d; arg = c; }
      }
      s.cells[arg].push_back(static_cast<std::uint32_t>(i));
    }
    s.has_ivf = true;
    s.nprobe = static_cast<std::uint32_t>(std::min(std::max<std::size_t>(nprobe, 1), nlist));
  }
  if (trained == 0)
    throw std::invalid_argument("nlist " + std::to_string(nlist) +
                                " exceeds every non-empty shard size");
}

void save_db(const SemanticDb& db, const std::string& path) {
  BinWriter w(path);
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kVersion);
  w.str(db.manifest());
  w.u64(db.dim());
  w.u64(db.seed());
  w.u64(db.shards().size());
  for (const auto& s : db.shards()) {
    w.u32(s.key.n_vars);
    w.u32(s.key.max_nodes);
    w.u64(s.size());
    for (const auto& f : s.formulas) w.str(f);
    for (auto nc : s.node_counts) w.u32(nc);
    w.f32_array({s.embeddings.data(), s.size() * db.dim()});
    w.u32(s.has_ivf ? 1 : 0);
    if (s.has_ivf) {
      w.u64(s.cells.size());
      w.u32(s.nprobe);
      w.f32_array({s.centroids.data(), s.cells.size() * db.dim()});
      for (const auto& cell : s.cells) {
        w.u64(cell.size());
        for (auto r : cell) w.u32(r);
      }
    }
  }
  w.commit();
}

SemanticDb load_db(const std::string& path) {
  BinReader r(path);
  char magic[5];
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw std::runtime_error("not a semantic-db file: " + path);
  if (r.u32() != kVersion) throw std::runtime_error("unsupported semantic-db version");
  SemanticDb db;
  db.manifest_ = r.str();
  db.dim_ = r.u64();
  db.seed_ = r.u64();
  const std::uint64_t n_shards = r.u64();
  db.shards_.resize(n_shards);
  for (auto& s : db.shards_) {
    s.key.n_vars = r.u32();
    s.key.max_nodes = r.u32();
    const std::uint64_t count = r.u64();
    s.formulas.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) s.formulas.push_back(r.str());
    s.node_counts.resize(count);
    for (auto& nc : s.node_counts) nc = r.u32();
    s.embeddings.resize(static_cast<long>(count), static_cast<long>(db.dim_));
    r.f32_array({s.embeddings.data(), count * db.dim_});
    const std::uint32_t has_ivf = r.u32();
    if (has_ivf) {
      s.has_ivf = true;
      const std::uint64_t nlist = r.u64();
      s.nprobe = r.u32();
      s.centroids.resize(static_cast<long>(nlist), static_cast<long>(db.dim_));
      r.f32_array({s.centroids.data(), nlist * db.dim_});
      s.cells.resize(nlist);
      for (auto& cell : s.cells) {
        const std::uint64_t len = r.u64();
        cell.resize(len);
        for (auto& v : cell) v = r.u32();
      }
    }
  }
  return db;
}

}  // namespace stlmine
