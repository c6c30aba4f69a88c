#include "stlmine/embedding.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "stlmine/binio.hpp"
#include "stlmine/parser.hpp"
#include "stlmine/rng.hpp"
#include "stlmine/threading.hpp"

namespace stlmine {

namespace {

constexpr char kMagic[6] = {'S', 'T', 'L', 'R', 'E', 'F'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint64_t kAnchorSalt = 0xA0000000ull;
constexpr std::uint64_t kTrajSalt = 0x7B000000ull;

inline double round_f32(double x) { return static_cast<double>(static_cast<float>(x)); }

}  // namespace

double mean_dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t j = 0; j < n; ++j) acc += a[j] * b[j];
  return acc / static_cast<double>(n);
}

Eigen::VectorXd rho_vector(const Formula& f, const ReferenceSet& R, Evaluator& ev,
                           bool arctan) {
  const std::size_t n = R.n_mc();
  Eigen::VectorXd rho(n);
  for (std::size_t j = 0; j < n; ++j) {
    double v = ev.robustness(f, R.mc_trajectories[j]);
    if (!std::isfinite(v))
      throw std::invalid_argument("cannot embed a formula with non-finite robustness");
    if (arctan) v = std::atan(v);
    rho[static_cast<long>(j)] = round_f32(v);
  }
  return rho;
}

ReferenceSet build_reference_set(std::size_t n_train, std::size_t n_mc,
                                 const FDistParams& fparams, const Mu0Params& mu0,
                                 std::uint64_t seed) {
  if (n_train == 0 || n_mc == 0)
    throw std::invalid_argument("reference set needs n_train, n_mc >= 1");
  fparams.validate();
  mu0.validate();

  ReferenceSet R;
  R.seed = seed;
  R.mc_trajectories.resize(n_mc);
  for (std::size_t j = 0; j < n_mc; ++j) {
    Trajectory t = sample_mu0(mu0, fparams.max_vars, derive_seed(seed, kTrajSalt + j));
    for (std::size_t d = 0; d < t.dim(); ++d)
      for (double& v : t.channel(d)) v = round_f32(v);
    R.mc_trajectories[j] = std::move(t);
  }

  R.anchors.resize(n_train);
  R.anchor_rho.resize(static_cast<long>(n_train), static_cast<long>(n_mc));
  R.anchor_selfnorm.resize(static_cast<long>(n_train));

  parallel_for(n_train, [&](std::size_t begin, std::size_t end, std::size_t) {
    Evaluator ev;
    for (std::size_t i = begin; i < end; ++i) {
      for (std::uint64_t attempt = 0;; ++attempt) {
        if (attempt >= 1000)
          throw std::runtime_error("anchor resampling failed to find a usable formula");
        Formula f = sample_formula(
            fparams, derive_seed(derive_seed(seed, kAnchorSalt + i), attempt));
        Eigen::VectorXd rho;
        try {
          rho = rho_vector(f, R, ev);
        } catch (const std::exception&) {
          continue;  // nested windows can overrun the horizon; resample
        }
        double self = mean_dot(rho.data(), rho.data(), n_mc);
        if (std::sqrt(self) < 1e-9) continue;
        R.anchors[i] = std::move(f);
        R.anchor_rho.row(static_cast<long>(i)) = rho.transpose();
        R.anchor_selfnorm[static_cast<long>(i)] = std::sqrt(self);
        break;
      }
    }
  });
  return R;
}

double kernel(const Formula& f, const Formula& g, const ReferenceSet& R, bool arctan) {
  Evaluator ev;
  Eigen::VectorXd rf = rho_vector(f, R, ev, arctan);
  Eigen::VectorXd rg = rho_vector(g, R, ev, arctan);
  const std::size_t n = R.n_mc();
  double ff = mean_dot(rf.data(), rf.data(), n);
  double gg = mean_dot(rg.data(), rg.data(), n);
  if (!(ff > 0.0) || !(gg > 0.0))
    throw std::invalid_argument("kernel undefined: formula has zero self-norm");
  return mean_dot(rf.data(), rg.data(), n) / (std::sqrt(ff) * std::sqrt(gg));
}

Eigen::MatrixXd kernel_gram(std::span<const Formula> fs, const ReferenceSet& R,
                            bool normalized, bool arctan) {
  const std::size_t m = fs.size();
  const std::size_t n = R.n_mc();
  RowMajorXd rho(m, n);
  parallel_for(m, [&](std::size_t begin, std::size_t end, std::size_t) {
    Evaluator ev;
    for (std::size_t i = begin; i < end; ++i)
      rho.row(static_cast<long>(i)) = rho_vector(fs[i], R, ev, arctan).transpose();
  });

  Eigen::VectorXd self(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double* ri = rho.row(static_cast<long>(i)).data();
    self[static_cast<long>(i)] = mean_dot(ri, ri, n);
    if (normalized && !(self[static_cast<long>(i)] > 0.0))
      throw std::invalid_argument("kernel undefined: formula has zero self-norm");
  }

  Eigen::MatrixXd gram(m, m);
  for (std::size_t i = 0; i < m; ++i) {
    const double* ri = rho.row(static_cast<long>(i)).data();
    for (std::size_t j = i; j < m; ++j) {
      const double* rj = rho.row(static_cast<long>(j)).data();
      double k = mean_dot(ri, rj, n);
      if (normalized)
        k /= std::sqrt(self[static_cast<long>(i)]) * std::sqrt(self[static_cast<long>(j)]);
      gram(static_cast<long>(i), static_cast<long>(j)) = k;
      gram(static_cast<long>(j), static_cast<long>(i)) = k;
    }
  }
  return gram;
}

Eigen::VectorXd embed_rho(const Eigen::VectorXd& rho, const ReferenceSet& R) {
  const std::size_t n = R.n_mc();
  const std::size_t m = R.n_train();
  if (static_cast<std::size_t>(rho.size()) != n)
    throw std::invalid_argument("rho vector length mismatch");
  double self = mean_dot(rho.data(), rho.data(), n);
  if (!(std::sqrt(self) >= 1e-9))
    throw std::invalid_argument("cannot embed: zero robustness self-norm");
  // same expression shape as kernel() so components match it bit for bit
  const double sqrt_self = std::sqrt(self);
  Eigen::VectorXd e(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = R.anchor_rho.row(static_cast<long>(i)).data();
    e[static_cast<long>(i)] = mean_dot(ai, rho.data(), n) /
                              (sqrt_self * R.anchor_selfnorm[static_cast<long>(i)]);
  }
  return e;
}

Eigen::VectorXd embed(const Formula& f, const ReferenceSet& R, bool arctan) {
  Evaluator ev;
  if (!arctan) return embed_rho(rho_vector(f, R, ev), R);
  // non-default path: transform both sides of the dot products
  Eigen::VectorXd rho = rho_vector(f, R, ev, true);
  const std::size_t n = R.n_mc();
  const std::size_t m = R.n_train();
  double self = mean_dot(rho.data(), rho.data(), n);
  if (!(std::sqrt(self) >= 1e-9))
    throw std::invalid_argument("cannot embed: zero robustness self-norm");
  Eigen::VectorXd e(m);
  for (std::size_t i = 0; i < m; ++i) {
    Eigen::VectorXd ai = R.anchor_rho.row(static_cast<long>(i)).transpose().array().atan();
    double aa = mean_dot(ai.data(), ai.data(), n);
    e[static_cast<long>(i)] =
        mean_dot(ai.data(), rho.data(), n) / (std::sqrt(self) * std::sqrt(aa));
  }
  return e;
}

void save_reference_set(const ReferenceSet& R, const std::string& path) {
  BinWriter w(path);
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kVersion);
  w.u64(R.n_train());
  w.u64(R.n_mc());
  w.u64(R.seed);
  const Trajectory& t0 = R.mc_trajectories.at(0);
  w.u64(t0.dim());
  w.u64(t0.n_points());
  w.f64(t0.dt());
  for (const auto& f : R.anchors) w.str(format_formula(f));
  for (const auto& t : R.mc_trajectories)
    for (std::size_t d = 0; d < t.dim(); ++d)
      for (double v : t.channel(d)) w.f32(static_cast<float>(v));
  for (long i = 0; i < R.anchor_rho.rows(); ++i)
    for (long j = 0; j < R.anchor_rho.cols(); ++j)
      w.f32(static_cast<float>(R.anchor_rho(i, j)));
  w.commit();
}

ReferenceSet load_reference_set(const std::string& path) {
  BinReader r(path);
  char magic[6];
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw std::runtime_error("not a reference-set file: " + path);
  if (r.u32() != kVersion) throw std::runtime_error("unsupported reference-set version");
  ReferenceSet R;
  const std::uint64_t n_train = r.u64();
  const std::uint64_t n_mc = r.u64();
  R.seed = r.u64();
  const std::uint64_t dim = r.u64();
  const std::uint64_t n_points = r.u64();
  const double dt = r.f64();
  R.anchors.reserve(n_train);
  for (std::uint64_t i = 0; i < n_train; ++i) R.anchors.push_back(parse_formula(r.str()));
  R.mc_trajectories.reserve(n_mc);
  for (std::uint64_t j = 0; j < n_mc; ++j) {
    Trajectory t(dim, n_points, dt);
    for (std::uint64_t d = 0; d < dim; ++d)
      for (std::uint64_t k = 0; k < n_points; ++k) t.value(d, k) = r.f32();
    R.mc_trajectories.push_back(std::move(t));
  }
  R.anchor_rho.resize(static_cast<long>(n_train), static_cast<long>(n_mc));
  for (std::uint64_t i = 0; i < n_train; ++i)
    for (std::uint64_t j = 0; j < n_mc; ++j)
      R.anchor_rho(static_cast<long>(i), static_cast<long>(j)) = r.f32();
  R.anchor_selfnorm.resize(static_cast<long>(n_train));
  for (std::uint64_t i = 0; i < n_train; ++i) {
    const double* ri = R.anchor_rho.row(static_cast<long>(i)).data();
    R.anchor_selfnorm[static_cast<long>(i)] = std::sqrt(mean_dot(ri, ri, n_mc));
  }
  return R;
}

}  // namespace stlmine
