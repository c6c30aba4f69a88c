#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "stlmine/normalization.hpp"
#include "stlmine/parser.hpp"
#include "stlmine/rng.hpp"
#include "stlmine/sampling.hpp"
#include "stlmine/trajectory.hpp"

using namespace stlmine;

namespace {

double total_variation(const Trajectory& t, std::size_t d) {
  auto ch = t.channel(d);
  double tv = 0.0;
  for (std::size_t i = 1; i < ch.size(); ++i) tv += std::abs(ch[i] - ch[i - 1]);
  return tv;
}

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name)
      : path((std::filesystem::temp_directory_path() / name).string()) {}
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("mu0 defaults give 100 points and exact total variation") {
  Mu0Params p;
  CHECK(p.n_points() == 100);
  // The level draws precede the flip draws, so with the same seed the q = 0
  // run exposes the drawn K as |x_end - x_0| and the q > 0 run must have the
  // same total variation (flips rearrange increments without changing their
  // magnitudes).
  Mu0Params p0 = p;
  p0.q = 0.0;
  for (std::uint64_t i = 0; i < 200; ++i) {
    std::uint64_t seed = derive_seed(1, i);
    Trajectory t = sample_mu0(p, 2, seed);
    Trajectory m = sample_mu0(p0, 2, seed);
    CHECK(t.n_points() == 100);
    CHECK(t.dim() == 2);
    for (std::size_t d = 0; d < 2; ++d) {
      auto mc = m.channel(d);
      double k = std::abs(mc.back() - mc.front());
      CHECK(total_variation(t, d) == doctest::Approx(k).epsilon(1e-9));
      CHECK(total_variation(m, d) == doctest::Approx(k).epsilon(1e-9));
    }
  }
}

TEST_CASE("mu0 with q=0 is monotone per dimension and TV equals K") {
  Mu0Params p;
  p.q = 0.0;
  for (std::uint64_t i = 0; i < 200; ++i) {
    Trajectory t = sample_mu0(p, 1, derive_seed(2, i));
    auto ch = t.channel(0);
    bool nondec = true, noninc = true;
    for (std::size_t k = 1; k < ch.size(); ++k) {
      if (ch[k] < ch[k - 1]) nondec = false;
      if (ch[k] > ch[k - 1]) noninc = false;
    }
    CHECK((nondec || noninc));
    double span = std::abs(ch.back() - ch.front());
    CHECK(total_variation(t, 0) == doctest::Approx(span).epsilon(1e-12));
  }
}

TEST_CASE("mu0 sampler statistics match its construction") {
  Mu0Params p;
  const std::size_t n = 4000;
  double mean0 = 0.0, var0 = 0.0, tv_mean = 0.0, flips = 0.0, steps = 0.0;
  std::vector<double> starts;
  starts.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    Trajectory t = sample_mu0(p, 1, derive_seed(3, i));
    auto ch = t.channel(0);
    starts.push_back(ch[0]);
    mean0 += ch[0];
    tv_mean += total_variation(t, 0);
    int prev = 0;
    for (std::size_t k = 1; k < ch.size(); ++k) {
      double d = ch[k] - ch[k - 1];
      int sign = d > 0 ? 1 : (d < 0 ? -1 : prev);
      if (prev != 0) {
        steps += 1.0;
        if (sign != prev) flips += 1.0;
      }
      prev = sign;
    }
  }
  mean0 /= n;
  for (double s : starts) var0 += (s - mean0) * (s - mean0);
  var0 /= n;
  tv_mean /= n;
  CHECK(std::abs(mean0) < 0.05);
  CHECK(std::sqrt(var0) == doctest::Approx(1.0).epsilon(0.05));
  CHECK(tv_mean == doctest::Approx(1.0).epsilon(0.1));  // E[(N(0,1))^2] = 1
  CHECK(flips / steps == doctest::Approx(0.1).epsilon(0.25));
}

TEST_CASE("mu0 parameter validation") {
  Mu0Params p;
  p.q = 1.5;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = Mu0Params{};
  p.b = p.a;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = Mu0Params{};
  p.s_start = 0.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = Mu0Params{};
  p.delta = -1.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("mu0 determinism") {
  Mu0Params p;
  Trajectory a = sample_mu0(p, 3, 777);
  Trajectory b = sample_mu0(p, 3, 777);
  for (std::size_t d = 0; d < 3; ++d) {
    auto ca = a.channel(d), cb = b.channel(d);
    for (std::size_t i = 0; i < ca.size(); ++i) CHECK(ca[i] == cb[i]);
  }
}

TEST_CASE("linear benchmark shapes and zero-noise geometry") {
  LinearGenConfig cfg;
  LabeledDataset d = gen_linear_dataset(cfg, 5);
  CHECK(d.positives.size() == 100);
  CHECK(d.negatives.size() == 100);
  CHECK(d.n_points() == 100);
  CHECK(d.dim() == 1);

  cfg.noise_std = 0.0;
  cfg.n_pos = 3;
  cfg.n_neg = 3;
  LabeledDataset clean = gen_linear_dataset(cfg, 5);
  for (const auto& t : clean.positives) {
    auto ch = t.channel(0);
    CHECK(ch[0] == 1.0);
    for (std::size_t k = 0; k + 1 < ch.size(); ++k)
      CHECK(ch[k + 1] == doctest::Approx(ch[k] * 1.03).epsilon(1e-12));
  }
  for (const auto& t : clean.negatives) {
    auto ch = t.channel(0);
    for (std::size_t k = 0; k + 1 < ch.size(); ++k)
      CHECK(ch[k + 1] == doctest::Approx(ch[k] * 0.97).epsilon(1e-12));
  }
}

TEST_CASE("dataset CSV round trip is exact") {
  LinearGenConfig cfg;
  cfg.n_pos = 7;
  cfg.n_neg = 5;
  cfg.n_points = 23;
  LabeledDataset d = gen_linear_dataset(cfg, 11);
  TempFile f("stlmine_test_roundtrip.csv");
  write_dataset_csv(d, f.path);
  LabeledDataset r = read_dataset_csv(f.path);
  REQUIRE(r.positives.size() == d.positives.size());
  REQUIRE(r.negatives.size() == d.negatives.size());
  REQUIRE(r.n_points() == d.n_points());
  for (std::size_t i = 0; i < d.positives.size(); ++i) {
    auto a = d.positives[i].channel(0), b = r.positives[i].channel(0);
    for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k] == b[k]);
  }
  // writing again gives byte-identical output
  TempFile f2("stlmine_test_roundtrip2.csv");
  write_dataset_csv(r, f2.path);
  std::ifstream s1(f.path, std::ios::binary), s2(f2.path, std::ios::binary);
  std::string c1((std::istreambuf_iterator<char>(s1)), std::istreambuf_iterator<char>());
  std::string c2((std::istreambuf_iterator<char>(s2)), std::istreambuf_iterator<char>());
  CHECK(c1 == c2);
}

TEST_CASE("CSV reader rejects malformed input") {
  auto write = [](const std::string& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    os << content;
  };
  TempFile f("stlmine_test_bad.csv");

  write(f.path, "traj_id,label,t,x0\n0,1,0,1.0\n0,1,1\n");
  CHECK_THROWS_AS(read_dataset_csv(f.path), std::runtime_error);

  write(f.path, "bogus,header\n");
  CHECK_THROWS_AS(read_dataset_csv(f.path), std::runtime_error);

  write(f.path, "traj_id,label,t,x0\n0,2,0,1.0\n");
  CHECK_THROWS_AS(read_dataset_csv(f.path), std::runtime_error);

  // label changes within a trajectory
  write(f.path, "traj_id,label,t,x0\n0,1,0,1.0\n0,0,1,1.0\n");
  CHECK_THROWS_AS(read_dataset_csv(f.path), std::runtime_error);

  // ragged trajectory lengths
  write(f.path, "traj_id,label,t,x0\n0,1,0,1.0\n0,1,1,1.0\n1,0,0,2.0\n");
  CHECK_THROWS_AS(read_dataset_csv(f.path), std::runtime_error);

  CHECK_THROWS_AS(read_dataset_csv("/nonexistent/nowhere.csv"), std::runtime_error);
}

TEST_CASE("normalization is exact and idempotent") {
  LinearGenConfig cfg;
  cfg.n_pos = 20;
  cfg.n_neg = 20;
  LabeledDataset d = gen_linear_dataset(cfg, 3);
  auto [nd, stats] = normalize(d);
  REQUIRE(stats.dim() == 1);

  // pooled mean ~0, population std ~1 after the transform
  double sum = 0.0, sq = 0.0;
  std::size_t count = 0;
  auto accumulate = [&](const std::vector<Trajectory>& ts) {
    for (const auto& t : ts)
      for (double v : t.channel(0)) {
        sum += v;
        sq += v * v;
        ++count;
      }
  };
  accumulate(nd.positives);
  accumulate(nd.negatives);
  double mean = sum / static_cast<double>(count);
  double var = sq / static_cast<double>(count) - mean * mean;
  CHECK(std::abs(mean) < 1e-9);
  CHECK(std::abs(var - 1.0) < 1e-9);

  auto [nd2, stats2] = normalize(nd);
  CHECK(std::abs(stats2.mean[0]) < 1e-9);
  CHECK(stats2.std[0] == doctest::Approx(1.0).epsilon(1e-9));
  for (std::size_t i = 0; i < nd.positives.size(); ++i) {
    auto a = nd.positives[i].channel(0), b = nd2.positives[i].channel(0);
    for (std::size_t k = 0; k < a.size(); ++k) CHECK(std::abs(a[k] - b[k]) <= 1e-9);
  }

  LabeledDataset back = denormalize(nd, stats);
  for (std::size_t i = 0; i < d.positives.size(); ++i) {
    auto a = d.positives[i].channel(0), b = back.positives[i].channel(0);
    for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k] == doctest::Approx(b[k]).epsilon(1e-12));
  }
}

TEST_CASE("zero-variance dimensions are rejected") {
  LabeledDataset d;
  Trajectory flat(1, 10, 1.0);
  for (auto& v : flat.channel(0)) v = 2.5;
  d.positives.push_back(flat);
  d.negatives.push_back(flat);
  CHECK_THROWS_AS(compute_stats(d), std::invalid_argument);
}

TEST_CASE("threshold denormalization maps atoms affinely") {
  DatasetStats stats;
  stats.mean = {2.0, -1.0};
  stats.std = {0.5, 4.0};
  Formula f = parse_formula("(x0 <= 1) and (F[0,5] (x1 >= -0.25))");
  Formula g = denormalize_thresholds(f, stats);
  CHECK(format_formula(g) == "(x0 <= 2.5) and (F[0,5] (x1 >= -2))");
}

TEST_CASE("time rescaling follows the floor/ceil rule") {
  Formula f = parse_formula("F[70,100] (x0 <= 1)");
  CHECK(format_formula(rescale_time_bounds(f, 61)) == "F[42,61] (x0 <= 1)");
  Formula g = parse_formula("G[0,36] (x0 <= 1)");
  CHECK(format_formula(rescale_time_bounds(g, 100)) == "G[0,36] (x0 <= 1)");
  // unbounded maps through 100 and back to inf when it reaches the end
  Formula h = parse_formula("F[70,inf] (x0 <= 1)");
  CHECK(format_formula(rescale_time_bounds(h, 61)) == "F[42,inf] (x0 <= 1)");
  // identity at n_test = 100 on integer bounds
  Formula u = parse_formula("x0 <= 1 U[3,97] x0 >= 0");
  CHECK(format_formula(rescale_time_bounds(u, 100)) == format_formula(u));
}

TEST_CASE("time rescaling keeps windows non-degenerate") {
  for (std::size_t n_test : {7ul, 31ul, 61ul, 100ul, 153ul}) {
    for (double a : {0.0, 11.1, 33.3, 70.0, 88.9}) {
      for (double b : {11.1, 44.4, 70.0, 100.0}) {
        if (b <= a) continue;
        Formula f = Formula::eventually(Interval(a, b), Formula::atom(0, Cmp::Le, 0.0));
        Formula g = rescale_time_bounds(f, n_test);
        CHECK(g.window().lo <= g.window().hi);
        CHECK(g.window().hi > g.window().lo);  // width never rounds to zero
      }
    }
  }
}

TEST_CASE("formula distribution respects caps") {
  FDistParams p;
  p.max_vars = 2;
  p.max_depth = 4;
  for (std::uint64_t i = 0; i < 500; ++i) {
    Formula f = sample_formula(p, derive_seed(9, i));
    CHECK(f.min_dim() <= 2);
    CHECK(f.node_count() >= 1);
    // depth cap implies a bounded node count for binary trees
    CHECK(f.node_count() <= (1u << (p.max_depth + 1)));
  }
  p.p_leaf = 0.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p.p_leaf = 1.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}
