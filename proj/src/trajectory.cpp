#include "stlmine/trajectory.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "stlmine/formula.hpp"  // format_number
#include "stlmine/rng.hpp"

namespace stlmine {

Trajectory::Trajectory(std::size_t dim, std::size_t n_points, double dt)
    : dim_(dim), n_points_(n_points), dt_(dt), values_(dim * n_points, 0.0) {
  if (dim == 0 || n_points == 0) throw std::invalid_argument("empty trajectory");
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
}

std::size_t LabeledDataset::dim() const {
  if (!positives.empty()) return positives.front().dim();
  if (!negatives.empty()) return negatives.front().dim();
  return 0;
}

std::size_t LabeledDataset::n_points() const {
  if (!positives.empty()) return positives.front().n_points();
  if (!negatives.empty()) return negatives.front().n_points();
  return 0;
}

namespace {

void rename_over(const std::string& tmp, const std::string& path) {
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw std::runtime_error("cannot move temporary file onto " + path);
  }
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

double parse_double(std::string_view s, std::size_t line_no, const char* what) {
  double value = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), value);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw std::runtime_error("csv line " + std::to_string(line_no) + ": malformed " + what);
  return value;
}

std::size_t parse_index(std::string_view s, std::size_t line_no, const char* what) {
  std::size_t value = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), value);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw std::runtime_error("csv line " + std::to_string(line_no) + ": malformed " + what);
  return value;
}

struct PendingTraj {
  int label = -1;
  std::vector<double> times;
  std::vector<std::vector<double>> rows;  // one vector per sample, dim values
};

}  // namespace

void write_dataset_csv(const LabeledDataset& data, const std::string& path) {
  const std::size_t dim = data.dim();
  if (dim == 0) throw std::invalid_argument("cannot write empty dataset");

  std::string tmp = path + ".tmp";
  std::ofstream out(tmp, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + tmp + " for writing");

  std::string line = "traj_id,label,t";
  for (std::size_t d = 0; d < dim; ++d) line += ",x" + std::to_string(d);
  out << line << '\n';

  std::size_t traj_id = 0;
  auto emit = [&](const Trajectory& traj, int label) {
    if (traj.dim() != dim) throw std::invalid_argument("mixed trajectory dimensions");
    for (std::size_t t = 0; t < traj.n_points(); ++t) {
      line.clear();
      line += std::to_string(traj_id);
      line += label ? ",1," : ",0,";
      line += format_number(static_cast<double>(t) * traj.dt());
      for (std::size_t d = 0; d < dim; ++d) {
        line += ',';
        line += format_number(traj.value(d, t));
      }
      out << line << '\n';
    }
    ++traj_id;
  };
  for (const auto& traj : data.positives) emit(traj, 1);
  for (const auto& traj : data.negatives) emit(traj, 0);

  out.close();
  if (!out) throw std::runtime_error("failed writing " + tmp);
  rename_over(tmp, path);
}

LabeledDataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);

  std::string header;
  if (!std::getline(in, header)) throw std::runtime_error("empty csv file " + path);
  if (!header.empty() && header.back() == '\r') header.pop_back();
  auto head = split_csv(header);
  if (head.size() < 4 || head[0] != "traj_id" || head[1] != "label" || head[2] != "t")
    throw std::runtime_error("bad csv header, expected traj_id,label,t,x0,...");
  const std::size_t dim = head.size() - 3;
  for (std::size_t d = 0; d < dim; ++d)
    if (head[3 + d] != "x" + std::to_string(d))
      throw std::runtime_error("bad csv header, expected column x" + std::to_string(d));

  std::vector<std::pair<std::size_t, PendingTraj>> trajs;  // insertion ordered
  std::string raw;
  std::size_t line_no = 1;
  while (std::getline(in, raw)) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    if (raw.empty()) continue;
    auto fields = split_csv(raw);
    if (fields.size() != 3 + dim)
      throw std::runtime_error("csv line " + std::to_string(line_no) + ": expected " +
                               std::to_string(3 + dim) + " fields, got " +
                               std::to_string(fields.size()));
    std::size_t id = parse_index(fields[0], line_no, "traj_id");
    std::size_t label = parse_index(fields[1], line_no, "label");
    if (label > 1)
      throw std::runtime_error("csv line " + std::to_string(line_no) + ": label must be 0 or 1");
    double t = parse_double(fields[2], line_no, "time");

    if (trajs.empty() || trajs.back().first != id) {
      for (const auto& [seen_id, traj] : trajs)
        if (seen_id == id)
          throw std::runtime_error("csv line " + std::to_string(line_no) +
                                   ": trajectory rows must be contiguous");
      trajs.emplace_back(id, PendingTraj{});
    }
    PendingTraj& cur = trajs.back().second;
    if (cur.label == -1) cur.label = static_cast<int>(label);
    else if (cur.label != static_cast<int>(label))
      throw std::runtime_error("csv line " + std::to_string(line_no) +
                               ": label changes within trajectory");
    cur.times.push_back(t);
    std::vector<double> row(dim);
    for (std::size_t d = 0; d < dim; ++d) row[d] = parse_double(fields[3 + d], line_no, "value");
    cur.rows.push_back(std::move(row));
  }
  if (trajs.empty()) throw std::runtime_error("csv file has no data rows");

  const std::size_t n_points = trajs.front().second.rows.size();
  if (n_points == 0) throw std::runtime_error("empty trajectory in csv");
  double dt = 1.0;
  if (n_points > 1) dt = trajs.front().second.times[1] - trajs.front().second.times[0];
  if (!(dt > 0.0)) throw std::runtime_error("non-increasing time column");

  LabeledDataset data;
  for (auto& [id, pending] : trajs) {
    if (pending.rows.size() != n_points)
      throw std::runtime_error("trajectory " + std::to_string(id) + " has " +
                               std::to_string(pending.rows.size()) + " samples, expected " +
                               std::to_string(n_points));
    for (std::size_t t = 0; t < n_points; ++t) {
      double expected = static_cast<double>(t) * dt;
      if (std::abs(pending.times[t] - expected) > 1e-9 * std::max(1.0, std::abs(expected)))
        throw std::runtime_error("trajectory " + std::to_string(id) +
                                 ": non-uniform time steps");
    }
    Trajectory traj(dim, n_points, dt);
    for (std::size_t t = 0; t < n_points; ++t)
      for (std::size_t d = 0; d < dim; ++d) traj.value(d, t) = pending.rows[t][d];
    (pending.label == 1 ? data.positives : data.negatives).push_back(std::move(traj));
  }
  return data;
}

namespace {

constexpr std::uint64_t kFoldSalt = 0xF01D0000ull;

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  auto rng = make_rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

}  // namespace

std::vector<FoldSplit> stratified_kfold(const LabeledDataset& d, std::size_t k,
                                        std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("stratified_kfold: k must be at least 2");
  if (d.positives.size() < k || d.negatives.size() < k)
    throw std::invalid_argument("stratified_kfold: each class needs at least k members");

  auto pos = shuffled_indices(d.positives.size(), derive_seed(seed, kFoldSalt));
  auto neg = shuffled_indices(d.negatives.size(), derive_seed(seed, kFoldSalt + 1));

  std::vector<FoldSplit> folds(k);
  auto deal = [&](const std::vector<std::size_t>& order, const std::vector<Trajectory>& from,
                  std::vector<Trajectory> LabeledDataset::* side) {
    for (std::size_t i = 0; i < order.size(); ++i) {
      const std::size_t test_fold = i % k;
      for (std::size_t f = 0; f < k; ++f)
        ((f == test_fold ? folds[f].test : folds[f].train).*side).push_back(from[order[i]]);
    }
  };
  deal(pos, d.positives, &LabeledDataset::positives);
  deal(neg, d.negatives, &LabeledDataset::negatives);
  return folds;
}

FoldSplit stratified_holdout(const LabeledDataset& d, double train_fraction,
                             std::uint64_t seed) {
  if (!(train_fraction > 0.0) || !(train_fraction < 1.0))
    throw std::invalid_argument("stratified_holdout: train_fraction must be in (0, 1)");
  if (d.positives.size() < 2 || d.negatives.size() < 2)
    throw std::invalid_argument("stratified_holdout: each class needs at least 2 members");

  FoldSplit split;
  auto cut = [&](const std::vector<Trajectory>& from, std::uint64_t salt,
                 std::vector<Trajectory> LabeledDataset::* side) {
    auto order = shuffled_indices(from.size(), derive_seed(seed, salt));
    double want = train_fraction * static_cast<double>(from.size());
    std::size_t n_train = static_cast<std::size_t>(std::floor(want + 0.5));
    n_train = std::clamp<std::size_t>(n_train, 1, from.size() - 1);
    for (std::size_t i = 0; i < order.size(); ++i)
      ((i < n_train ? split.train : split.test).*side).push_back(from[order[i]]);
  };
  cut(d.positives, kFoldSalt + 2, &LabeledDataset::positives);
  cut(d.negatives, kFoldSalt + 3, &LabeledDataset::negatives);
  return split;
}

}  // namespace stlmine
