#include "spinn/sampling.hpp"

#include <cmath>
#include <stdexcept>

#include "spinn/rng.hpp"

namespace spinn::sampling {

void GridSpec::validate() const {
  if (!(t_hi > t_lo) || !(x_hi > x_lo))
    throw std::invalid_argument("GridSpec: degenerate range");
  if (n_t < 2 || n_x < 2) throw std::invalid_argument("GridSpec: need at least 2 points per axis");
}

PointSet make_grid(const GridSpec& grid) {
  grid.validate();
  PointSet set;
  set.points.reserve(std::size_t(grid.n_t) * std::size_t(grid.n_x));
  for (int i = 0; i < grid.n_t; ++i) {
    const double t = grid.t_at(i);
    for (int j = 0; j < grid.n_x; ++j) set.points.push_back({t, grid.x_at(j)});
  }
  return set;
}

PointSet ib_pool(const GridSpec& grid, std::vector<int>* segment_out) {
  grid.validate();
  PointSet set;
  if (segment_out) segment_out->clear();
  const double t0 = grid.t_at(0);
  for (int j = 0; j < grid.n_x; ++j) {
    set.points.push_back({t0, grid.x_at(j)});
    if (segment_out) segment_out->push_back(0);
  }
  for (int i = 1; i < grid.n_t; ++i) {
    set.points.push_back({grid.t_at(i), grid.x_at(0)});
    if (segment_out) segment_out->push_back(1);
  }
  for (int i = 1; i < grid.n_t; ++i) {
    set.points.push_back({grid.t_at(i), grid.x_at(grid.n_x - 1)});
    if (segment_out) segment_out->push_back(2);
  }
  return set;
}

std::vector<std::size_t> sample_without_replacement(std::size_t pool, std::size_t n,
                                                    std::uint64_t seed) {
  if (n > pool)
    throw std::invalid_argument("sample_without_replacement: n exceeds pool size");
  Rng rng(seed);
  std::vector<std::size_t> idx(pool);
  for (std::size_t i = 0; i < pool; ++i) idx[i] = i;
  // Partial Fisher-Yates: first n entries are the draw.
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + std::size_t(rng.bounded(pool - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(n);
  return idx;
}

PointSet latin_hypercube(std::size_t n, double t_lo, double t_hi, double x_lo, double x_hi,
                         std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("latin_hypercube: n must be >= 1");
  Rng rng(seed);
  const auto perm_t = rng.permutation(n);
  const auto perm_x = rng.permutation(n);
  PointSet set;
  set.points.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double ut = rng.uniform01();
    const double ux = rng.uniform01();
    set.points[i].t = t_lo + (t_hi - t_lo) * (double(perm_t[i]) + ut) / double(n);
    set.points[i].x = x_lo + (x_hi - x_lo) * (double(perm_x[i]) + ux) / double(n);
  }
  return set;
}

std::vector<double> corrupt(const std::vector<double>& values, double noise_level,
                            std::uint64_t seed) {
  if (noise_level < 0.0) throw std::invalid_argument("corrupt: negative noise level");
  if (noise_level == 0.0 || values.empty()) return values;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= double(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= double(values.size());
  const double stddev = std::sqrt(var);
  Rng rng(seed);
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    out[i] = values[i] + noise_level * stddev * rng.normal();
  return out;
}

}  // namespace spinn::sampling
