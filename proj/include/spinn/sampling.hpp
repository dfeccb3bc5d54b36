#pragma once

#include <cstdint>
#include <vector>

namespace spinn::sampling {

struct Point {
  double t = 0.0;
  double x = 0.0;
};

// Equidistant grid, endpoints included. n_t and n_x count points, so spacing
// is (hi - lo) / (n - 1).
struct GridSpec {
  double t_lo = 0.0, t_hi = 1.0;
  double x_lo = 0.0, x_hi = 1.0;
  int n_t = 100;
  int n_x = 256;

  void validate() const;
  double t_at(int i) const { return t_lo + (t_hi - t_lo) * double(i) / double(n_t - 1); }
  double x_at(int j) const { return x_lo + (x_hi - x_lo) * double(j) / double(n_x - 1); }
};

// A batch of (t,x) points, optionally with target values attached (one vector
// per unknown, aligned with points).
struct PointSet {
  std::vector<Point> points;
  std::vector<std::vector<double>> targets;

  std::size_t size() const { return points.size(); }
};

// Full grid, t-major: (t_0,x_0), (t_0,x_1), ..., (t_1,x_0), ...
PointSet make_grid(const GridSpec& grid);

// Grid points on the initial slice (t = t_lo) and the two spatial boundary
// edges, each point listed once: initial slice first (x ascending), then
// x = x_lo and x = x_hi edges (t ascending, initial corner skipped).
// segment_out, when given, receives 0 = initial, 1 = left edge, 2 = right edge.
PointSet ib_pool(const GridSpec& grid, std::vector<int>* segment_out = nullptr);

// Draw n indices from [0, pool) without replacement, uniformly.
std::vector<std::size_t> sample_without_replacement(std::size_t pool, std::size_t n,
                                                    std::uint64_t seed);

// Latin hypercube: exactly one point per axis stratum, uniform inside it.
PointSet latin_hypercube(std::size_t n, double t_lo, double t_hi, double x_lo, double x_hi,
                         std::uint64_t seed);

// v_i + noise_level * std(values) * zeta_i with zeta iid standard normal.
// Population standard deviation; noise_level 0 returns the input unchanged.
std::vector<double> corrupt(const std::vector<double>& values, double noise_level,
                            std::uint64_t seed);

}  // namespace spinn::sampling
