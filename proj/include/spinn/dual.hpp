#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <utility>

namespace spinn::ad {

// Scalar carrying partial derivatives with respect to the two network inputs
// (t, x). Supported multi-indices (i = order in t, j = order in x), limited to
// i <= 1, j <= 3, i + j <= 3:
//
//   slot 0: (0,0) value      slot 4: (0,3) d3/dx3
//   slot 1: (1,0) d/dt       slot 5: (1,1) d2/dtdx
//   slot 2: (0,1) d/dx       slot 6: (1,2) d3/dtdx2
//   slot 3: (0,2) d2/dx2
//
// A PartialSet is a bitmask over these slots. Sets built through the public
// constructors are downward closed (every sub-index of a member is a member),
// which is what makes truncated-Taylor propagation exact: any coefficient
// absent from an operand's set is identically zero.
inline constexpr int kNumSlots = 7;
inline constexpr int kSlotTOrder[kNumSlots] = {0, 1, 0, 0, 0, 1, 1};
inline constexpr int kSlotXOrder[kNumSlots] = {0, 0, 1, 2, 3, 1, 2};

class PartialSet {
 public:
  constexpr PartialSet() : bits_(1) {}  // value slot is always present

  // All indices with t-order <= max_t, x-order <= max_x, total order <= 3.
  static PartialSet up_to(int max_t_order, int max_x_order) {
    if (max_t_order < 0 || max_t_order > 1 || max_x_order < 0 || max_x_order > 3)
      throw std::invalid_argument(
          "PartialSet::up_to: supported orders are t in {0,1}, x in {0,1,2,3}");
    std::uint8_t bits = 0;
    for (int s = 0; s < kNumSlots; ++s)
      if (kSlotTOrder[s] <= max_t_order && kSlotXOrder[s] <= max_x_order)
        bits |= std::uint8_t(1u << s);
    PartialSet set;
    set.bits_ = bits;
    return set;
  }

  // Smallest downward-closed set containing the given (i,j) multi-indices.
  static PartialSet closure_of(std::initializer_list<std::pair<int, int>> idx) {
    PartialSet set;
    for (auto [i, j] : idx) {
      int s = slot_of(i, j);
      for (int p = 0; p <= i; ++p)
        for (int q = 0; q <= j; ++q) set.bits_ |= std::uint8_t(1u << slot_of(p, q));
      (void)s;
    }
    return set;
  }

  static int slot_of(int t_order, int x_order) {
    for (int s = 0; s < kNumSlots; ++s)
      if (kSlotTOrder[s] == t_order && kSlotXOrder[s] == x_order) return s;
    throw std::invalid_argument("unsupported multi-index (" + std::to_string(t_order) +
                                "," + std::to_string(x_order) + ")");
  }

  bool contains(int slot) const { return bits_ & (1u << slot); }
  bool contains(int t_order, int x_order) const { return contains(slot_of(t_order, x_order)); }
  std::uint8_t bits() const { return bits_; }
  int count() const { return __builtin_popcount(bits_); }

  // True when the set is exactly the first n of {value, d/dt, d/dx, d2/dx2,
  // d3/dx3} with no mixed slots; the flat training kernels only handle these.
  bool is_prefix() const {
    return bits_ == 0x01 || bits_ == 0x03 || bits_ == 0x07 || bits_ == 0x0f ||
           bits_ == 0x1f;
  }
  int prefix_count() const { return is_prefix() ? count() : -1; }

  PartialSet union_with(PartialSet o) const {
    PartialSet s;
    s.bits_ = bits_ | o.bits_;
    return s;
  }
  bool operator==(const PartialSet&) const = default;

 private:
  std::uint8_t bits_;
};

using Coeffs = std::array<double, kNumSlots>;

namespace detail {

// Leibniz pairs per output slot: out[k] += coeff * a[i] * b[j].
struct MulTerm {
  std::uint8_t out, i, j;
  double coeff;
};
inline constexpr MulTerm kMulTable[] = {
    {0, 0, 0, 1.0},
    {1, 1, 0, 1.0}, {1, 0, 1, 1.0},
    {2, 2, 0, 1.0}, {2, 0, 2, 1.0},
    {3, 3, 0, 1.0}, {3, 2, 2, 2.0}, {3, 0, 3, 1.0},
    {4, 4, 0, 1.0}, {4, 3, 2, 3.0}, {4, 2, 3, 3.0}, {4, 0, 4, 1.0},
    {5, 5, 0, 1.0}, {5, 1, 2, 1.0}, {5, 2, 1, 1.0}, {5, 0, 5, 1.0},
    {6, 6, 0, 1.0}, {6, 5, 2, 2.0}, {6, 1, 3, 1.0},
    {6, 3, 1, 1.0}, {6, 2, 5, 2.0}, {6, 0, 6, 1.0},
};

inline void mul(PartialSet set, const Coeffs& a, const Coeffs& b, Coeffs& out) {
  out = {};
  for (const MulTerm& m : kMulTable)
    if (set.contains(m.out)) out[m.out] += m.coeff * a[m.i] * b[m.j];
}

// Adjoint of mul: given dL/dout, accumulate dL/da and dL/db.
inline void mul_backward(PartialSet set, const Coeffs& a, const Coeffs& b,
                         const Coeffs& out_adj, Coeffs& a_adj, Coeffs& b_adj) {
  for (const MulTerm& m : kMulTable) {
    if (!set.contains(m.out)) continue;
    const double w = m.coeff * out_adj[m.out];
    a_adj[m.i] += w * b[m.j];
    b_adj[m.j] += w * a[m.i];
  }
}

// Faa di Bruno composition for a smooth unary g with derivatives d1..d3 at the
// operand value. d[0] is g(f0) itself.
inline void unary(PartialSet set, const Coeffs& f, const double d[4], Coeffs& out) {
  out = {};
  out[0] = d[0];
  const double d1 = d[1], d2 = d[2], d3 = d[3];
  if (set.contains(1)) out[1] = d1 * f[1];
  if (set.contains(2)) out[2] = d1 * f[2];
  if (set.contains(3)) out[3] = d1 * f[3] + d2 * f[2] * f[2];
  if (set.contains(4))
    out[4] = d1 * f[4] + 3.0 * d2 * f[2] * f[3] + d3 * f[2] * f[2] * f[2];
  if (set.contains(5)) out[5] = d1 * f[5] + d2 * f[1] * f[2];
  if (set.contains(6))
    out[6] = d1 * f[6] + d2 * (f[1] * f[3] + 2.0 * f[2] * f[5]) + d3 * f[1] * f[2] * f[2];
}

// Adjoint of unary; needs one extra derivative d4 because the chain through
// f[0] differentiates d1..d3 once more.
inline void unary_backward(PartialSet set, const Coeffs& f, const double d[5],
                           const Coeffs& out_adj, Coeffs& f_adj) {
  const double d1 = d[1], d2 = d[2], d3 = d[3], d4 = d[4];
  double a0 = out_adj[0] * d1;
  f_adj[0] += 0.0;  // accumulated below
  if (set.contains(1)) {
    a0 += out_adj[1] * d2 * f[1];
    f_adj[1] += out_adj[1] * d1;
  }
  if (set.contains(2)) {
    a0 += out_adj[2] * d2 * f[2];
    f_adj[2] += out_adj[2] * d1;
  }
  if (set.contains(3)) {
    a0 += out_adj[3] * (d2 * f[3] + d3 * f[2] * f[2]);
    f_adj[3] += out_adj[3] * d1;
    f_adj[2] += out_adj[3] * 2.0 * d2 * f[2];
  }
  if (set.contains(4)) {
    a0 += out_adj[4] * (d2 * f[4] + 3.0 * d3 * f[2] * f[3] + d4 * f[2] * f[2] * f[2]);
    f_adj[4] += out_adj[4] * d1;
    f_adj[3] += out_adj[4] * 3.0 * d2 * f[2];
    f_adj[2] += out_adj[4] * (3.0 * d2 * f[3] + 3.0 * d3 * f[2] * f[2]);
  }
  if (set.contains(5)) {
    a0 += out_adj[5] * d3 * f[1] * f[2];
    f_adj[5] += out_adj[5] * d1;
    f_adj[1] += out_adj[5] * d2 * f[2];
    f_adj[2] += out_adj[5] * d2 * f[1];
  }
  if (set.contains(6)) {
    a0 += out_adj[6] * (d3 * (f[1] * f[3] + 2.0 * f[2] * f[5]) + d4 * f[1] * f[2] * f[2]);
    f_adj[6] += out_adj[6] * d1;
    f_adj[1] += out_adj[6] * (d2 * f[3] + d3 * f[2] * f[2]);
    f_adj[3] += out_adj[6] * d2 * f[1];
    f_adj[5] += out_adj[6] * 2.0 * d2 * f[2];
    f_adj[2] += out_adj[6] * (2.0 * d2 * f[5] + 2.0 * d3 * f[1] * f[2]);
  }
  f_adj[0] += a0;
}

// Derivative ladders d[0..4] = g, g', g'', g''', g'''' at y.
inline void tanh_derivs(double y, double d[5]) {
  const double s = std::tanh(y);
  const double d1 = 1.0 - s * s;
  d[0] = s;
  d[1] = d1;
  d[2] = -2.0 * s * d1;
  d[3] = -2.0 * d1 * (1.0 - 3.0 * s * s);
  d[4] = 8.0 * s * d1 * (2.0 - 3.0 * s * s);
}

inline void exp_derivs(double y, double d[5]) {
  const double e = std::exp(y);
  d[0] = d[1] = d[2] = d[3] = d[4] = e;
}

inline void log_derivs(double y, double d[5]) {
  const double r = 1.0 / y;
  d[0] = std::log(y);
  d[1] = r;
  d[2] = -r * r;
  d[3] = 2.0 * r * r * r;
  d[4] = -6.0 * r * r * r * r;
}

inline void recip_derivs(double y, double d[5]) {
  const double r = 1.0 / y;
  d[0] = r;
  d[1] = -r * r;
  d[2] = 2.0 * r * r * r;
  d[3] = -6.0 * r * r * r * r;
  d[4] = 24.0 * r * r * r * r * r;
}

}  // namespace detail

// Value-semantic dual scalar. Binary operations take the union of the operand
// sets; coefficients a set does not store are exact zeros by construction.
class DualScalar {
 public:
  DualScalar() : c_{}, set_{} {}
  DualScalar(double value) : c_{}, set_{} { c_[0] = value; }  // NOLINT: implicit by design
  DualScalar(const Coeffs& c, PartialSet set) : c_(c), set_(set) {}

  // Input carriers: t has d/dt = 1, x has d/dx = 1.
  static DualScalar input_t(double value, PartialSet set) {
    DualScalar d;
    d.set_ = set;
    d.c_[0] = value;
    if (set.contains(1)) d.c_[1] = 1.0;
    return d;
  }
  static DualScalar input_x(double value, PartialSet set) {
    DualScalar d;
    d.set_ = set;
    d.c_[0] = value;
    if (set.contains(2)) d.c_[2] = 1.0;
    return d;
  }

  double value() const { return c_[0]; }
  double partial(int t_order, int x_order) const {
    return c_[PartialSet::slot_of(t_order, x_order)];
  }
  const Coeffs& coeffs() const { return c_; }
  PartialSet set() const { return set_; }

  friend DualScalar operator+(const DualScalar& a, const DualScalar& b) {
    DualScalar r;
    r.set_ = a.set_.union_with(b.set_);
    for (int s = 0; s < kNumSlots; ++s) r.c_[s] = a.c_[s] + b.c_[s];
    return r;
  }
  friend DualScalar operator-(const DualScalar& a, const DualScalar& b) {
    DualScalar r;
    r.set_ = a.set_.union_with(b.set_);
    for (int s = 0; s < kNumSlots; ++s) r.c_[s] = a.c_[s] - b.c_[s];
    return r;
  }
  friend DualScalar operator-(const DualScalar& a) {
    DualScalar r;
    r.set_ = a.set_;
    for (int s = 0; s < kNumSlots; ++s) r.c_[s] = -a.c_[s];
    return r;
  }
  friend DualScalar operator*(const DualScalar& a, const DualScalar& b) {
    DualScalar r;
    r.set_ = a.set_.union_with(b.set_);
    detail::mul(r.set_, a.c_, b.c_, r.c_);
    return r;
  }
  friend DualScalar operator*(double s, const DualScalar& a) {
    DualScalar r;
    r.set_ = a.set_;
    for (int k = 0; k < kNumSlots; ++k) r.c_[k] = s * a.c_[k];
    return r;
  }
  friend DualScalar operator*(const DualScalar& a, double s) { return s * a; }
  friend DualScalar operator/(const DualScalar& a, const DualScalar& b);

 private:
  Coeffs c_;
  PartialSet set_;

  friend DualScalar apply_unary(const DualScalar& a, void (*derivs)(double, double[5]));
};

inline DualScalar apply_unary(const DualScalar& a, void (*derivs)(double, double[5])) {
  double d[5];
  derivs(a.c_[0], d);
  DualScalar r;
  r.set_ = a.set_;
  detail::unary(r.set_, a.c_, d, r.c_);
  return r;
}

inline DualScalar tanh(const DualScalar& a) { return apply_unary(a, detail::tanh_derivs); }
inline DualScalar exp(const DualScalar& a) { return apply_unary(a, detail::exp_derivs); }
inline DualScalar log(const DualScalar& a) { return apply_unary(a, detail::log_derivs); }
inline DualScalar recip(const DualScalar& a) { return apply_unary(a, detail::recip_derivs); }

inline DualScalar operator/(const DualScalar& a, const DualScalar& b) { return a * recip(b); }

// Integer powers by repeated multiplication, exact for the stored orders.
inline DualScalar pow(const DualScalar& a, int n) {
  if (n < 0) return recip(pow(a, -n));
  DualScalar r(1.0);
  DualScalar base = a;
  int e = n;
  while (e > 0) {
    if (e & 1) r = r * base;
    base = base * base;
    e >>= 1;
  }
  return r;
}

inline DualScalar sech(const DualScalar& a) {
  // 2 / (e^y + e^-y)
  return 2.0 * recip(exp(a) + exp(-a));
}

// Returns carriers for the inputs (t, x) storing exactly the requested orders.
inline std::pair<DualScalar, DualScalar> seed_inputs(double t, double x, int max_t_order,
                                                     int max_x_order) {
  PartialSet set = PartialSet::up_to(max_t_order, max_x_order);
  return {DualScalar::input_t(t, set), DualScalar::input_x(x, set)};
}

}  // namespace spinn::ad
