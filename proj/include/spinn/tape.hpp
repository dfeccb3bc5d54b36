#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "spinn/dual.hpp"

namespace spinn::ad {

struct TapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Handle into a tape. Carries the tape epoch so a handle kept across clear()
// is rejected instead of silently reading another computation's node.
struct NodeId {
  std::uint32_t index = 0;
  std::uint32_t epoch = 0;
};

// Append-only record of dual-scalar operations. A reverse sweep from any
// scalar node accumulates d(node)/d(theta) for every bound parameter theta.
//
// One tape per thread; cleared (not destroyed) between optimizer iterations so
// buffers are reused.
class Tape {
 public:
  enum class Op : std::uint8_t {
    kConst,      // leaf, no adjoint flow
    kLeaf,       // leaf whose adjoint is readable after a sweep
    kParam,      // scalar leaf bound to params[p0]
    kAdd,
    kSub,
    kNeg,
    kMul,
    kScale,      // aux * a
    kAddConst,   // a + aux
    kTanh,
    kExp,
    kLog,
    kRecip,
    kExtract,    // coefficient p0 of a, as a plain scalar
    kSquare,
    kAffine,     // params[p0 + i] * in[i] summed + params[p1], inputs in arena
    kSum,        // sum of nodes in arena
    kMeanSq,     // mean of squares of nodes in arena
  };

  Tape() = default;

  void bind_params(std::span<const double> params) { params_ = params; }
  std::size_t param_count() const { return params_.size(); }

  void clear() {
    nodes_.clear();
    vals_.clear();
    adjs_.clear();
    arena_.clear();
    ++epoch_;
  }

  std::size_t size() const { return nodes_.size(); }
  std::uint32_t epoch() const { return epoch_; }

  // ---- leaves ----
  NodeId constant(const DualScalar& v) { return push(Op::kConst, v); }
  NodeId constant(double v) { return push(Op::kConst, DualScalar(v)); }
  NodeId leaf(const DualScalar& v) { return push(Op::kLeaf, v); }
  NodeId param(std::size_t index) {
    if (index >= params_.size()) throw TapeError("param index out of range");
    Node n;
    n.op = Op::kParam;
    n.p0 = static_cast<std::uint32_t>(index);
    return push(n, DualScalar(params_[index]));
  }
  NodeId seed_t(double t, PartialSet set) { return constant(DualScalar::input_t(t, set)); }
  NodeId seed_x(double x, PartialSet set) { return constant(DualScalar::input_x(x, set)); }

  // ---- arithmetic ----
  NodeId add(NodeId a, NodeId b) { return binary(Op::kAdd, a, b); }
  NodeId sub(NodeId a, NodeId b) { return binary(Op::kSub, a, b); }
  NodeId mul(NodeId a, NodeId b) { return binary(Op::kMul, a, b); }
  NodeId div(NodeId a, NodeId b) { return mul(a, recip(b)); }
  NodeId neg(NodeId a) { return unary_op(Op::kNeg, a); }
  NodeId square(NodeId a) { return unary_op(Op::kSquare, a); }
  NodeId tanh(NodeId a) { return unary_op(Op::kTanh, a); }
  NodeId exp(NodeId a) { return unary_op(Op::kExp, a); }
  NodeId log(NodeId a) { return unary_op(Op::kLog, a); }
  NodeId recip(NodeId a) { return unary_op(Op::kRecip, a); }

  NodeId scale(NodeId a, double s) {
    Node n;
    n.op = Op::kScale;
    n.a = check(a);
    n.aux = s;
    const DualScalar& va = vals_[n.a];
    return push(n, s * va);
  }
  NodeId add_const(NodeId a, double s) {
    Node n;
    n.op = Op::kAddConst;
    n.a = check(a);
    n.aux = s;
    return push(n, vals_[n.a] + DualScalar(s));
  }

  NodeId extract(NodeId a, int t_order, int x_order) {
    Node n;
    n.op = Op::kExtract;
    n.a = check(a);
    n.p0 = static_cast<std::uint32_t>(PartialSet::slot_of(t_order, x_order));
    return push(n, DualScalar(vals_[n.a].coeffs()[n.p0]));
  }

  // out = sum_i params[w_offset + i] * inputs[i] + params[b_offset].
  // This fused op keeps network layers to one node per neuron.
  NodeId affine(std::span<const NodeId> inputs, std::size_t w_offset, std::size_t b_offset) {
    if (w_offset + inputs.size() > params_.size() || b_offset >= params_.size())
      throw TapeError("affine: parameter offset out of range");
    Node n;
    n.op = Op::kAffine;
    n.a = push_arena(inputs);
    n.b = static_cast<std::uint32_t>(inputs.size());
    n.p0 = static_cast<std::uint32_t>(w_offset);
    n.p1 = static_cast<std::uint32_t>(b_offset);
    Coeffs acc{};
    PartialSet set;
    acc[0] = params_[b_offset];
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      const DualScalar& in = vals_[arena_[n.a + i]];
      set = set.union_with(in.set());
      const double w = params_[w_offset + i];
      for (int s = 0; s < kNumSlots; ++s) acc[s] += w * in.coeffs()[s];
    }
    return push(n, DualScalar(acc, set));
  }

  NodeId sum(std::span<const NodeId> terms) {
    Node n;
    n.op = Op::kSum;
    n.a = push_arena(terms);
    n.b = static_cast<std::uint32_t>(terms.size());
    Coeffs acc{};
    PartialSet set;
    for (std::size_t i = 0; i < terms.size(); ++i) {
      const DualScalar& v = vals_[arena_[n.a + i]];
      set = set.union_with(v.set());
      for (int s = 0; s < kNumSlots; ++s) acc[s] += v.coeffs()[s];
    }
    return push(n, DualScalar(acc, set));
  }

  // Mean of squared values (the value channel only).
  NodeId mean_sq(std::span<const NodeId> residuals) {
    if (residuals.empty()) throw TapeError("mean_sq: empty residual set");
    Node n;
    n.op = Op::kMeanSq;
    n.a = push_arena(residuals);
    n.b = static_cast<std::uint32_t>(residuals.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < residuals.size(); ++i) {
      const double r = vals_[arena_[n.a + i]].value();
      acc += r * r;
    }
    return push(n, DualScalar(acc / double(residuals.size())));
  }

  double value(NodeId id) const { return vals_[check(id)].value(); }
  const DualScalar& dual(NodeId id) const { return vals_[check(id)]; }

  // d(output)/d(theta) for every bound parameter, accumulated into grad
  // (callers zero it when they want a plain gradient). Also leaves per-node
  // adjoints available through adjoint().
  void gradient(NodeId output, std::span<double> grad) {
    const std::uint32_t out = check(output);
    if (grad.size() != params_.size()) throw TapeError("gradient: size mismatch");
    adjs_.assign(vals_.size(), Coeffs{});
    adjs_[out][0] = 1.0;
    for (std::uint32_t i = out + 1; i-- > 0;) backward_node(i, grad);
  }

  // Adjoint coefficients of a node after gradient(); meaningful for kLeaf.
  const Coeffs& adjoint(NodeId id) const {
    const std::uint32_t i = check(id);
    if (adjs_.size() != vals_.size()) throw TapeError("adjoint: no sweep has run");
    return adjs_[i];
  }

  static const char* op_name(Op op);

 private:
  struct Node {
    Op op = Op::kConst;
    std::uint32_t a = 0, b = 0;
    std::uint32_t p0 = 0, p1 = 0;
    double aux = 0.0;
  };

  std::uint32_t check(NodeId id) const {
    if (id.epoch != epoch_ || id.index >= nodes_.size())
      throw TapeError("stale or invalid tape handle");
    return id.index;
  }

  std::uint32_t push_arena(std::span<const NodeId> ids) {
    const std::uint32_t start = static_cast<std::uint32_t>(arena_.size());
    for (NodeId id : ids) arena_.push_back(check(id));
    return start;
  }

  NodeId push(Op op, const DualScalar& v) {
    Node n;
    n.op = op;
    return push(n, v);
  }

  NodeId push(const Node& n, const DualScalar& v) {
    for (int s = 0; s < kNumSlots; ++s)
      if (v.set().contains(s) && !std::isfinite(v.coeffs()[s]))
        throw TapeError("non-finite value at node " + std::to_string(nodes_.size()) +
                        " (" + op_name(n.op) + ")");
    nodes_.push_back(n);
    vals_.push_back(v);
    return NodeId{static_cast<std::uint32_t>(nodes_.size() - 1), epoch_};
  }

  NodeId binary(Op op, NodeId a, NodeId b) {
    Node n;
    n.op = op;
    n.a = check(a);
    n.b = check(b);
    const DualScalar &va = vals_[n.a], &vb = vals_[n.b];
    switch (op) {
      case Op::kAdd: return push(n, va + vb);
      case Op::kSub: return push(n, va - vb);
      case Op::kMul: return push(n, va * vb);
      default: throw TapeError("bad binary op");
    }
  }

  NodeId unary_op(Op op, NodeId a) {
    Node n;
    n.op = op;
    n.a = check(a);
    const DualScalar& va = vals_[n.a];
    switch (op) {
      case Op::kNeg: return push(n, -va);
      case Op::kSquare: return push(n, va * va);
      case Op::kTanh: return push(n, ad::tanh(va));
      case Op::kExp: return push(n, ad::exp(va));
      case Op::kLog: return push(n, ad::log(va));
      case Op::kRecip: return push(n, ad::recip(va));
      default: throw TapeError("bad unary op");
    }
  }

  void backward_node(std::uint32_t i, std::span<double> grad);
  void check_adjoint_finite(std::uint32_t i) const;

  std::vector<Node> nodes_;
  std::vector<DualScalar> vals_;
  std::vector<Coeffs> adjs_;
  std::vector<std::uint32_t> arena_;
  std::span<const double> params_;
  std::uint32_t epoch_ = 0;
};

}  // namespace spinn::ad
