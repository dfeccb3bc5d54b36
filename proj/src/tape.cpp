#include "spinn/tape.hpp"

#include <cmath>

namespace spinn::ad {

const char* Tape::op_name(Op op) {
  switch (op) {
    case Op::kConst: return "const";
    case Op::kLeaf: return "leaf";
    case Op::kParam: return "param";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kNeg: return "neg";
    case Op::kMul: return "mul";
    case Op::kScale: return "scale";
    case Op::kAddConst: return "add_const";
    case Op::kTanh: return "tanh";
    case Op::kExp: return "exp";
    case Op::kLog: return "log";
    case Op::kRecip: return "recip";
    case Op::kExtract: return "extract";
    case Op::kSquare: return "square";
    case Op::kAffine: return "affine";
    case Op::kSum: return "sum";
    case Op::kMeanSq: return "mean_sq";
  }
  return "?";
}

void Tape::check_adjoint_finite(std::uint32_t i) const {
  for (double v : adjs_[i])
    if (!std::isfinite(v))
      throw TapeError("non-finite adjoint during reverse sweep at node " +
                      std::to_string(i) + " (" + op_name(nodes_[i].op) + ")");
}

void Tape::backward_node(std::uint32_t i, std::span<double> grad) {
  const Node& n = nodes_[i];
  const Coeffs& oa = adjs_[i];
  bool all_zero = true;
  for (double v : oa)
    if (v != 0.0) {
      all_zero = false;
      break;
    }
  if (all_zero) return;
  check_adjoint_finite(i);

  const PartialSet set = vals_[i].set();
  switch (n.op) {
    case Op::kConst:
    case Op::kLeaf:
      break;
    case Op::kParam:
      grad[n.p0] += oa[0];
      break;
    case Op::kAdd:
      for (int s = 0; s < kNumSlots; ++s) {
        adjs_[n.a][s] += oa[s];
        adjs_[n.b][s] += oa[s];
      }
      break;
    case Op::kSub:
      for (int s = 0; s < kNumSlots; ++s) {
        adjs_[n.a][s] += oa[s];
        adjs_[n.b][s] -= oa[s];
      }
      break;
    case Op::kNeg:
      for (int s = 0; s < kNumSlots; ++s) adjs_[n.a][s] -= oa[s];
      break;
    case Op::kMul:
      detail::mul_backward(set, vals_[n.a].coeffs(), vals_[n.b].coeffs(), oa,
                           adjs_[n.a], adjs_[n.b]);
      break;
    case Op::kSquare:
      detail::mul_backward(set, vals_[n.a].coeffs(), vals_[n.a].coeffs(), oa,
                           adjs_[n.a], adjs_[n.a]);
      break;
    case Op::kScale:
      for (int s = 0; s < kNumSlots; ++s) adjs_[n.a][s] += n.aux * oa[s];
      break;
    case Op::kAddConst:
      for (int s = 0; s < kNumSlots; ++s) adjs_[n.a][s] += oa[s];
      break;
    case Op::kTanh: {
      double d[5];
      detail::tanh_derivs(vals_[n.a].value(), d);
      detail::unary_backward(set, vals_[n.a].coeffs(), d, oa, adjs_[n.a]);
      break;
    }
    case Op::kExp: {
      double d[5];
      detail::exp_derivs(vals_[n.a].value(), d);
      detail::unary_backward(set, vals_[n.a].coeffs(), d, oa, adjs_[n.a]);
      break;
    }
    case Op::kLog: {
      double d[5];
      detail::log_derivs(vals_[n.a].value(), d);
      detail::unary_backward(set, vals_[n.a].coeffs(), d, oa, adjs_[n.a]);
      break;
    }
    case Op::kRecip: {
      double d[5];
      detail::recip_derivs(vals_[n.a].value(), d);
      detail::unary_backward(set, vals_[n.a].coeffs(), d, oa, adjs_[n.a]);
      break;
    }
    case Op::kExtract:
      adjs_[n.a][n.p0] += oa[0];
      break;
    case Op::kAffine: {
      // d/dw_i = sum_s oa[s] * in_i[s]; d/db = oa[0]; d/din_i[s] = w_i * oa[s]
      for (std::uint32_t k = 0; k < n.b; ++k) {
        const std::uint32_t in = arena_[n.a + k];
        const Coeffs& ic = vals_[in].coeffs();
        const double w = params_[n.p0 + k];
        double gw = 0.0;
        for (int s = 0; s < kNumSlots; ++s) {
          gw += oa[s] * ic[s];
          adjs_[in][s] += w * oa[s];
        }
        grad[n.p0 + k] += gw;
      }
      grad[n.p1] += oa[0];
      break;
    }
    case Op::kSum:
      for (std::uint32_t k = 0; k < n.b; ++k) {
        const std::uint32_t t = arena_[n.a + k];
        for (int s = 0; s < kNumSlots; ++s) adjs_[t][s] += oa[s];
      }
      break;
    case Op::kMeanSq: {
      const double w = 2.0 * oa[0] / double(n.b);
      for (std::uint32_t k = 0; k < n.b; ++k) {
        const std::uint32_t r = arena_[n.a + k];
        adjs_[r][0] += w * vals_[r].value();
      }
      break;
    }
  }
}

}  // namespace spinn::ad
