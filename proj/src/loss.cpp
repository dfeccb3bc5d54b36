#include "spinn/loss.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace spinn::loss {

using ad::DualScalar;
using ad::NodeId;
using ad::PartialSet;
using ad::Tape;
using problems::ProblemSpec;
using sampling::Point;
using sampling::PointSet;

bool LossBreakdown::has(const std::string& name) const {
  for (const auto& [k, v] : terms)
    if (k == name) return true;
  return false;
}

double LossBreakdown::at(const std::string& name) const {
  for (const auto& [k, v] : terms)
    if (k == name) return v;
  throw std::out_of_range("LossBreakdown: no term '" + name + "'");
}

double mse(std::span<const double> residuals) {
  if (residuals.empty()) throw std::invalid_argument("mse: empty residual vector");
  double acc = 0.0;
  for (double r : residuals) acc += r * r;
  return acc / double(residuals.size());
}

namespace {

std::vector<NodeId> net_forward(Tape& tape, const net::MlpParams& params, const Point& p,
                                PartialSet set) {
  NodeId t = tape.seed_t(p.t, set);
  NodeId x = tape.seed_x(p.x, set);
  return net::tape_forward(tape, params, t, x);
}

std::vector<NodeId> extra_params(Tape& tape, const net::MlpParams& params) {
  std::vector<NodeId> extras;
  for (std::size_t i = 0; i < params.extra_names.size(); ++i)
    extras.push_back(tape.param(params.extra_offset() + i));
  return extras;
}

AssembledLoss finish(Tape& tape, std::vector<std::string> names,
                     std::vector<NodeId> term_nodes) {
  AssembledLoss out;
  out.term_nodes = std::move(term_nodes);
  out.total = tape.sum(out.term_nodes);
  for (std::size_t i = 0; i < out.term_nodes.size(); ++i)
    out.breakdown.terms.emplace_back(std::move(names[i]), tape.value(out.term_nodes[i]));
  out.breakdown.total = tape.value(out.total);
  return out;
}

}  // namespace

AssembledLoss assemble_forward(Tape& tape, const ProblemSpec& spec, const net::MlpParams& params,
                               const PointSet& ib_points, const PointSet& colloc, bool spinn,
                               const ForwardFn* forward_override) {
  if (spec.inverse)
    throw std::invalid_argument("assemble_forward: '" + spec.name + "' is an inverse problem");
  if (ib_points.targets.size() != std::size_t(spec.unknowns))
    throw std::invalid_argument("assemble_forward: ib_points lack target values");
  tape.bind_params({params.flat.data(), std::size_t(params.flat.size())});

  auto forward = [&](const Point& p, PartialSet set) {
    return forward_override ? (*forward_override)(tape, p, set)
                            : net_forward(tape, params, p, set);
  };

  std::vector<std::string> names;
  std::vector<NodeId> term_nodes;

  // IB terms, one per unknown, each point contributing its own condition.
  std::vector<std::vector<NodeId>> ib_res(std::size_t(spec.unknowns));
  for (std::size_t i = 0; i < ib_points.size(); ++i) {
    const auto outs = forward(ib_points.points[i], PartialSet());
    for (int k = 0; k < spec.unknowns; ++k) {
      NodeId r = tape.add_const(tape.extract(outs[std::size_t(k)], 0, 0),
                                -ib_points.targets[std::size_t(k)][i]);
      ib_res[std::size_t(k)].push_back(r);
    }
  }
  for (int k = 0; k < spec.unknowns; ++k) {
    names.push_back(spec.ib_term_names[std::size_t(k)]);
    term_nodes.push_back(tape.mean_sq(ib_res[std::size_t(k)]));
  }

  // PDE terms and (iff spinn) ISC terms on the same collocation points.
  const std::size_t n_pde = spec.pde_residuals.size();
  const std::size_t n_isc = spinn ? spec.isc_residuals.size() : 0;
  std::vector<std::vector<NodeId>> res(n_pde + n_isc);
  const auto extras = extra_params(tape, params);
  for (std::size_t i = 0; i < colloc.size(); ++i) {
    const Point& p = colloc.points[i];
    const auto outs = forward(p, spec.required);
    for (std::size_t e = 0; e < n_pde; ++e)
      res[e].push_back(spec.pde_residuals[e](tape, p, outs, extras));
    for (std::size_t e = 0; e < n_isc; ++e)
      res[n_pde + e].push_back(spec.isc_residuals[e](tape, p, outs, extras));
  }
  for (std::size_t e = 0; e < n_pde; ++e) {
    names.push_back(spec.pde_term_names[e]);
    term_nodes.push_back(tape.mean_sq(res[e]));
  }
  for (std::size_t e = 0; e < n_isc; ++e) {
    names.push_back(spec.isc_term_names[e]);
    term_nodes.push_back(tape.mean_sq(res[n_pde + e]));
  }
  return finish(tape, std::move(names), std::move(term_nodes));
}

AssembledLoss assemble_inverse(Tape& tape, const ProblemSpec& spec, const net::MlpParams& params,
                               const PointSet& data_points, bool spinn,
                               const ForwardFn* forward_override) {
  if (!spec.inverse)
    throw std::invalid_argument("assemble_inverse: '" + spec.name + "' is a forward problem");
  if (data_points.targets.empty())
    throw std::invalid_argument("assemble_inverse: data_points lack target values");
  tape.bind_params({params.flat.data(), std::size_t(params.flat.size())});

  auto forward = [&](const Point& p, PartialSet set) {
    return forward_override ? (*forward_override)(tape, p, set)
                            : net_forward(tape, params, p, set);
  };

  const std::size_t n_pde = spec.pde_residuals.size();
  const std::size_t n_isc = spinn ? spec.isc_residuals.size() : 0;
  std::vector<NodeId> data_res;
  std::vector<std::vector<NodeId>> res(n_pde + n_isc);
  const auto extras = extra_params(tape, params);
  for (std::size_t i = 0; i < data_points.size(); ++i) {
    const Point& p = data_points.points[i];
    const auto outs = forward(p, spec.required);
    data_res.push_back(
        tape.add_const(tape.extract(outs[0], 0, 0), -data_points.targets[0][i]));
    for (std::size_t e = 0; e < n_pde; ++e)
      res[e].push_back(spec.pde_residuals[e](tape, p, outs, extras));
    for (std::size_t e = 0; e < n_isc; ++e)
      res[n_pde + e].push_back(spec.isc_residuals[e](tape, p, outs, extras));
  }
  std::vector<std::string> names{spec.ib_term_names[0]};
  std::vector<NodeId> term_nodes{tape.mean_sq(data_res)};
  for (std::size_t e = 0; e < n_pde; ++e) {
    names.push_back(spec.pde_term_names[e]);
    term_nodes.push_back(tape.mean_sq(res[e]));
  }
  for (std::size_t e = 0; e < n_isc; ++e) {
    names.push_back(spec.isc_term_names[e]);
    term_nodes.push_back(tape.mean_sq(res[n_pde + e]));
  }
  return finish(tape, std::move(names), std::move(term_nodes));
}

// ---------------------------------------------------------------------------
// Kernel evaluator
// ---------------------------------------------------------------------------

struct LossEvaluator::Impl {
  // residual structure
  int nc = 0;                       // coefficient prefix length for colloc points
  std::vector<std::string> term_names;
  std::size_t n_ib_terms = 0;       // leading terms fed by the IB pass
  std::vector<double> term_scale;   // 1/N per term

  // fixed chunking
  int chunk = 32;
  std::size_t n_ib_chunks = 0, n_colloc_chunks = 0;

  // per-chunk partials: term sums and gradients
  std::vector<std::vector<double>> chunk_terms;
  Eigen::MatrixXd chunk_grads;  // one column per chunk

  // per-thread workspaces
  struct ThreadWs {
    net::KernelWorkspace net_ib;
    net::KernelWorkspace net_colloc;
    Tape tape;
    std::vector<double> out;      // output coefficients
    std::vector<double> out_adj;  // output adjoints
    std::vector<NodeId> leaves;
    std::vector<NodeId> extras;
    std::vector<NodeId> residuals;
    std::vector<NodeId> weighted;
  };
  std::vector<ThreadWs> ws;
};

LossEvaluator::LossEvaluator(ProblemSpec spec, PointSet ib_or_data, PointSet colloc, bool spinn,
                             EvalOptions options)
    : spec_(std::move(spec)),
      ib_(std::move(ib_or_data)),
      colloc_(std::move(colloc)),
      spinn_(spinn),
      options_(options),
      impl_(new Impl) {
  if (!spec_.required.is_prefix())
    throw std::invalid_argument("LossEvaluator: problem needs mixed partials, not supported");
  if (spec_.inverse) {
    // Collocation points coincide with the training data.
    colloc_ = ib_;
    if (ib_.targets.empty())
      throw std::invalid_argument("LossEvaluator: inverse data needs target values");
  } else if (ib_.targets.size() != std::size_t(spec_.unknowns)) {
    throw std::invalid_argument("LossEvaluator: ib points need one target row per unknown");
  }
  Impl& im = *impl_;
  im.nc = spec_.required.count();
  im.chunk = std::max(1, options_.chunk_size);

  if (spec_.inverse) {
    im.n_ib_terms = 0;
    im.term_names = {spec_.ib_term_names[0]};
  } else {
    im.n_ib_terms = std::size_t(spec_.unknowns);
    im.term_names = spec_.ib_term_names;
  }
  for (const auto& n : spec_.pde_term_names) im.term_names.push_back(n);
  if (spinn_)
    for (const auto& n : spec_.isc_term_names) im.term_names.push_back(n);

  im.term_scale.assign(im.term_names.size(), 0.0);
  std::size_t t = 0;
  if (!spec_.inverse)
    for (; t < im.n_ib_terms; ++t) im.term_scale[t] = 1.0 / double(ib_.size());
  for (; t < im.term_names.size(); ++t) im.term_scale[t] = 1.0 / double(colloc_.size());

  im.n_ib_chunks = spec_.inverse ? 0 : (ib_.size() + std::size_t(im.chunk) - 1) / std::size_t(im.chunk);
  im.n_colloc_chunks = (colloc_.size() + std::size_t(im.chunk) - 1) / std::size_t(im.chunk);
}

LossEvaluator::~LossEvaluator() = default;
LossEvaluator::LossEvaluator(LossEvaluator&&) noexcept = default;

double LossEvaluator::value(const net::MlpParams& params) { return eval(params, nullptr); }

double LossEvaluator::value_and_grad(const net::MlpParams& params, Eigen::VectorXd& grad) {
  return eval(params, &grad);
}

double LossEvaluator::eval(const net::MlpParams& params, Eigen::VectorXd* grad) {
  Impl& im = *impl_;
  const std::size_t P = params.size();
  const std::size_t n_terms = im.term_names.size();
  const std::size_t n_chunks = im.n_ib_chunks + im.n_colloc_chunks;

#ifdef _OPENMP
  const int max_threads = options_.threads > 0 ? options_.threads : omp_get_max_threads();
#else
  const int max_threads = 1;
#endif
  const int threads = int(std::min<std::size_t>(std::size_t(std::max(1, max_threads)),
                                                std::max<std::size_t>(n_chunks, 1)));

  if (im.ws.size() < std::size_t(threads)) im.ws.resize(std::size_t(threads));
  im.chunk_terms.assign(n_chunks, std::vector<double>(n_terms, 0.0));
  if (grad) {
    if (im.chunk_grads.rows() != Eigen::Index(P) || im.chunk_grads.cols() != Eigen::Index(n_chunks))
      im.chunk_grads.resize(Eigen::Index(P), Eigen::Index(n_chunks));
    im.chunk_grads.setZero();
  }

  const std::size_t n_pde = spec_.pde_residuals.size();
  const std::size_t n_isc = spinn_ ? spec_.isc_residuals.size() : 0;
  const int unknowns = spec_.unknowns;
  const int nc = im.nc;

  std::exception_ptr error;

#pragma omp parallel for schedule(dynamic, 1) num_threads(threads) if (threads > 1)
  for (std::size_t c = 0; c < n_chunks; ++c) {
    try {
#ifdef _OPENMP
      Impl::ThreadWs& tw = im.ws[std::size_t(omp_get_thread_num())];
#else
      Impl::ThreadWs& tw = im.ws[0];
#endif
      std::vector<double>& terms = im.chunk_terms[c];
      double* cgrad = grad ? im.chunk_grads.col(Eigen::Index(c)).data() : nullptr;
      std::span<double> gspan =
          grad ? std::span<double>(cgrad, P) : std::span<double>();

      if (c < im.n_ib_chunks) {
        // ---- IB pass: value channel only ----
        const std::size_t lo = c * std::size_t(im.chunk);
        const std::size_t hi = std::min(ib_.size(), lo + std::size_t(im.chunk));
        tw.out.resize(std::size_t(unknowns));
        tw.out_adj.resize(std::size_t(unknowns));
        for (std::size_t i = lo; i < hi; ++i) {
          const Point& p = ib_.points[i];
          net::kernel_forward(params, p.t, p.x, 1, tw.net_ib, tw.out);
          for (int k = 0; k < unknowns; ++k) {
            const double r = tw.out[std::size_t(k)] - ib_.targets[std::size_t(k)][i];
            if (!std::isfinite(r))
              throw std::runtime_error("non-finite IB residual at point index " +
                                       std::to_string(i));
            terms[std::size_t(k)] += r * r;
            tw.out_adj[std::size_t(k)] = 2.0 * r * im.term_scale[std::size_t(k)];
          }
          if (grad) net::kernel_backward(params, tw.net_ib, tw.out_adj, gspan);
        }
      } else {
        // ---- collocation pass: full coefficient prefix + mini-tape ----
        const std::size_t cc = c - im.n_ib_chunks;
        const std::size_t lo = cc * std::size_t(im.chunk);
        const std::size_t hi = std::min(colloc_.size(), lo + std::size_t(im.chunk));
        tw.out.resize(std::size_t(unknowns) * std::size_t(nc));
        tw.out_adj.resize(std::size_t(unknowns) * std::size_t(nc));
        tw.tape.bind_params({params.flat.data(), P});
        for (std::size_t i = lo; i < hi; ++i) {
          const Point& p = colloc_.points[i];
          net::kernel_forward(params, p.t, p.x, nc, tw.net_colloc, tw.out);

          Tape& tp = tw.tape;
          tp.clear();
          tw.leaves.clear();
          tw.extras.clear();
          tw.residuals.clear();
          tw.weighted.clear();
          for (int k = 0; k < unknowns; ++k) {
            ad::Coeffs coeffs{};
            for (int s = 0; s < nc; ++s) coeffs[std::size_t(s)] = tw.out[std::size_t(k * nc + s)];
            tw.leaves.push_back(tp.leaf(DualScalar(coeffs, spec_.required)));
          }
          for (std::size_t e = 0; e < params.extra_names.size(); ++e)
            tw.extras.push_back(tp.param(params.extra_offset() + e));

          std::size_t term = im.n_ib_terms;
          if (spec_.inverse) {
            tw.residuals.push_back(
                tp.add_const(tp.extract(tw.leaves[0], 0, 0), -ib_.targets[0][i]));
            term = 0;
          }
          for (std::size_t e = 0; e < n_pde; ++e)
            tw.residuals.push_back(spec_.pde_residuals[e](tp, p, tw.leaves, tw.extras));
          for (std::size_t e = 0; e < n_isc; ++e)
            tw.residuals.push_back(spec_.isc_residuals[e](tp, p, tw.leaves, tw.extras));

          for (std::size_t e = 0; e < tw.residuals.size(); ++e) {
            const double r = tp.value(tw.residuals[e]);
            terms[term + e] += r * r;
            if (grad)
              tw.weighted.push_back(
                  tp.scale(tp.square(tw.residuals[e]), im.term_scale[term + e]));
          }
          if (grad) {
            const NodeId contribution = tp.sum(tw.weighted);
            tp.gradient(contribution, gspan);
            for (int k = 0; k < unknowns; ++k) {
              const ad::Coeffs& adj = tp.adjoint(tw.leaves[std::size_t(k)]);
              for (int s = 0; s < nc; ++s) tw.out_adj[std::size_t(k * nc + s)] = adj[std::size_t(s)];
            }
            net::kernel_backward(params, tw.net_colloc, tw.out_adj, gspan);
          }
        }
      }
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);

  // Deterministic reduction: ascending chunk index.
  breakdown_.terms.assign(n_terms, {});
  std::vector<double> sums(n_terms, 0.0);
  for (std::size_t c = 0; c < n_chunks; ++c)
    for (std::size_t t = 0; t < n_terms; ++t) sums[t] += im.chunk_terms[c][t];
  double total = 0.0;
  for (std::size_t t = 0; t < n_terms; ++t) {
    const double v = sums[t] * im.term_scale[t];
    breakdown_.terms[t] = {im.term_names[t], v};
    total += v;
  }
  breakdown_.total = total;

  if (grad) {
    grad->setZero(Eigen::Index(P));
    for (std::size_t c = 0; c < n_chunks; ++c) *grad += im.chunk_grads.col(Eigen::Index(c));
    for (Eigen::Index i = 0; i < grad->size(); ++i)
      if (!std::isfinite((*grad)[i]))
        throw std::runtime_error("non-finite gradient component " + std::to_string(i));
  }
  if (!std::isfinite(total)) throw std::runtime_error("non-finite loss total");
  return total;
}

}  // namespace spinn::loss
