#pragma once

#include <Eigen/Core>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "spinn/network.hpp"
#include "spinn/problems.hpp"
#include "spinn/sampling.hpp"

namespace spinn::loss {

// Named mean-squared-error terms, all with unit weight; total is their sum in
// assembly order (initial/boundary terms, then PDE terms, then ISC terms).
struct LossBreakdown {
  std::vector<std::pair<std::string, double>> terms;
  double total = 0.0;

  bool has(const std::string& name) const;
  double at(const std::string& name) const;
};

// Arithmetic mean of squares.
double mse(std::span<const double> residuals);

// Result of building the objective on a tape; total stays differentiable.
struct AssembledLoss {
  LossBreakdown breakdown;
  ad::NodeId total;
  std::vector<ad::NodeId> term_nodes;
};

// Replaces the network forward pass when set (tests inject the closed-form
// exact solution as a surrogate).
using ForwardFn = std::function<std::vector<ad::NodeId>(
    ad::Tape&, const sampling::Point&, ad::PartialSet)>;

// Forward-problem objective: IB data terms on ib_points against the attached
// targets, PDE residual terms on colloc, ISC terms on the same collocation
// points iff spinn. Binds params.flat to the tape.
AssembledLoss assemble_forward(ad::Tape& tape, const problems::ProblemSpec& spec,
                               const net::MlpParams& params, const sampling::PointSet& ib_points,
                               const sampling::PointSet& colloc, bool spinn,
                               const ForwardFn* forward_override = nullptr);

// Inverse-problem objective: data-fit, PDE, and (iff spinn) ISC terms all on
// data_points; collocation points coincide with the training data.
AssembledLoss assemble_inverse(ad::Tape& tape, const problems::ProblemSpec& spec,
                               const net::MlpParams& params, const sampling::PointSet& data_points,
                               bool spinn, const ForwardFn* forward_override = nullptr);

// ---------------------------------------------------------------------------
// Production evaluator. Work is split into fixed chunks of points; chunk
// partials (term sums and gradient vectors) are reduced in ascending chunk
// order, so results are bit-identical for any thread count, including the
// serial path. OpenMP parallelizes over chunks.
// ---------------------------------------------------------------------------
struct EvalOptions {
  int threads = 0;     // 0 = OpenMP default
  int chunk_size = 32;
};

class LossEvaluator {
 public:
  LossEvaluator(problems::ProblemSpec spec, sampling::PointSet ib_or_data,
                sampling::PointSet colloc, bool spinn, EvalOptions options = {});
  ~LossEvaluator();
  LossEvaluator(LossEvaluator&&) noexcept;

  double value(const net::MlpParams& params);
  double value_and_grad(const net::MlpParams& params, Eigen::VectorXd& grad);

  const LossBreakdown& last_breakdown() const { return breakdown_; }
  const problems::ProblemSpec& spec() const { return spec_; }
  bool spinn() const { return spinn_; }

 private:
  struct Impl;
  double eval(const net::MlpParams& params, Eigen::VectorXd* grad);

  problems::ProblemSpec spec_;
  sampling::PointSet ib_;
  sampling::PointSet colloc_;
  bool spinn_;
  EvalOptions options_;
  LossBreakdown breakdown_;
  std::unique_ptr<Impl> impl_;
};

}  // namespace spinn::loss
