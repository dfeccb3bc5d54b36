#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "spinn/sampling.hpp"
#include "spinn/tape.hpp"

namespace spinn::problems {

// Residual builder: appends the residual of one equation at a point to the
// tape. `outputs` are the network's dual outputs at that point; `extras` are
// tape nodes for the problem's trainable scalars (empty unless inverse).
using ResidualFn =
    std::function<ad::NodeId(ad::Tape&, const sampling::Point&,
                             std::span<const ad::NodeId> outputs,
                             std::span<const ad::NodeId> extras)>;

// Infinitesimal generator coefficients, as tape builders so that coefficients
// depending on the unknowns differentiate through the network outputs.
struct GeneratorCoeffs {
  using CoeffFn = std::function<ad::NodeId(ad::Tape&, const sampling::Point&,
                                           std::span<const ad::NodeId> outputs)>;
  CoeffFn xi;   // coefficient of d/dx
  CoeffFn tau;  // coefficient of d/dt
  CoeffFn eta;  // coefficient of d/du
  CoeffFn phi;  // coefficient of d/dv, null for single-unknown problems
};

// Invariant-surface-condition residuals of a generator:
//   eta - tau*u_t - xi*u_x   (and  phi - tau*v_t - xi*v_x  when phi is set).
std::vector<ResidualFn> build_isc(const GeneratorCoeffs& g);

// A registered PDE problem: domain, initial/boundary data, exact solution,
// PDE and ISC residuals, and the loss-term wiring.
struct ProblemSpec {
  std::string name;
  sampling::GridSpec domain;
  int unknowns = 1;
  ad::PartialSet required;  // downward-closed set of partials the residuals read

  // Trainable scalars beyond the network weights (inverse problems).
  std::vector<std::string> extra_names;
  std::vector<double> extra_true;

  std::vector<std::string> ib_term_names;   // one per unknown, or {"mse_data"}
  std::vector<std::string> pde_term_names;  // one per PDE residual
  std::vector<std::string> isc_term_names;  // one per ISC residual

  std::vector<ResidualFn> pde_residuals;
  std::vector<ResidualFn> isc_residuals;

  // Initial/boundary target from the problem's printed formulas.
  // segment: 0 = initial slice, 1 = x-lo edge, 2 = x-hi edge.
  std::function<double(int segment, double t, double x, int unknown)> ib_target;

  // Exact solution carrying closed-form partials for the required set.
  std::function<std::vector<ad::DualScalar>(double t, double x)> exact;
  // Value channel only (cheap path for full-grid evaluation).
  std::function<void(double t, double x, std::span<double>)> exact_value;

  bool inverse = false;  // data-fit problem: targets drawn from the full domain
};

// Worst absolute residual of the exact solution over the full grid, plus the
// worst initial/boundary-formula mismatch against the exact solution.
struct ExactCheck {
  double max_pde_residual = 0.0;
  double max_isc_residual = 0.0;
  double max_ib_mismatch = 0.0;

  double worst() const;
};
ExactCheck verify_exact_solution(const ProblemSpec& spec);

// Problem factories. Each runs a one-time registration self-test: the exact
// solution must satisfy every residual to < 1e-10 over the full grid.
ProblemSpec kdv();
ProblemSpec heat();
ProblemSpec potential_burgers();
ProblemSpec inverse_burgers(double lambda1_true, double lambda2_true, double c1, double c2);

// Lookup by CLI selector value: kdv | heat | potential_burgers | inverse_burgers.
ProblemSpec by_name(const std::string& name);

}  // namespace spinn::problems
