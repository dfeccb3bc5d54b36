#pragma once

#include <Eigen/Core>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace spinn::optim {

struct LbfgsConfig {
  int memory = 50;
  int max_iterations = 20000;
  double grad_tol = 1e-9;        // Euclidean norm of the gradient
  double loss_tol = 1e-12;       // loss change over loss_tol_window iterations
  int loss_tol_window = 10;
  double wolfe_c1 = 1e-4;
  double wolfe_c2 = 0.9;
  int max_linesearch_steps = 40;

  void validate() const;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int steps = 1000;
  double grad_tol = 0.0;  // 0 disables early exit
};

enum class Termination {
  kGradTol,
  kLossTol,
  kMaxIterations,
  kLineSearchFailure,
  kMaxSteps,  // Adam step budget
};
const char* to_string(Termination t);

struct IterRecord {
  int iteration = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
  double step_length = 0.0;
  double ms = 0.0;
  // Line-search certificate for the accepted step (L-BFGS only):
  // phi(a) = f(x + a d). Strong Wolfe requires
  //   phi(alpha) <= phi(0) + c1 alpha phi'(0)  and  |phi'(alpha)| <= c2 |phi'(0)|.
  double phi0 = 0.0, dphi0 = 0.0, phi_alpha = 0.0, dphi_alpha = 0.0;
};

struct TrainTrace {
  std::vector<IterRecord> iterations;
  Termination termination = Termination::kMaxIterations;
  int function_evals = 0;
  double seconds = 0.0;
};

// Returns the loss and fills the gradient (resized by the callee's caller).
using Objective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;
using IterCallback = std::function<void(const IterRecord&)>;

// L-BFGS with two-loop recursion and a strong-Wolfe line search
// (Nocedal & Wright, Numerical Optimization, Algorithms 3.5/3.6 and 7.4/7.5).
// Full batch: the objective sees the complete parameter vector every call.
std::pair<Eigen::VectorXd, TrainTrace> lbfgs_minimize(const Objective& objective,
                                                      Eigen::VectorXd init,
                                                      const LbfgsConfig& cfg,
                                                      const IterCallback& callback = {});

// Adam with bias correction; optional warm start before L-BFGS.
std::pair<Eigen::VectorXd, TrainTrace> adam_minimize(const Objective& objective,
                                                     Eigen::VectorXd init, const AdamConfig& cfg,
                                                     const IterCallback& callback = {});

}  // namespace spinn::optim
