#include "spinn/problems.hpp"

#include <cmath>
#include <mutex>
#include <set>
#include <stdexcept>

namespace spinn::problems {

using ad::DualScalar;
using ad::NodeId;
using ad::PartialSet;
using ad::Tape;
using sampling::Point;

namespace {

double sech(double y) { return 1.0 / std::cosh(y); }

// Shorthand for residual bodies.
NodeId val(Tape& tp, NodeId u) { return tp.extract(u, 0, 0); }
NodeId d_t(Tape& tp, NodeId u) { return tp.extract(u, 1, 0); }
NodeId d_x(Tape& tp, NodeId u) { return tp.extract(u, 0, 1); }
NodeId d_xx(Tape& tp, NodeId u) { return tp.extract(u, 0, 2); }
NodeId d_xxx(Tape& tp, NodeId u) { return tp.extract(u, 0, 3); }

void ensure_verified(const ProblemSpec& spec, const std::string& key) {
  static std::mutex mu;
  static std::set<std::string> done;
  {
    std::lock_guard<std::mutex> lock(mu);
    if (done.count(key)) return;
  }
  const ExactCheck check = verify_exact_solution(spec);
  if (check.worst() >= 1e-10)
    throw std::runtime_error("problem '" + spec.name +
                             "' failed its registration self-test: max residual " +
                             std::to_string(check.worst()));
  std::lock_guard<std::mutex> lock(mu);
  done.insert(key);
}

}  // namespace

double ExactCheck::worst() const {
  return std::max(max_pde_residual, std::max(max_isc_residual, max_ib_mismatch));
}

std::vector<ResidualFn> build_isc(const GeneratorCoeffs& g) {
  std::vector<ResidualFn> residuals;
  residuals.push_back([g](Tape& tp, const Point& p, std::span<const NodeId> out,
                          std::span<const NodeId>) {
    NodeId r = g.eta(tp, p, out);
    r = tp.sub(r, tp.mul(g.tau(tp, p, out), d_t(tp, out[0])));
    return tp.sub(r, tp.mul(g.xi(tp, p, out), d_x(tp, out[0])));
  });
  if (g.phi) {
    residuals.push_back([g](Tape& tp, const Point& p, std::span<const NodeId> out,
                            std::span<const NodeId>) {
      NodeId r = g.phi(tp, p, out);
      r = tp.sub(r, tp.mul(g.tau(tp, p, out), d_t(tp, out[1])));
      return tp.sub(r, tp.mul(g.xi(tp, p, out), d_x(tp, out[1])));
    });
  }
  return residuals;
}

ExactCheck verify_exact_solution(const ProblemSpec& spec) {
  ExactCheck check;
  Tape tape;
  std::vector<NodeId> outputs(std::size_t(spec.unknowns));
  std::vector<NodeId> extras(spec.extra_true.size());
  for (int i = 0; i < spec.domain.n_t; ++i) {
    for (int j = 0; j < spec.domain.n_x; ++j) {
      const Point p{spec.domain.t_at(i), spec.domain.x_at(j)};
      tape.clear();
      const auto exact = spec.exact(p.t, p.x);
      for (int k = 0; k < spec.unknowns; ++k) outputs[std::size_t(k)] = tape.leaf(exact[std::size_t(k)]);
      for (std::size_t k = 0; k < extras.size(); ++k)
        extras[k] = tape.constant(spec.extra_true[k]);
      for (const auto& r : spec.pde_residuals)
        check.max_pde_residual =
            std::max(check.max_pde_residual, std::abs(tape.value(r(tape, p, outputs, extras))));
      for (const auto& r : spec.isc_residuals)
        check.max_isc_residual =
            std::max(check.max_isc_residual, std::abs(tape.value(r(tape, p, outputs, extras))));
    }
  }
  if (spec.ib_target) {
    std::vector<int> segments;
    const auto pool = sampling::ib_pool(spec.domain, &segments);
    std::vector<double> exact_vals(std::size_t(spec.unknowns));
    for (std::size_t i = 0; i < pool.size(); ++i) {
      spec.exact_value(pool.points[i].t, pool.points[i].x, exact_vals);
      for (int k = 0; k < spec.unknowns; ++k) {
        const double target =
            spec.ib_target(segments[i], pool.points[i].t, pool.points[i].x, k);
        check.max_ib_mismatch =
            std::max(check.max_ib_mismatch, std::abs(target - exact_vals[std::size_t(k)]));
      }
    }
  }
  return check;
}

// ---------------------------------------------------------------------------
// KdV: u_t + u u_x + u_xxx = 0 on [0,1]x[0,1], soliton u = 12 sech^2(x - 4t),
// travelling-wave ISC u_t + 4 u_x = 0.
// ---------------------------------------------------------------------------
ProblemSpec kdv() {
  ProblemSpec spec;
  spec.name = "kdv";
  spec.domain = {0.0, 1.0, 0.0, 1.0, 100, 256};
  spec.unknowns = 1;
  spec.required = PartialSet::closure_of({{0, 0}, {1, 0}, {0, 1}, {0, 3}});
  spec.ib_term_names = {"mse_u"};
  spec.pde_term_names = {"mse_f"};
  spec.isc_term_names = {"mse_isc"};

  spec.pde_residuals.push_back(
      [](Tape& tp, const Point&, std::span<const NodeId> out, std::span<const NodeId>) {
        NodeId u = out[0];
        return tp.add(tp.add(d_t(tp, u), tp.mul(val(tp, u), d_x(tp, u))), d_xxx(tp, u));
      });
  spec.isc_residuals.push_back(
      [](Tape& tp, const Point&, std::span<const NodeId> out, std::span<const NodeId>) {
        return tp.add(d_t(tp, out[0]), tp.scale(d_x(tp, out[0]), 4.0));
      });

  spec.ib_target = [](int segment, double t, double x, int) {
    switch (segment) {
      case 0: return 12.0 * sech(x) * sech(x);
      case 1: return 12.0 * sech(-4.0 * t) * sech(-4.0 * t);
      default: return 12.0 * sech(1.0 - 4.0 * t) * sech(1.0 - 4.0 * t);
    }
  };

  const PartialSet req = spec.required;
  spec.exact = [req](double t, double x) {
    auto [td, xd] = std::pair{DualScalar::input_t(t, req), DualScalar::input_x(x, req)};
    DualScalar s = ad::sech(xd - 4.0 * td);
    return std::vector<DualScalar>{12.0 * (s * s)};
  };
  spec.exact_value = [](double t, double x, std::span<double> out) {
    const double s = sech(x - 4.0 * t);
    out[0] = 12.0 * s * s;
  };

  ensure_verified(spec, spec.name);
  return spec;
}

// ---------------------------------------------------------------------------
// Heat: u_t - u_xx = 0 on t in [0.5, 1.5], x in [0,1];
// exact u = x t^{-3/2} e^{-x^2/(4t)};
// ISC (x^2/4 + t/2) u + x t u_x + t^2 u_t = 0.
// ---------------------------------------------------------------------------
ProblemSpec heat() {
  ProblemSpec spec;
  spec.name = "heat";
  spec.domain = {0.5, 1.5, 0.0, 1.0, 100, 256};
  spec.unknowns = 1;
  spec.required = PartialSet::closure_of({{0, 0}, {1, 0}, {0, 1}, {0, 2}});
  spec.ib_term_names = {"mse_u"};
  spec.pde_term_names = {"mse_f"};
  spec.isc_term_names = {"mse_isc"};

  spec.pde_residuals.push_back(
      [](Tape& tp, const Point&, std::span<const NodeId> out, std::span<const NodeId>) {
        return tp.sub(d_t(tp, out[0]), d_xx(tp, out[0]));
      });
  spec.isc_residuals.push_back(
      [](Tape& tp, const Point& p, std::span<const NodeId> out, std::span<const NodeId>) {
        NodeId u = out[0];
        NodeId r = tp.scale(val(tp, u), p.x * p.x / 4.0 + p.t / 2.0);
        r = tp.add(r, tp.scale(d_x(tp, u), p.x * p.t));
        return tp.add(r, tp.scale(d_t(tp, u), p.t * p.t));
      });

  spec.ib_target = [](int segment, double t, double x, int) {
    switch (segment) {
      case 0: return 2.0 * std::sqrt(2.0) * x * std::exp(-x * x / 2.0);
      case 1: return 0.0;
      default: return std::pow(t, -1.5) * std::exp(-1.0 / (4.0 * t));
    }
  };

  const PartialSet req = spec.required;
  spec.exact = [req](double t, double x) {
    DualScalar td = DualScalar::input_t(t, req);
    DualScalar xd = DualScalar::input_x(x, req);
    DualScalar u = xd * ad::exp(-1.5 * ad::log(td)) * ad::exp(-0.25 * (xd * xd) * ad::recip(td));
    return std::vector<DualScalar>{u};
  };
  spec.exact_value = [](double t, double x, std::span<double> out) {
    out[0] = x * std::pow(t, -1.5) * std::exp(-x * x / (4.0 * t));
  };

  ensure_verified(spec, spec.name);
  return spec;
}

// ---------------------------------------------------------------------------
// Potential Burgers system on x in [0.1, 1.1], t in [0, 1]:
//   f = v_x - u = 0,   g = v_t - u_x + u^2/2 = 0,
// exact u = -4(x+2)/(2t+4x+x^2), v = -2 ln(t/6 + x/3 + x^2/12);
// non-classical ISCs
//   l = v_t - v_x/(x+1) - e^{v/2}/(3(x+1)),
//   p = u_t - u_x/(x+1) - [ (x+1) u e^{v/2}/6 - u - e^{v/2}/3 ] / (x+1)^2.
// ---------------------------------------------------------------------------
ProblemSpec potential_burgers() {
  ProblemSpec spec;
  spec.name = "potential_burgers";
  spec.domain = {0.0, 1.0, 0.1, 1.1, 100, 256};
  spec.unknowns = 2;
  spec.required = PartialSet::closure_of({{0, 0}, {1, 0}, {0, 1}});
  spec.ib_term_names = {"mse_u", "mse_v"};
  spec.pde_term_names = {"mse_f", "mse_g"};
  spec.isc_term_names = {"mse_l", "mse_p"};

  spec.pde_residuals.push_back(
      [](Tape& tp, const Point&, std::span<const NodeId> out, std::span<const NodeId>) {
        return tp.sub(d_x(tp, out[1]), val(tp, out[0]));
      });
  spec.pde_residuals.push_back(
      [](Tape& tp, const Point&, std::span<const NodeId> out, std::span<const NodeId>) {
        NodeId u0 = val(tp, out[0]);
        return tp.add(tp.sub(d_t(tp, out[1]), d_x(tp, out[0])),
                      tp.scale(tp.square(u0), 0.5));
      });
  spec.isc_residuals.push_back(
      [](Tape& tp, const Point& p, std::span<const NodeId> out, std::span<const NodeId>) {
        const double cx = 1.0 / (p.x + 1.0);
        NodeId ev = tp.exp(tp.scale(val(tp, out[1]), 0.5));
        NodeId r = tp.sub(d_t(tp, out[1]), tp.scale(d_x(tp, out[1]), cx));
        return tp.sub(r, tp.scale(ev, cx / 3.0));
      });
  spec.isc_residuals.push_back(
      [](Tape& tp, const Point& p, std::span<const NodeId> out, std::span<const NodeId>) {
        const double cx = 1.0 / (p.x + 1.0);
        NodeId u0 = val(tp, out[0]);
        NodeId ev = tp.exp(tp.scale(val(tp, out[1]), 0.5));
        NodeId bracket = tp.scale(tp.mul(u0, ev), (p.x + 1.0) / 6.0);
        bracket = tp.sub(bracket, u0);
        bracket = tp.sub(bracket, tp.scale(ev, 1.0 / 3.0));
        NodeId r = tp.sub(d_t(tp, out[0]), tp.scale(d_x(tp, out[0]), cx));
        return tp.sub(r, tp.scale(bracket, cx * cx));
      });

  spec.ib_target = [](int segment, double t, double x, int unknown) {
    switch (segment) {
      case 0:
        return unknown == 0 ? -4.0 * (x + 2.0) / (x * (4.0 + x))
                            : -2.0 * std::log(x / 3.0 + x * x / 12.0);
      case 1:
        return unknown == 0 ? -840.0 / (200.0 * t + 41.0)
                            : -2.0 * std::log(t / 6.0 + 41.0 / 1200.0);
      default:
        return unknown == 0 ? -1240.0 / (200.0 * t + 561.0)
                            : -2.0 * std::log(t / 6.0 + 187.0 / 400.0);
    }
  };

  const PartialSet req = spec.required;
  spec.exact = [req](double t, double x) {
    DualScalar td = DualScalar::input_t(t, req);
    DualScalar xd = DualScalar::input_x(x, req);
    DualScalar denom = 2.0 * td + 4.0 * xd + xd * xd;
    DualScalar u = -4.0 * (xd + DualScalar(2.0)) * ad::recip(denom);
    DualScalar v = -2.0 * ad::log((1.0 / 6.0) * td + (1.0 / 3.0) * xd + (1.0 / 12.0) * (xd * xd));
    return std::vector<DualScalar>{u, v};
  };
  spec.exact_value = [](double t, double x, std::span<double> out) {
    out[0] = -4.0 * (x + 2.0) / (2.0 * t + 4.0 * x + x * x);
    out[1] = -2.0 * std::log(t / 6.0 + x / 3.0 + x * x / 12.0);
  };

  ensure_verified(spec, spec.name);
  return spec;
}

// ---------------------------------------------------------------------------
// Inverse problem for the Burgers equation in potential form on x in [0,2],
// t in [0.1, 1.1]:
//   f = u_t - lambda1 u_x^2 - lambda2 u_xx = 0,
// exact u = (l2/l1) ln(l1 x/(l2 t) + c1) - (l2/(2 l1)) ln t - x^2/(4 l1 t) + c2,
// ISC g = 4 l1 t^2 u_t + 4 l1 t x u_x + x^2 + 2 l2 t = 0.
// lambda1, lambda2 are trainable; the true values only generate data targets.
// ---------------------------------------------------------------------------
ProblemSpec inverse_burgers(double lambda1_true, double lambda2_true, double c1, double c2) {
  ProblemSpec spec;
  spec.name = "inverse_burgers";
  spec.domain = {0.1, 1.1, 0.0, 2.0, 100, 256};
  spec.unknowns = 1;
  spec.required = PartialSet::closure_of({{0, 0}, {1, 0}, {0, 1}, {0, 2}});
  spec.extra_names = {"lambda1", "lambda2"};
  spec.extra_true = {lambda1_true, lambda2_true};
  spec.ib_term_names = {"mse_data"};
  spec.pde_term_names = {"mse_f"};
  spec.isc_term_names = {"mse_g"};
  spec.inverse = true;

  // The logarithm must stay away from its singularity on the whole domain.
  for (int i = 0; i < spec.domain.n_t; ++i)
    for (int j = 0; j < spec.domain.n_x; ++j) {
      const double t = spec.domain.t_at(i), x = spec.domain.x_at(j);
      if (t <= 0.0 || lambda1_true * x / (lambda2_true * t) + c1 <= 0.0)
        throw std::invalid_argument(
            "inverse_burgers: log argument not positive over the domain");
    }

  spec.pde_residuals.push_back(
      [](Tape& tp, const Point&, std::span<const NodeId> out, std::span<const NodeId> extras) {
        NodeId r = tp.sub(d_t(tp, out[0]), tp.mul(extras[0], tp.square(d_x(tp, out[0]))));
        return tp.sub(r, tp.mul(extras[1], d_xx(tp, out[0])));
      });
  spec.isc_residuals.push_back(
      [](Tape& tp, const Point& p, std::span<const NodeId> out, std::span<const NodeId> extras) {
        NodeId r = tp.scale(tp.mul(extras[0], d_t(tp, out[0])), 4.0 * p.t * p.t);
        r = tp.add(r, tp.scale(tp.mul(extras[0], d_x(tp, out[0])), 4.0 * p.t * p.x));
        r = tp.add_const(r, p.x * p.x);
        return tp.add(r, tp.scale(extras[1], 2.0 * p.t));
      });

  const PartialSet req = spec.required;
  const double l1 = lambda1_true, l2 = lambda2_true;
  spec.exact = [req, l1, l2, c1, c2](double t, double x) {
    DualScalar td = DualScalar::input_t(t, req);
    DualScalar xd = DualScalar::input_x(x, req);
    DualScalar u = (l2 / l1) * ad::log((l1 / l2) * xd * ad::recip(td) + DualScalar(c1));
    u = u - (l2 / (2.0 * l1)) * ad::log(td);
    u = u - (0.25 / l1) * (xd * xd) * ad::recip(td);
    u = u + DualScalar(c2);
    return std::vector<DualScalar>{u};
  };
  spec.exact_value = [l1, l2, c1, c2](double t, double x, std::span<double> out) {
    out[0] = (l2 / l1) * std::log(l1 * x / (l2 * t) + c1) - (l2 / (2.0 * l1)) * std::log(t) -
             x * x / (4.0 * l1 * t) + c2;
  };

  ensure_verified(spec, spec.name + "(" + std::to_string(l1) + "," + std::to_string(l2) +
                            "," + std::to_string(c1) + "," + std::to_string(c2) + ")");
  return spec;
}

ProblemSpec by_name(const std::string& name) {
  if (name == "kdv") return kdv();
  if (name == "heat") return heat();
  if (name == "potential_burgers") return potential_burgers();
  if (name == "inverse_burgers") return inverse_burgers(1.0, 2.0, 1.0, 0.0);
  throw std::invalid_argument("unknown problem '" + name + "'");
}

}  // namespace spinn::problems
