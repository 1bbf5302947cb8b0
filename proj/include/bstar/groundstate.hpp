#pragma once

#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <variant>

#include "bstar/functionals.hpp"

namespace bstar {

enum class Solver { gradient_flow, fixed_point };

inline const char* to_string(Solver s) { return s == Solver::gradient_flow ? "gradient_flow" : "fixed_point"; }

struct BoostedGaussianInit {
  double width = 1.5;
};

struct IterationRecord {
  int iteration = 0;
  double boosted_energy = 0.0;
  double residual = 0.0;
  double mu = 0.0;
  double step = 0.0;
};

struct GroundStateProblem {
  PhysicalParams params;
  double N = 0.5;
  GridSpec grid{64, 20.0};
  Solver solver = Solver::gradient_flow;
  double tol = 1e-8;
  int max_iter = 20000;
  std::variant<BoostedGaussianInit, Field> init = BoostedGaussianInit{};
  /// Fixed-point resolvent shift lambda; defaults to -Sigma_v + 0.25.
  std::optional<double> shift;
  double damping = 1.0;
  std::function<void(const IterationRecord&)> on_iteration;

  void validate() const {
    params.validate();
    require(params.m > 0.0, "ground-state solves require m > 0 (use best_constant for m = 0)");
    require(std::isfinite(N) && N > 0.0, "target charge N must be positive");
    require(std::isfinite(tol) && tol > 0.0, "tolerance must be positive");
    require(max_iter > 0, "max_iter must be positive");
    require(damping > 0.0 && damping <= 1.0, "damping must lie in (0, 1]");
    if (auto* f = std::get_if<Field>(&init)) require(f->grid() == grid, "initial field grid does not match the problem grid");
  }
};

struct GroundStateResult {
  Field Q;
  double mu = 0.0;
  EnergyReport energy;
  double residual = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
  double mu_identity = 0.0;
  double mu_consistency = 0.0;
  /// mu - (1 - sqrt(1-v^2)) m; positive for a genuine boosted ground state.
  double mu_bound_margin = 0.0;
  std::string status;
};

/// Radial Gaussian of charge N carrying the phase e^{i lambda* v.x}, lambda* = m / sqrt(1-v^2).
inline Field init_boosted_gaussian(const GridSpec& grid, const PhysicalParams& p, double N, double width) {
  p.validate();
  require(std::isfinite(width) && width > 0.0, "Gaussian width must be positive");
  require(width >= 2.0 * grid.dx(), "Gaussian width is under-resolved (width < 2 dx)");
  require(N > 0.0, "target charge N must be positive");
  const double lambda_star = p.m > 0.0 ? p.m / std::sqrt(1.0 - dot(p.v, p.v)) : 0.0;
  Vec3 kphase{lambda_star * p.v[0], lambda_star * p.v[1], lambda_star * p.v[2]};
  Field f = sample(grid, [&](const Vec3& x) {
    return std::polar(std::exp(-dot(x, x) / (2.0 * width * width)), dot(kphase, x));
  });
  f *= std::sqrt(N / charge(f));
  return f;
}

inline Field init_boosted_gaussian(const GroundStateProblem& prob, double width) {
  return init_boosted_gaussian(prob.grid, prob.params, prob.N, width);
}

/// Centres the density centroid at the origin and makes sum Q real positive.
inline Field canonicalize(const Field& Q) {
  Field x = in_space(Q, Space::position);
  const Vec3 c = centroid(x);
  x = shifted(x, Vec3{-c[0], -c[1], -c[2]});
  cplx total{0.0, 0.0};
  for (const auto& c : x.values()) total += c;
  if (std::abs(total) > 0.0) x *= std::polar(1.0, -std::arg(total));
  return in_space(std::move(x), Q.space());
}

namespace detail {

/// One field seen from both spaces plus everything the solvers reuse.
struct Snapshot {
  Field x;
  Field k;
  Model::Hartree hartree;
  EnergyReport report;
};

inline Snapshot snapshot_from_fourier(const Model& model, Field khat) {
  Field x = to_position(khat);
  auto h = model.hartree(khat);
  EnergyReport r = model.report(khat, h);
  return {std::move(x), std::move(khat), std::move(h), r};
}

/// Fourier transform of Phi psi.
inline Field nonlinear_term(const Model& model, const Snapshot& s) { return model.hartree_product(s.hartree.phi_hat, s.k); }

struct ResidualInfo {
  Field grad_hat;  // H0 psi - Phi psi
  Field nl_hat;    // Phi psi
  double mu;
  double residual;
};

inline ResidualInfo residual_info(const Model& model, const Snapshot& s) {
  Field nl = nonlinear_term(model, s);
  Field g = s.k;
  apply_inplace(model.h0(), g);
  g -= nl;
  const double N = s.report.charge;
  const double mu = -inner(s.k, g).real() / N;
  double r2 = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) r2 += std::norm(g[i] + mu * s.k[i]);
  r2 *= model.grid().fourier_weight();
  return {std::move(g), std::move(nl), mu, std::sqrt(r2 / s.report.h_half_sq)};
}

inline void renormalize(Field& f, double N) { f *= std::sqrt(N / l2_norm_sq(f)); }

inline void check_supercritical(const GroundStateProblem& prob, const EnergyReport& r, int it) {
  const double floor = -0.5 * prob.params.m * prob.N * (1.0 + 1e-3);
  if (r.boosted_energy < floor)
    throw SupercriticalError("supercritical: boosted energy " + std::to_string(r.boosted_energy) +
                                 " fell below -m N/2 (1 + 1e-3) = " + std::to_string(floor) +
                                 "; no minimizer exists at this charge",
                             r.boosted_energy, it);
}

inline Field initial_field(const GroundStateProblem& prob) {
  if (auto* g = std::get_if<BoostedGaussianInit>(&prob.init)) return init_boosted_gaussian(prob, g->width);
  Field f = in_space(std::get<Field>(prob.init), Space::position);
  require(charge(f) > 0.0, "initial field is zero");
  return f;
}

inline GroundStateResult finish(const Model& model, const Snapshot& s, double mu,
                                double residual, int iterations, bool converged, std::string status) {
  GroundStateResult res{canonicalize(s.x)};
  res.mu = mu;
  res.energy = s.report;
  res.residual = residual;
  res.iterations = iterations;
  res.converged = converged;
  res.mu_identity = (0.5 * s.report.potential - 2.0 * s.report.boosted_energy) / s.report.charge;
  res.mu_consistency = std::abs(res.mu - res.mu_identity);
  res.mu_bound_margin = mu - (1.0 - std::sqrt(1.0 - dot(model.params().v, model.params().v))) * model.params().m;
  res.status = std::move(status);
  return res;
}

}  // namespace detail

/// Projected, preconditioned descent on the charge sphere with backtracking.
///
/// The search direction is P (grad + mu psi) with P = (f(k) + c)^{-1},
/// c = max(1, 1/2 - Sigma_v); each trial is rescaled to charge N and
/// accepted only when E_v does not increase.
inline GroundStateResult solve_gradient_flow(const GroundStateProblem& prob) {
  prob.validate();
  Model model(prob.grid, prob.params);
  const double c = std::max(1.0, 0.5 - prob.params.sigma());
  auto precond = shifted(model.h0(), c);
  for (auto& s : precond.symbol) s = 1.0 / s;

  Field k0 = to_fourier(detail::initial_field(prob));
  detail::renormalize(k0, prob.N);
  detail::Snapshot s = detail::snapshot_from_fourier(model, std::move(k0));
  detail::check_supercritical(prob, s.report, 0);

  double tau = 1.0;
  for (int it = 0;; ++it) {
    auto info = detail::residual_info(model, s);
    if (prob.on_iteration) prob.on_iteration({it, s.report.boosted_energy, info.residual, info.mu, tau});
    if (info.residual <= prob.tol)
      return detail::finish(model, s, info.mu, info.residual, it, true, "converged");
    if (it >= prob.max_iter)
      return detail::finish(model, s, info.mu, info.residual, it, false, "max_iter exhausted");

    Field dir = info.grad_hat;
    dir.axpy(info.mu, s.k);
    apply_inplace(precond, dir);

    const double scale = std::abs(s.report.kinetic) + std::abs(s.report.boost) + s.report.potential + 1.0;
    const double slack = 64.0 * std::numeric_limits<double>::epsilon() * scale;
    bool accepted = false;
    for (tau = 1.0; tau >= 1e-10; tau *= 0.5) {
      Field trial = s.k;
      trial.axpy(-tau, dir);
      detail::renormalize(trial, prob.N);
      auto ts = detail::snapshot_from_fourier(model, std::move(trial));
      detail::check_supercritical(prob, ts.report, it + 1);
      if (ts.report.boosted_energy <= s.report.boosted_energy + slack) {
        s = std::move(ts);
        accepted = true;
        break;
      }
    }
    if (!accepted)
      return detail::finish(model, s, info.mu, info.residual, it, false,
                            "line search stalled at the round-off floor");
  }
}

/// Damped iteration Q <- (H0 + lambda)^{-1} [Phi Q + (lambda - mu) Q], rescaled to charge N.
inline GroundStateResult solve_fixed_point(const GroundStateProblem& prob) {
  prob.validate();
  Model model(prob.grid, prob.params);
  const double lambda = prob.shift.value_or(-prob.params.sigma() + 0.25);
  auto resolvent = resolvent_symbol(prob.grid, prob.params.m, prob.params.v, lambda);

  Field k0 = to_fourier(detail::initial_field(prob));
  detail::renormalize(k0, prob.N);
  detail::Snapshot s = detail::snapshot_from_fourier(model, std::move(k0));
  detail::check_supercritical(prob, s.report, 0);

  double damping = prob.damping;
  std::deque<double> history;
  constexpr std::size_t window = 50;
  for (int it = 0;; ++it) {
    auto info = detail::residual_info(model, s);
    if (prob.on_iteration) prob.on_iteration({it, s.report.boosted_energy, info.residual, info.mu, damping});
    if (info.residual <= prob.tol)
      return detail::finish(model, s, info.mu, info.residual, it, true, "converged");
    if (it >= prob.max_iter)
      return detail::finish(model, s, info.mu, info.residual, it, false, "max_iter exhausted");

    history.push_back(info.residual);
    if (history.size() > window) {
      // Steady growth while leaving a saddle is not an oscillation.
      int turns = 0;
      for (std::size_t i = 2; i < history.size(); ++i)
        if ((history[i] - history[i - 1]) * (history[i - 1] - history[i - 2]) < 0.0) ++turns;
      if (history.back() > history.front() && turns >= 2) {
        damping *= 0.5;
        history.clear();
        if (damping < 1.0 / 64.0) throw NumericalError("fixed-point iteration keeps oscillating; aborting");
      } else {
        history.pop_front();
      }
    }

    Field next = info.nl_hat;
    next.axpy(lambda - info.mu, s.k);
    apply_inplace(resolvent, next);
    Field blended = s.k;
    blended *= (1.0 - damping);
    blended.axpy(damping, next);
    detail::renormalize(blended, prob.N);
    s = detail::snapshot_from_fourier(model, std::move(blended));
    detail::check_supercritical(prob, s.report, it + 1);
  }
}

inline GroundStateResult solve(const GroundStateProblem& prob) {
  return prob.solver == Solver::gradient_flow ? solve_gradient_flow(prob) : solve_fixed_point(prob);
}

enum class MuMethod { rayleigh, energy_identity };

/// Lagrange multiplier of a (near) solution of H0 Q - Phi Q = -mu Q.
inline double compute_mu(const Field& Q, const PhysicalParams& p, MuMethod method) {
  Model model(Q.grid(), p);
  const double N = charge(Q);
  require(N > 0.0, "compute_mu requires a nonzero field");
  if (method == MuMethod::rayleigh) {
    Field g = model.gradient(Q);
    return -inner(Q, g).real() / N;
  }
  auto r = model.report(Q);
  return (0.5 * r.potential - 2.0 * r.boosted_energy) / N;
}

/// ||H0 Q - Phi Q + mu Q||_2 / ||Q||_{H^{1/2}}.
inline double el_residual(const Field& Q, const PhysicalParams& p, double mu) {
  Model model(Q.grid(), p);
  Field g = model.gradient(Q);
  g.axpy(mu, in_space(Q, g.space()));
  const double hn = sobolev_half_norm(Q);
  return hn > 0.0 ? l2_norm(g) / hn : 0.0;
}

/// Distance between two fields modulo global phase after aligning centroids, relative L2.
inline double distance_mod_symmetry(const Field& a, const Field& b) {
  Field ca = canonicalize(in_space(a, Space::position));
  Field cb = canonicalize(in_space(b, Space::position));
  const cplx ov = inner(ca, cb);
  if (std::abs(ov) > 0.0) cb *= std::polar(1.0, -std::arg(ov));
  return l2_norm(ca - cb) / l2_norm(ca);
}

}  // namespace bstar
