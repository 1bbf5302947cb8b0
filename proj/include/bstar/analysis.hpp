#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "bstar/dynamics.hpp"
#include "bstar/groundstate.hpp"

namespace bstar {

// ---------------------------------------------------------------------------
// Best constant of P(psi) <= S_v <psi,(sqrt(-Delta) + i v.grad) psi> <psi,psi>
// ---------------------------------------------------------------------------

struct BestConstantResult {
  Vec3 v{};
  Field Q;
  double S = 0.0;           ///< 2 / <Q,Q>
  double Nc = 0.0;          ///< <Q,Q>
  double residual = 0.0;    ///< of sqrt(-Delta) Q + i v.grad Q - Phi Q = -Q
  double saturation = 0.0;  ///< P(Q) / (<Q,A Q> <Q,Q>) at the optimizer
  int iterations = 0;
  bool converged = false;
};

struct BestConstantOptions {
  double tol = 1e-8;
  int max_iter = 5000;
  double damping = 1.0;
  double init_width = 0.0;  ///< 0 picks max(1, 3 dx)
};

/// Solves sqrt(-Delta) Q + i v.grad Q - Phi Q = -Q by the damped map
/// Q <- (A + 1)^{-1} Phi Q, rescaling Q -> beta Q before each sweep so that
/// <Q, (A+1) Q> = int Phi |Q|^2 holds.
inline BestConstantResult best_constant(const Vec3& v, const GridSpec& grid, const BestConstantOptions& opt = {}) {
  require_subluminal(v);
  require(opt.tol > 0.0 && opt.max_iter > 0, "invalid best-constant options");
  Model model(grid, PhysicalParams{0.0, v});
  auto resolvent = shifted(model.h0(), 1.0);
  for (auto& s : resolvent.symbol) s = 1.0 / s;

  const double width = opt.init_width > 0.0 ? opt.init_width : std::max(1.0, 3.0 * grid.dx());
  Field k = to_fourier(init_boosted_gaussian(grid, PhysicalParams{0.0, v}, 2.5, width));
  BestConstantResult out{v, Field(grid)};
  double residual = std::numeric_limits<double>::infinity();
  for (int it = 0; it <= opt.max_iter; ++it) {
    auto s = detail::snapshot_from_fourier(model, k);
    const double A = s.report.kinetic + s.report.boost;
    const double N = s.report.charge;
    const double beta = std::sqrt((A + N) / s.report.potential);
    Field nl = detail::nonlinear_term(model, s);
    nl *= beta * beta * beta;
    Field scaled = s.k;
    scaled *= beta;

    Field r = scaled;
    apply_inplace(shifted(model.h0(), 1.0), r);
    r -= nl;
    residual = l2_norm(r) / std::sqrt(beta * beta * s.report.h_half_sq);
    out.iterations = it;
    if (residual <= opt.tol) {
      out.converged = true;
      k = std::move(scaled);
      break;
    }
    if (it == opt.max_iter) {
      k = std::move(scaled);
      break;
    }
    apply_inplace(resolvent, nl);
    scaled *= (1.0 - opt.damping);
    scaled.axpy(opt.damping, nl);
    k = std::move(scaled);
  }
  auto s = detail::snapshot_from_fourier(model, k);
  out.Q = canonicalize(s.x);
  out.Nc = s.report.charge;
  out.S = 2.0 / out.Nc;
  out.residual = residual;
  out.saturation = s.report.potential / ((s.report.kinetic + s.report.boost) * s.report.charge);
  return out;
}

/// Ratio P(psi) / (<psi,(sqrt(-Delta)+i v.grad) psi> <psi,psi>); bounded by S_v.
inline double interpolation_ratio(const Field& psi, const Vec3& v) {
  auto r = Model(psi.grid(), PhysicalParams{0.0, v}).report(psi);
  return r.potential / ((r.kinetic + r.boost) * r.charge);
}

/// Random field with complex normal Fourier coefficients on |k| <= k_band,
/// scaled to charge N. Deterministic for a fixed seed.
inline Field random_band_limited(const GridSpec& grid, std::uint64_t seed, double k_band, double N) {
  require(k_band > 0.0, "band limit must be positive");
  require(N > 0.0, "target charge N must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Field k(grid, Space::fourier);
  for_each_mode(grid, [&](std::size_t idx, const Vec3& kv, const auto&) {
    if (norm(kv) <= k_band) k[idx] = {normal(rng), normal(rng)};
  });
  Field x = to_position(std::move(k));
  x *= std::sqrt(N / charge(x));
  return x;
}

/// Critical charge from the ground-state solver: bisection on N between a
/// charge that converges and one that triggers the supercritical abort.
struct CriticalChargeBisection {
  double lower = 0.0;  ///< largest charge seen to converge
  double upper = 0.0;  ///< smallest charge seen to abort
  int solves = 0;
};

inline CriticalChargeBisection critical_charge_bisection(const GroundStateProblem& base, double lo, double hi,
                                                         int steps = 8) {
  require(0.0 < lo && lo < hi, "bisection bracket must satisfy 0 < lo < hi");
  CriticalChargeBisection out{lo, hi, 0};
  for (int i = 0; i < steps; ++i) {
    GroundStateProblem prob = base;
    prob.N = 0.5 * (out.lower + out.upper);
    bool sub = false;
    try {
      sub = solve(prob).converged;
    } catch (const SupercriticalError&) {
      sub = false;
    }
    ++out.solves;
    (sub ? out.lower : out.upper) = prob.N;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Decay fits
// ---------------------------------------------------------------------------

struct DecayFit {
  double r1 = 0.0;
  double r2 = 0.0;
  double rate = 0.0;        ///< fitted delta
  double prefactor = 0.0;   ///< exp(intercept)
  double delta_max = 0.0;   ///< admissible bound
  double envelope_c = 0.0;  ///< C used in the pointwise check
  double fit_residual = 0.0;
  int shells = 0;
  bool envelope_ok = false;
  bool pass = false;
};

struct DecayWindow {
  double r1 = 0.0;  ///< 0 picks 0.15 L
  double r2 = 0.0;  ///< 0 picks 0.45 L
};

namespace detail {

struct RadialSample {
  double r;
  double value;
};

/// Least squares of log(value) on r; returns (slope, intercept, rms residual).
inline std::array<double, 3> log_linear_fit(const std::vector<RadialSample>& s) {
  std::vector<double> r, y;
  for (const auto& p : s) {
    r.push_back(p.r);
    y.push_back(std::log(p.value));
  }
  const double slope = fit_slope(r, y);
  double mr = 0.0, my = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    mr += r[i];
    my += y[i];
  }
  mr /= r.size();
  my /= r.size();
  const double intercept = my - slope * mr;
  double rss = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) rss += std::pow(y[i] - intercept - slope * r[i], 2);
  return {slope, intercept, std::sqrt(rss / r.size())};
}

}  // namespace detail

/// Exponential fit of the radial maximum of |f| over shells of width dx,
/// measured from the origin. delta_max sets the pass threshold.
inline DecayFit decay_fit(const Field& f, double delta_max, const DecayWindow& window = {}) {
  const GridSpec& g = f.grid();
  DecayFit fit;
  fit.r1 = window.r1 > 0.0 ? window.r1 : 0.15 * g.L();
  fit.r2 = window.r2 > 0.0 ? window.r2 : 0.45 * g.L();
  require(fit.r2 <= 0.45 * g.L() * (1.0 + 1e-12), "decay window must satisfy r2 <= 0.45 L");
  require(fit.r1 < fit.r2, "decay window must satisfy r1 < r2");
  require(delta_max > 0.0, "decay bound must be positive");
  fit.delta_max = delta_max;

  Field x = in_space(f, Space::position);
  const int first = static_cast<int>(std::floor(fit.r1 / g.dx()));
  const int last = static_cast<int>(std::floor(fit.r2 / g.dx()));
  std::vector<detail::RadialSample> shells(last - first + 1, {0.0, 0.0});
  const int n = g.n();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int l = 0; l < n; ++l) {
        const double r = norm(Vec3{g.x(i), g.x(j), g.x(l)});
        if (r < fit.r1 || r > fit.r2) continue;
        const int s = static_cast<int>(std::floor(r / g.dx())) - first;
        if (s < 0 || s >= static_cast<int>(shells.size())) continue;
        const double a = std::abs(x[g.index(i, j, l)]);
        if (a > shells[s].value) shells[s] = {r, a};
      }
  std::erase_if(shells, [](const auto& p) { return p.value <= 0.0; });
  fit.shells = static_cast<int>(shells.size());
  require(fit.shells >= 8, "decay window holds fewer than 8 radial shells");

  auto [slope, intercept, rms] = detail::log_linear_fit(shells);
  fit.rate = -slope;
  fit.prefactor = std::exp(intercept);
  fit.fit_residual = rms;
  fit.envelope_c = fit.prefactor * std::exp(2.0 * rms);
  const double slow = 0.5 * delta_max;
  fit.envelope_ok = std::all_of(shells.begin(), shells.end(),
                                [&](const auto& p) { return p.value <= fit.envelope_c * std::exp(-slow * p.r); });
  fit.pass = fit.rate >= slow && fit.envelope_ok;
  return fit;
}

/// min{m, (Sigma_v + mu) / sqrt(1 - v^2)}.
inline double admissible_decay(const PhysicalParams& p, double mu) {
  return std::min(p.m, (p.sigma() + mu) / std::sqrt(1.0 - dot(p.v, p.v)));
}

inline DecayFit decay_fit(const GroundStateResult& res, const PhysicalParams& p, const DecayWindow& window = {}) {
  require(res.converged, "decay fit needs a converged ground state");
  require(res.mu > -p.sigma(), "decay fit needs mu > (1 - sqrt(1-v^2)) m");
  return decay_fit(res.Q, admissible_decay(p, res.mu), window);
}

struct GreenProbe {
  double m = 0.0;
  Vec3 v{};
  double mu = 0.0;
  double epsilon = 0.0;  ///< min{1, (Sigma_v + mu) / (m sqrt(1-v^2))}
  double rate_forward = 0.0;
  double rate_backward = 0.0;
  double rate_transverse = 0.0;
  double rate = 0.0;  ///< smallest of the three
  double threshold = 0.0;
  double r1 = 2.0;
  double r2 = 0.0;
  double anisotropy = 0.0;  ///< max relative spread of |G| over equal-radius lattice points, r in [1, L/4]
  bool pass = false;
};

/// G_mu as the position-space kernel of (f(k) + mu)^{-1}, damped by the smooth
/// filter exp(-36 (|k|/k_max)^8) so the cube edge leaves no algebraic tail.
inline Field green_function(const GridSpec& grid, double m, const Vec3& v, double mu, bool filtered = true) {
  auto R = resolvent_symbol(grid, m, v, mu);
  Field k(grid, Space::fourier);
  const double kmax = grid.k_max();
  for_each_mode(grid, [&](std::size_t idx, const Vec3& kv, const auto&) {
    const double q = dot(kv, kv) / (kmax * kmax);
    k[idx] = filtered ? R.symbol[idx] * std::exp(-36.0 * q * q * q * q) : R.symbol[idx];
  });
  Field G = to_position(std::move(k));
  G *= cplx{std::pow(2.0 * std::numbers::pi, -1.5), 0.0};
  return G;
}

/// Decay of |z|^2 |G_mu(z)| along +v, -v and a transverse lattice axis over [2, 0.4 L].
inline GreenProbe green_function_probe(double m, const Vec3& v, double mu, const GridSpec& grid = GridSpec(64, 20.0)) {
  require(m > 0.0, "Green probe requires m > 0");
  require_subluminal(v);
  require(above_spectrum(m, v, mu), "mu lies in the spectrum of H0 (need mu > -Sigma_v)");
  GreenProbe out{m, v, mu};
  out.epsilon = std::min(1.0, (spectrum_bottom(m, v) + mu) / (m * std::sqrt(1.0 - dot(v, v))));
  out.threshold = 0.8 * m * out.epsilon;
  out.r2 = 0.4 * grid.L();
  Field G = green_function(grid, m, v, mu);

  // Axis of v (x when v = 0) and one orthogonal lattice axis.
  int axis = 0;
  for (int a = 1; a < 3; ++a)
    if (std::abs(v[a]) > std::abs(v[axis])) axis = a;
  const int trans = (axis + 1) % 3;
  const int n = grid.n(), c = n / 2;
  auto ray = [&](int a, int sign) {
    std::vector<detail::RadialSample> s;
    for (int step = 1; step < c; ++step) {
      const double r = step * grid.dx();
      if (r < out.r1 || r > out.r2) continue;
      std::array<int, 3> idx{c, c, c};
      idx[a] += sign * step;
      s.push_back({r, r * r * std::abs(G[grid.index(idx[0], idx[1], idx[2])])});
    }
    require(s.size() >= 8, "Green window holds fewer than 8 samples");
    return -detail::log_linear_fit(s)[0];
  };
  out.rate_forward = ray(axis, +1);
  out.rate_backward = ray(axis, -1);
  out.rate_transverse = ray(trans, +1);
  out.rate = std::min({out.rate_forward, out.rate_backward, out.rate_transverse});
  out.pass = out.rate >= out.threshold;

  // Equal-radius lattice points (i,j,l) as integer offsets sharing i^2+j^2+l^2.
  std::map<int, std::pair<double, double>> spread;
  const int reach = static_cast<int>(std::floor(0.25 * grid.L() / grid.dx()));
  for (int i = -reach; i <= reach; ++i)
    for (int j = -reach; j <= reach; ++j)
      for (int l = -reach; l <= reach; ++l) {
        const int q = i * i + j * j + l * l;
        if (q * grid.dx() * grid.dx() < 1.0 || q > reach * reach) continue;
        const double a = std::abs(G[grid.index(c + i, c + j, c + l)]);
        auto [it, fresh] = spread.try_emplace(q, a, a);
        if (!fresh) it->second = {std::min(it->second.first, a), std::max(it->second.second, a)};
      }
  for (const auto& [q, mm] : spread) out.anisotropy = std::max(out.anisotropy, (mm.second - mm.first) / mm.second);
  return out;
}

// ---------------------------------------------------------------------------
// Energy curve
// ---------------------------------------------------------------------------

struct EnergySample {
  double N = 0.0;
  double energy = 0.0;  ///< E_v(N)
  double mu = 0.0;
  double residual = 0.0;
  int iterations = 0;
};

struct SubadditivityCheck {
  double N = 0.0;
  double alpha = 0.0;
  double whole = 0.0;  ///< E_v(N)
  double split = 0.0;  ///< E_v(alpha) + E_v(N - alpha)
  bool pass = false;
};

struct EnergyCurve {
  PhysicalParams params;
  double Nc = 0.0;
  std::vector<EnergySample> samples;
  std::vector<double> first_differences;
  std::vector<double> second_differences;
  std::vector<SubadditivityCheck> subadditivity;
  bool decreasing = false;
  bool concave = false;
  bool subadditive = false;
  bool truncated = false;
  std::string diagnostic;
};

struct EnergyCurveOptions {
  GridSpec grid{64, 20.0};
  Solver solver = Solver::fixed_point;
  double tol = 1e-8;
  int max_iter = 20000;
  bool warm_start = true;
};

/// E_v(N) on the given charges (strictly increasing), warm-started from the
/// previous sample. Subadditivity is spot-checked at the largest charge with
/// alpha = N/3 and N/2.
inline EnergyCurve energy_curve(const PhysicalParams& p, const std::vector<double>& charges, double Nc,
                                const EnergyCurveOptions& opt = {}) {
  p.validate();
  require(charges.size() >= 3, "energy curve needs at least three samples");
  for (std::size_t i = 0; i < charges.size(); ++i) {
    require(charges[i] > 0.0, "sample charges must be positive");
    if (i) require(charges[i] > charges[i - 1], "sample charges must be strictly increasing");
  }
  EnergyCurve curve{p, Nc};
  GroundStateProblem prob;
  prob.params = p;
  prob.grid = opt.grid;
  prob.solver = opt.solver;
  prob.tol = opt.tol;
  prob.max_iter = opt.max_iter;

  auto solve_at = [&](double N, const std::optional<Field>& warm) {
    GroundStateProblem q = prob;
    q.N = N;
    if (warm) q.init = *warm;
    return solve(q);
  };

  // The box holds a constant critical point at every N and the iteration never
  // leaves it, so a constant previous sample is answered with a cold start too.
  auto flat = [](const Field& Q) {
    double lo = INFINITY, hi = 0.0;
    for (const auto& c : Q.values()) {
      lo = std::min(lo, std::abs(c));
      hi = std::max(hi, std::abs(c));
    }
    return hi - lo <= 1e-3 * hi;
  };
  std::optional<Field> warm;
  for (double N : charges) {
    try {
      const bool use_warm = opt.warm_start && warm;
      auto res = solve_at(N, use_warm ? warm : std::nullopt);
      if (use_warm && flat(*warm)) {
        auto cold = solve_at(N, std::nullopt);
        if (cold.converged && (!res.converged || cold.energy.boosted_energy < res.energy.boosted_energy))
          res = std::move(cold);
      }
      if (!res.converged) {
        curve.truncated = true;
        curve.diagnostic = "no convergence at N = " + std::to_string(N) + ": " + res.status;
        break;
      }
      curve.samples.push_back({N, res.energy.boosted_energy, res.mu, res.residual, res.iterations});
      warm = std::move(res.Q);
    } catch (const NumericalError& e) {
      curve.truncated = true;
      curve.diagnostic = e.what();
      break;
    }
  }

  const auto& s = curve.samples;
  for (std::size_t i = 1; i < s.size(); ++i) curve.first_differences.push_back(s[i].energy - s[i - 1].energy);
  for (std::size_t i = 2; i < s.size(); ++i) {
    // Divided second difference, scaled to the mean spacing.
    const double h1 = s[i - 1].N - s[i - 2].N, h2 = s[i].N - s[i - 1].N;
    const double d = 2.0 * ((s[i].energy - s[i - 1].energy) / h2 - (s[i - 1].energy - s[i - 2].energy) / h1) / (h1 + h2);
    curve.second_differences.push_back(d * 0.25 * (h1 + h2) * (h1 + h2));
  }
  auto all_negative = [](const std::vector<double>& d) {
    return !d.empty() && std::all_of(d.begin(), d.end(), [](double x) { return x < 0.0; });
  };
  curve.decreasing = !curve.truncated && all_negative(curve.first_differences);
  curve.concave = !curve.truncated && all_negative(curve.second_differences);

  if (!curve.truncated && !s.empty()) {
    const double N = s.back().N;
    curve.subadditive = true;
    for (double alpha : {N / 3.0, N / 2.0}) {
      const double e1 = solve_at(alpha, std::nullopt).energy.boosted_energy;
      const double e2 = alpha == N / 2.0 ? e1 : solve_at(N - alpha, std::nullopt).energy.boosted_energy;
      SubadditivityCheck c{N, alpha, s.back().energy, e1 + e2};
      c.pass = c.whole < c.split;
      curve.subadditive = curve.subadditive && c.pass;
      curve.subadditivity.push_back(c);
    }
  }
  return curve;
}

/// n equally spaced charges on [lo, hi] * Nc.
inline std::vector<double> charge_samples(double Nc, double lo, double hi, int n) {
  require(n >= 2 && 0.0 < lo && lo < hi, "invalid charge sampling");
  std::vector<double> out;
  for (int i = 0; i < n; ++i) out.push_back(Nc * (lo + (hi - lo) * i / (n - 1)));
  return out;
}

// ---------------------------------------------------------------------------
// Stability
// ---------------------------------------------------------------------------

struct StabilityOptions {
  double epsilon = 0.01;
  std::uint64_t seed = 1;
  double k_band = 2.0;
  double K = 10.0;  ///< eps = 0 falls back to the 5e-3 tracking tolerance
};

struct StabilityResult {
  double epsilon = 0.0;
  std::uint64_t seed = 0;
  double sup_distance = 0.0;
  double initial_distance = 0.0;
  double K = 0.0;
  bool bounded = false;
  bool inconclusive = false;
  EvolutionTrace trace;
};

/// Q + eps * eta with eta random band-limited and ||eta||_{H^{1/2}} = ||Q||_{H^{1/2}},
/// rescaled back to the charge of Q.
inline Field perturbed_ground_state(const Field& Q, double epsilon, std::uint64_t seed, double k_band) {
  require(epsilon >= 0.0 && epsilon <= 0.1, "perturbation size must lie in [0, 0.1]");
  Field x = in_space(Q, Space::position);
  const double N = charge(x);
  if (epsilon == 0.0) return x;
  Field eta = random_band_limited(x.grid(), seed, k_band, 1.0);
  eta *= std::sqrt(sobolev_half_norm_sq(x) / sobolev_half_norm_sq(eta));
  x.axpy(epsilon, eta);
  x *= std::sqrt(N / charge(x));
  return x;
}

inline StabilityResult stability_experiment(const GroundStateResult& res, const EvolutionConfig& cfg,
                                            const StabilityOptions& opt = {}) {
  require(res.converged, "stability experiment needs a converged ground state");
  Field psi0 = perturbed_ground_state(res.Q, opt.epsilon, opt.seed, opt.k_band);
  StabilityResult out{opt.epsilon, opt.seed};
  out.K = opt.K;
  out.trace = evolve(psi0, cfg, res.Q);
  for (const auto& r : out.trace.records) out.sup_distance = std::max(out.sup_distance, r.orbit_distance);
  if (!out.trace.records.empty()) out.initial_distance = out.trace.records.front().orbit_distance;
  out.inconclusive = out.trace.termination != Termination::completed;
  const double allowed = opt.epsilon > 0.0 ? opt.K * opt.epsilon : 5e-3;
  out.bounded = !out.inconclusive && out.sup_distance <= allowed;
  return out;
}

}  // namespace bstar
