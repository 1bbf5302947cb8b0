// Acceptance run at desk scale: n = 64, L = 20, m = 1 unless a check says otherwise.
// One PASS/FAIL line per criterion; exit status is nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "bstar/analysis.hpp"
#include "bstar/dynamics.hpp"
#include "bstar/groundstate.hpp"

using namespace bstar;

namespace {

const GridSpec kGrid(64, 20.0);

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Shared {
  BestConstantResult bc0, bc3, bc6;
  GroundStateResult gs0, gs3, gs6;
};

Shared* shared = nullptr;

GroundStateResult ground_state(double v, double N, Solver solver = Solver::fixed_point) {
  GroundStateProblem p;
  p.params.v = {v, 0.0, 0.0};
  p.N = N;
  p.grid = kGrid;
  p.solver = solver;
  p.tol = 1e-8;
  return solve(p);
}

double min_real_part(const Field& Q) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& c : Q.values()) m = std::min(m, c.real());
  return m;
}

Outcome c01() {
  const auto& b = shared->bc0;
  const auto wide = best_constant({0, 0, 0}, GridSpec(128, 40.0));
  const double drift = std::abs(wide.Nc - b.Nc) / b.Nc;
  const bool ok = b.converged && wide.converged && b.Nc > 4.0 / std::numbers::pi && b.S < std::numbers::pi / 2.0 &&
                  b.residual <= 1e-6 && drift <= 0.01;
  return {ok, fmt("Nc(0)=%.6f (>1.2732) S0=%.6f (<1.5708) residual=%.2e; L=40,n=128: Nc=%.6f drift=%.3f%%", b.Nc,
                  b.S, b.residual, wide.Nc, 100.0 * drift)};
}

Outcome c02() {
  const auto& s0 = shared->bc0;
  bool ok = s0.converged;
  std::string d;
  for (const auto* b : {&shared->bc3, &shared->bc6}) {
    const double v = b->v[0];
    const double m1 = b->S - s0.S;                    // S_v - S_0
    const double m2 = s0.S / (1.0 - v) - b->S;        // S_0/(1-|v|) - S_v
    const double m3 = s0.Nc - b->Nc;                  // N_c(0) - N_c(v)
    const double m4 = b->Nc - (1.0 - v) * s0.Nc;      // N_c(v) - (1-|v|) N_c(0)
    const bool here = b->converged && m1 >= 1e-3 && m2 >= 1e-3 && m3 >= 1e-3 && m4 >= 1e-3;
    ok = ok && here;
    d += fmt("v=%.1f: S=%.5f Nc=%.5f margins %.4f %.4f %.4f %.4f; ", v, b->S, b->Nc, m1, m2, m3, m4);
  }
  return {ok, d};
}

Outcome c03() {
  bool ok = true;
  std::string d;
  for (const auto* g : {&shared->gs0, &shared->gs3, &shared->gs6}) {
    ok = ok && g->converged && g->mu_bound_margin > 0.0;
    d += fmt("mu=%.6f margin=%.6f; ", g->mu, g->mu_bound_margin);
  }
  d += fmt("v=0.6 bound %.4f", 1.0 - std::sqrt(1.0 - 0.36));
  return {ok, d};
}

Outcome c04() {
  bool ok = true;
  std::string d;
  const double speeds[] = {0.0, 0.3, 0.6};
  const GroundStateResult* gs[] = {&shared->gs0, &shared->gs3, &shared->gs6};
  for (int i = 0; i < 3; ++i) {
    const double v = speeds[i];
    const double N = gs[i]->energy.charge;
    const double E = gs[i]->energy.boosted_energy;
    const double lower = -0.5 * N;
    const double upper = -0.5 * (1.0 - std::sqrt(1.0 - v * v)) * N;
    PhysicalParams p;
    p.v = {v, 0, 0};
    const auto nr = gaussian_nonrelativistic_bound(kGrid, p, N, 0.7, 8.0);
    const bool here = gs[i]->converged && lower <= E && E < upper && E <= upper + nr.value;
    ok = ok && here;
    d += fmt("v=%.1f: %.5f <= %.6f < %.5f, <= %.6f; ", v, lower, E, upper, upper + nr.value);
  }
  return {ok, d};
}

Outcome c05() {
  PhysicalParams p;
  const auto curve = energy_curve(p, charge_samples(shared->bc0.Nc, 0.1, 0.9, 6), shared->bc0.Nc);
  double max1 = -1e300, max2 = -1e300;
  for (double x : curve.first_differences) max1 = std::max(max1, x);
  for (double x : curve.second_differences) max2 = std::max(max2, x);
  std::string sub;
  for (const auto& s : curve.subadditivity) sub += fmt("a=%.3f: %.6f < %.6f ", s.alpha, s.whole, s.split);
  return {curve.decreasing && curve.concave && curve.subadditive && !curve.truncated,
          fmt("samples=%zu max first diff=%.3e max second diff=%.3e; ", curve.samples.size(), max1, max2) + sub +
              curve.diagnostic};
}

Outcome c06() {
  PhysicalParams p0, p3;
  p3.v = {0.3, 0, 0};
  const auto d0 = decay_fit(shared->gs0, p0);
  const auto d3 = decay_fit(shared->gs3, p3);
  const auto g0 = green_function_probe(1.0, {0, 0, 0}, 1.0, kGrid);
  const auto g6 = green_function_probe(1.0, {0.6, 0, 0}, 0.3, kGrid);
  const bool ok = d0.pass && d3.pass && g0.pass && g0.rate >= 0.8 && g6.pass && g6.rate >= 0.1;
  return {ok, fmt("decay v=0 rate=%.4f (>= %.4f) env=%d; v=0.3 rate=%.4f (>= %.4f) env=%d; green v=0 rate=%.4f (>= 0.8); "
                  "v=0.6 rate=%.4f (>= 0.1)",
                  d0.rate, 0.5 * d0.delta_max, d0.envelope_ok, d3.rate, 0.5 * d3.delta_max, d3.envelope_ok, g0.rate,
                  g6.rate)};
}

Outcome c07() {
  const Field& Q = shared->gs0.Q;
  double im = 0.0, re = 0.0;
  for (const auto& c : Q.values()) {
    im = std::max(im, std::abs(c.imag()));
    re = std::max(re, c.real());
  }
  const double minre = min_real_part(Q);
  return {minre > 0.0 && im / re <= 1e-6, fmt("min Re Q=%.3e max|Im Q|/max Re Q=%.3e", minre, im / re)};
}

Outcome c08() {
  PhysicalParams p;
  p.v = {0.3, 0.1, 0.0};
  double worst = 0.0;
  for (int i = 0; i < 10; ++i) {
    Field psi = random_band_limited(kGrid, 100 + i, 2.0, 1.0);
    Field dir = random_band_limited(kGrid, 200 + i, 2.0, 1.0);
    if (i % 2) dir *= cplx{0.0, 1.0};
    Model model(kGrid, p);
    const double h = 1e-5;
    const double ep = model.report(psi + cplx{h, 0.0} * dir).boosted_energy;
    const double em = model.report(psi - cplx{h, 0.0} * dir).boosted_energy;
    const double fd = (ep - em) / (2.0 * h);
    const double an = inner(model.gradient(psi), dir).real();
    worst = std::max(worst, std::abs(fd - an) / std::abs(an));
  }
  return {worst <= 1e-6, fmt("worst relative error over 10 fields %.3e", worst)};
}

Outcome c09() {
  const Field psi = random_band_limited(kGrid, 7, 2.0, 0.5);
  auto run = [&](double dt) {
    EvolutionConfig cfg;
    cfg.dt = dt;
    cfg.t_end = 10.0;
    cfg.record_every = 200;
    auto tr = evolve(psi, cfg);
    const auto& a = tr.records.front();
    const auto& b = tr.records.back();
    return std::pair{std::abs(b.charge - a.charge) / a.charge, std::abs(b.energy - a.energy) / std::abs(a.energy)};
  };
  auto [dN, dE] = run(5e-3);
  auto [dN2, dE2] = run(2.5e-3);
  const double ratio = dE / dE2;
  return {dN <= 1e-8 && dE <= 1e-4 && ratio >= 3.0,
          fmt("dt=5e-3: |dN|/N=%.2e |dE|/|E|=%.2e; dt=2.5e-3: |dE|/|E|=%.2e; reduction %.2fx", dN, dE, dE2, ratio)};
}

Outcome c10() {
  EvolutionConfig cfg;
  cfg.dt = 5e-3;
  cfg.t_end = 5.0;
  cfg.params.v = {0.3, 0, 0};
  auto tr = evolve(shared->gs3.Q, cfg, shared->gs3.Q);
  double sup = 0.0;
  for (const auto& r : tr.records) sup = std::max(sup, r.orbit_distance);
  const Vec3 vel = centroid_velocity(tr, kGrid.L());
  const double err = std::abs(vel[0] - 0.3) / 0.3;
  return {tr.termination == Termination::completed && sup <= 5e-3 && err <= 0.02,
          fmt("sup d=%.3e velocity=(%.5f, %.1e, %.1e) rel err=%.2e", sup, vel[0], vel[1], vel[2], err)};
}

Outcome c11() {
  EvolutionConfig cfg;
  cfg.dt = 5e-3;
  cfg.t_end = 5.0;
  cfg.params.v = {0.3, 0, 0};
  StabilityOptions a, b;
  a.epsilon = 0.01;
  b.epsilon = 0.02;
  const auto ra = stability_experiment(shared->gs3, cfg, a);
  const auto rb = stability_experiment(shared->gs3, cfg, b);
  const double ratio = rb.sup_distance / ra.sup_distance;
  const double Ka = ra.sup_distance / a.epsilon, Kb = rb.sup_distance / b.epsilon;
  return {ra.bounded && rb.bounded && ratio >= 1.5 && ratio <= 3.0 && Ka <= 10.0 && Kb <= 10.0,
          fmt("sup d: %.4e (eps=0.01), %.4e (eps=0.02); ratio=%.3f; K=%.3f, %.3f", ra.sup_distance, rb.sup_distance,
              ratio, Ka, Kb)};
}

Outcome c12() {
  PhysicalParams p;
  const double N = 4.0;
  auto datum = blowup_datum(kGrid, p, N);
  EvolutionConfig cfg;
  cfg.dt = 5e-3;
  cfg.t_end = 20.0;
  cfg.record_every = 10;
  auto tr = evolve(datum.psi, cfg);
  const double growth = tr.records.back().h_half_sq / tr.records.front().h_half_sq;
  const bool fired = tr.termination == Termination::blowup_suspected;
  Field small = datum.psi;
  small *= std::sqrt(0.1);
  const double Es = Model(kGrid, p).report(small).energy;
  auto ct = evolve(small, cfg);
  const bool contrast = ct.termination == Termination::completed;
  return {datum.energy < datum.threshold && fired && growth >= 10.0 && contrast,
          fmt("datum N=%.1f width=%.3f E=%.4f < -mN/2=%.4f; guard %s at t=%.2f with H1/2 growth %.2fx (needs 10x), "
              "tail=%.3f; contrast E=%.4f (> %.4f) %s to t=%.0f",
              N, datum.width, datum.energy, datum.threshold, fired ? "fired" : "did not fire", tr.records.back().t,
              growth, tr.records.back().tail_fraction, Es, -0.05 * N, to_string(ct.termination),
              ct.records.back().t)};
}

Outcome c13() {
  const double N = 0.5 * shared->bc3.Nc;
  const auto gf = ground_state(0.3, N, Solver::gradient_flow);
  const auto& fp = shared->gs3;
  const double dE = std::abs(gf.energy.boosted_energy - fp.energy.boosted_energy);
  const double dQ = distance_mod_symmetry(gf.Q, fp.Q);
  return {gf.converged && fp.converged && dE <= 1e-7 && dQ <= 1e-5,
          fmt("E_v gradient flow=%.12f fixed point=%.12f |dE|=%.2e; field distance=%.2e", gf.energy.boosted_energy,
              fp.energy.boosted_energy, dE, dQ)};
}

Outcome c14() {
  // Localized profile evaluated analytically at x and at 2x.
  const double s = 1.2;
  auto profile = [s](const Vec3& x) {
    const double r2 = dot(x, x);
    return cplx{1.0 + 0.2 * x[1], 0.3 * x[0]} * std::polar(std::exp(-r2 / (2.0 * s * s)), 0.5 * x[0] - 0.25 * x[2]);
  };
  const double a = 2.0;
  Field psi = sample(kGrid, profile);
  Field psi_a = sample(kGrid, [&](const Vec3& x) { return std::pow(a, 1.5) * profile({a * x[0], a * x[1], a * x[2]}); });
  PhysicalParams p{0.0, {0.3, 0.0, 0.0}};
  const auto r1 = boosted_energy(psi, p);
  const auto ra = boosted_energy(psi_a, p);
  const double e1 = r1.boosted_energy, ea = ra.boosted_energy;
  const double rel = std::abs(ea - a * e1) / std::abs(a * e1);
  auto defect = [a](double x1, double xa) { return std::abs(xa - a * x1) / std::abs(a * x1); };
  return {rel <= 1e-10, fmt("E_v(psi)=%.14f E_v(psi_2)=%.14f relative defect %.2e (kinetic %.2e boost %.2e potential %.2e)",
                            e1, ea, rel, defect(r1.kinetic, ra.kinetic), defect(r1.boost, ra.boost),
                            defect(r1.potential, ra.potential))};
}

}  // namespace

int main() {
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  auto bc0 = best_constant({0, 0, 0}, kGrid);
  auto bc3 = best_constant({0.3, 0, 0}, kGrid);
  auto bc6 = best_constant({0.6, 0, 0}, kGrid);
  auto gs0 = ground_state(0.0, 0.5 * bc0.Nc);
  auto gs3 = ground_state(0.3, 0.5 * bc3.Nc);
  auto gs6 = ground_state(0.6, 0.5 * bc6.Nc);
  Shared s{std::move(bc0), std::move(bc3), std::move(bc6), std::move(gs0), std::move(gs3), std::move(gs6)};
  shared = &s;

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"best constant at v=0", c01},
      {"boosted constants v=0.3, 0.6", c02},
      {"multiplier lower bound", c03},
      {"energy window", c04},
      {"energy curve structure", c05},
      {"exponential decay and Green kernel", c06},
      {"positivity at v=0", c07},
      {"gradient vs finite differences", c08},
      {"conservation and second order", c09},
      {"travelling wave v=0.3", c10},
      {"stability scaling", c11},
      {"blow-up probe", c12},
      {"solver cross-check", c13},
      {"massless scaling identity", c14},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = clock::now();
    Outcome o{false, ""};
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(clock::now() - t0).count();
    std::printf("[%s] %02zu %s | %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str(),
                secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d of %zu criteria passed in %.0fs\n", static_cast<int>(criteria.size()) - failed, criteria.size(),
              std::chrono::duration<double>(clock::now() - start).count());
  return failed == 0 ? 0 : 1;
}
