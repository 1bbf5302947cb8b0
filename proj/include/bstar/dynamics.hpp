#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "bstar/groundstate.hpp"

namespace bstar {

struct BlowupGuard {
  double tail_threshold = 0.1;  ///< charge fraction beyond |k| > k_max/2
  double growth = 10.0;         ///< factor on the squared H^{1/2} norm
};

enum class Termination { completed, blowup_suspected, nan_abort };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::completed: return "completed";
    case Termination::blowup_suspected: return "blowup_suspected";
    default: return "nan_abort";
  }
}

struct TraceRecord {
  double t = 0.0;
  double charge = 0.0;
  double energy = 0.0;          ///< T/2 + (V|psi|^2)/2 - P/4
  double boosted_energy = 0.0;  ///< energy + B/2 in the frame of params.v
  double h_half_sq = 0.0;
  Vec3 centroid{};
  double phase = 0.0;
  double orbit_distance = std::numeric_limits<double>::quiet_NaN();
  double tail_fraction = 0.0;
};

struct EvolutionConfig {
  double dt = 5e-3;
  double t_end = 1.0;
  PhysicalParams params;
  int record_every = 20;
  std::optional<Field> external_potential;
  BlowupGuard guard;
  /// Drops the Hartree term; used for checks of the linear propagator.
  bool linear_only = false;
  std::function<void(const TraceRecord&)> on_record;
  /// Sees the position-space field at each record.
  std::function<void(const TraceRecord&, const Field&)> on_state;

  void validate(const GridSpec& grid) const {
    params.validate();
    require(std::isfinite(dt) && dt != 0.0, "time step must be nonzero");
    require(std::isfinite(t_end) && t_end >= 0.0, "t_end must be finite and >= 0");
    require(record_every > 0, "record_every must be positive");
    require(guard.tail_threshold > 0.0 && guard.tail_threshold < 1.0, "tail threshold must lie in (0, 1)");
    require(guard.growth > 1.0, "growth factor must exceed 1");
    if (external_potential) {
      const Field& V = *external_potential;
      require(V.grid() == grid, "external potential grid does not match the field grid");
      require(V.space() == Space::position, "external potential must be given in position space");
      for (const auto& c : V.values())
        require(std::isfinite(c.real()) && c.imag() == 0.0, "external potential must be real and bounded");
    }
  }
};

struct EvolutionTrace {
  std::vector<TraceRecord> records;
  Termination termination = Termination::completed;
  std::string message;
  std::optional<Field> final_state;
  long steps = 0;
};

/// Charge fraction carried by modes with |k| > k_max / 2.
inline double tail_fraction(const Field& psi) {
  Field k = in_space(psi, Space::fourier);
  const double cut = 0.5 * psi.grid().k_max();
  double tail = 0.0, total = 0.0;
  for_each_mode(psi.grid(), [&](std::size_t idx, const Vec3& kv, const auto&) {
    const double w = std::norm(k[idx]);
    total += w;
    if (norm(kv) > cut) tail += w;
  });
  return total > 0.0 ? tail / total : 0.0;
}

/// Strang splitter with exact substeps. Phi is cached between steps since the
/// nonlinear phase leaves |psi| unchanged.
class StrangStepper {
 public:
  StrangStepper(const GridSpec& grid, const EvolutionConfig& cfg)
      : cfg_(cfg), model_(grid, PhysicalParams{cfg.params.m, {}}), linear_(propagator(model_.kinetic(), cfg.dt)) {
    cfg.validate(grid);
  }

  const Model& model() const { return model_; }

  /// Advances a position-space field by one step of size dt.
  void step(Field& x) {
    if (!phi_) phi_ = potential(x);
    half_phase(x);
    Field k = to_fourier(std::move(x));
    apply_inplace(linear_, k);
    x = to_position(std::move(k));
    phi_ = potential(x);
    half_phase(x);
    detail::ensure_finite(x, "strang_step");
  }

  /// Drops the cached potential; call after modifying the field externally.
  void reset() { phi_.reset(); }

 private:
  Field potential(const Field& x) const {
    if (cfg_.linear_only) return Field(x.grid(), Space::position);
    return model_.hartree_potential(x);
  }

  void half_phase(Field& x) const {
    const double h = 0.5 * cfg_.dt;
    const Field& phi = *phi_;
    const Field* V = cfg_.external_potential ? &*cfg_.external_potential : nullptr;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double w = phi[i].real() - (V ? (*V)[i].real() : 0.0);
      x[i] *= std::polar(1.0, h * w);
    }
  }

  EvolutionConfig cfg_;
  Model model_;
  SpectralMultiplier linear_;
  std::optional<Field> phi_;
};

/// One Strang step of size cfg.dt; the result is in position space.
inline Field strang_step(const Field& psi, const EvolutionConfig& cfg) {
  StrangStepper stepper(psi.grid(), cfg);
  Field x = in_space(psi, Space::position);
  stepper.step(x);
  return x;
}

namespace detail {

/// Symmetry-orbit tracker for one reference profile.
struct OrbitReference {
  Field Q;
  Vec3 centroid;
  double norm_sq;

  explicit OrbitReference(const Field& q)
      : Q(in_space(q, Space::position)), centroid(bstar::centroid(Q)), norm_sq(sobolev_half_norm_sq(Q)) {}

  /// (d, theta) for ||psi - e^{i theta} Q(. - a)||_{H^{1/2}} / ||Q||_{H^{1/2}}.
  std::pair<double, double> distance(const Field& x, const Vec3& c) const {
    const GridSpec& g = x.grid();
    Vec3 a{};
    for (int i = 0; i < 3; ++i) a[i] = std::remainder(c[i] - centroid[i], g.L());
    Field qa = shifted(Q, a);
    const double theta = std::arg(inner(qa, x));
    qa *= std::polar(1.0, theta);
    return {std::sqrt(sobolev_half_norm_sq(x - qa) / norm_sq), theta};
  }
};

inline TraceRecord make_record(double t, const Field& x, const Model& model, const EvolutionConfig& cfg,
                               const OrbitReference* ref) {
  TraceRecord r;
  r.t = t;
  Field k = to_fourier(x);
  auto e = model.report(k, model.hartree(k));
  r.charge = e.charge;
  double vterm = 0.0;
  if (cfg.external_potential) {
    for (std::size_t i = 0; i < x.size(); ++i) vterm += (*cfg.external_potential)[i].real() * std::norm(x[i]);
    vterm *= x.grid().cell_volume();
  }
  r.energy = 0.5 * e.kinetic + 0.5 * vterm - (cfg.linear_only ? 0.0 : 0.25 * e.potential);
  r.boosted_energy = r.energy + 0.5 * quadratic_form(boost_symbol(x.grid(), cfg.params.v), k);
  r.h_half_sq = e.h_half_sq;
  r.centroid = centroid(x);
  r.tail_fraction = tail_fraction(k);
  if (ref) {
    auto [d, theta] = ref->distance(x, r.centroid);
    r.orbit_distance = d;
    r.phase = theta;
  } else {
    cplx total{0.0, 0.0};
    for (const auto& c : x.values()) total += c;
    r.phase = std::arg(total);
  }
  return r;
}

inline bool record_finite(const TraceRecord& r) {
  return std::isfinite(r.charge) && std::isfinite(r.energy) && std::isfinite(r.h_half_sq) &&
         std::isfinite(r.tail_fraction);
}

}  // namespace detail

/// Evolves psi0 to cfg.t_end, recording every cfg.record_every steps and at the end.
/// With a reference profile the record carries the orbit distance to it.
inline EvolutionTrace evolve(const Field& psi0, const EvolutionConfig& cfg,
                             const std::optional<Field>& reference = std::nullopt) {
  cfg.validate(psi0.grid());
  require(cfg.dt > 0.0, "evolve requires dt > 0");
  if (reference) require(reference->grid() == psi0.grid(), "reference grid does not match the initial field");
  std::optional<detail::OrbitReference> ref;
  if (reference) ref.emplace(*reference);

  StrangStepper stepper(psi0.grid(), cfg);
  EvolutionTrace trace;
  Field x = in_space(psi0, Space::position);
  const long total = static_cast<long>(std::llround(cfg.t_end / cfg.dt));
  double h0 = 0.0;

  auto record = [&](long step) -> bool {
    TraceRecord r;
    try {
      r = detail::make_record(step * cfg.dt, x, stepper.model(), cfg, ref ? &*ref : nullptr);
    } catch (const NumericalError&) {
      r.t = step * cfg.dt;
      r.charge = std::numeric_limits<double>::quiet_NaN();
    }
    if (!detail::record_finite(r)) {
      trace.termination = Termination::nan_abort;
      trace.message = "non-finite diagnostics at t = " + std::to_string(r.t);
      return false;
    }
    trace.records.push_back(r);
    if (cfg.on_record) cfg.on_record(r);
    if (cfg.on_state) cfg.on_state(r, x);
    if (step == 0) h0 = r.h_half_sq;
    if (r.tail_fraction > cfg.guard.tail_threshold) {
      trace.termination = Termination::blowup_suspected;
      trace.message = "spectral tail fraction " + std::to_string(r.tail_fraction) + " exceeded " +
                      std::to_string(cfg.guard.tail_threshold) + " at t = " + std::to_string(r.t);
      return false;
    }
    if (h0 > 0.0 && r.h_half_sq >= cfg.guard.growth * h0) {
      trace.termination = Termination::blowup_suspected;
      trace.message = "H^{1/2} growth " + std::to_string(r.h_half_sq / h0) + " reached at t = " + std::to_string(r.t);
      return false;
    }
    return true;
  };

  bool running = record(0);
  for (long s = 1; running && s <= total; ++s) {
    try {
      stepper.step(x);
    } catch (const NumericalError& e) {
      trace.termination = Termination::nan_abort;
      trace.message = std::string(e.what()) + " at step " + std::to_string(s);
      trace.steps = s;
      break;
    }
    trace.steps = s;
    if (s % cfg.record_every == 0 || s == total) running = record(s);
  }
  trace.final_state = std::move(x);
  return trace;
}

/// Unwrapped centroid path along one axis, given periodic centroids.
inline std::vector<double> unwrapped_centroid(const EvolutionTrace& trace, int axis, double L) {
  std::vector<double> out;
  for (const auto& r : trace.records) {
    double c = r.centroid[axis];
    if (!out.empty()) c = out.back() + std::remainder(c - out.back(), L);
    out.push_back(c);
  }
  return out;
}

/// Least-squares slope of y against x.
inline double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size() && x.size() >= 2, "slope fit needs at least two points");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// Centroid velocity fitted over the trace.
inline Vec3 centroid_velocity(const EvolutionTrace& trace, double L) {
  std::vector<double> t;
  for (const auto& r : trace.records) t.push_back(r.t);
  Vec3 v{};
  for (int a = 0; a < 3; ++a) v[a] = fit_slope(t, unwrapped_centroid(trace, a, L));
  return v;
}

struct BlowupDatum {
  Field psi;
  double width = 0.0;
  double energy = 0.0;
  double threshold = 0.0;  ///< -m N / 2
};

/// Centered Gaussian of charge N, shrunk from width 3 down to 2 dx until
/// E < -m N / 2 with a 5% margin.
inline BlowupDatum blowup_datum(const GridSpec& grid, const PhysicalParams& p, double N) {
  p.validate();
  require(p.m > 0.0, "blow-up probe requires m > 0");
  require(N > 0.0, "target charge N must be positive");
  const double target = -0.5 * p.m * N * 1.05;
  Model model(grid, PhysicalParams{p.m, {}});
  for (double w = 3.0; w >= 2.0 * grid.dx(); w *= 0.95) {
    Field psi = sample(grid, [&](const Vec3& x) { return cplx{std::exp(-dot(x, x) / (2.0 * w * w)), 0.0}; });
    psi *= std::sqrt(N / charge(psi));
    const double E = model.report(psi).energy;
    if (E < target) return {std::move(psi), w, E, -0.5 * p.m * N};
  }
  throw ValidationError("no Gaussian width in [2 dx, 3] reaches E < -m N / 2 (1.05); grid too coarse or N too small");
}

/// Spherically symmetric collapse experiment. The datum keeps its own Gaussian
/// shape when N is rescaled, so the contrast run can reuse it.
inline EvolutionTrace blowup_probe(double N_target, const EvolutionConfig& cfg, const GridSpec& grid) {
  require(cfg.params.m > 0.0, "blow-up probe requires m > 0");
  auto datum = blowup_datum(grid, cfg.params, N_target);
  return evolve(datum.psi, cfg);
}

}  // namespace bstar
