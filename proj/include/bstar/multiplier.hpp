#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "bstar/grid.hpp"

namespace bstar {

/// A symbol sampled on the Fourier lattice; acts on fields by pointwise
/// multiplication in Fourier space.
struct SpectralMultiplier {
  GridSpec grid;
  std::vector<cplx> symbol;
  std::string label;

  SpectralMultiplier(const GridSpec& g, std::vector<cplx> s, std::string lbl)
      : grid(g), symbol(std::move(s)), label(std::move(lbl)) {
    require(symbol.size() == grid.size(), "symbol length does not match grid");
  }

  bool is_real(double tol = 0.0) const {
    for (const auto& s : symbol)
      if (std::abs(s.imag()) > tol) return false;
    return true;
  }
  double min_real() const {
    double m = symbol.front().real();
    for (const auto& s : symbol) m = std::min(m, s.real());
    return m;
  }
  double max_abs() const {
    double m = 0.0;
    for (const auto& s : symbol) m = std::max(m, std::abs(s));
    return m;
  }
};

inline SpectralMultiplier operator*(const SpectralMultiplier& a, const SpectralMultiplier& b) {
  require(a.grid == b.grid, "grid mismatch between multipliers");
  std::vector<cplx> s(a.symbol.size());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = a.symbol[i] * b.symbol[i];
  return {a.grid, std::move(s), "(" + a.label + ")*(" + b.label + ")"};
}

inline SpectralMultiplier operator+(const SpectralMultiplier& a, const SpectralMultiplier& b) {
  require(a.grid == b.grid, "grid mismatch between multipliers");
  std::vector<cplx> s(a.symbol.size());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = a.symbol[i] + b.symbol[i];
  return {a.grid, std::move(s), a.label + "+" + b.label};
}

inline SpectralMultiplier shifted(SpectralMultiplier a, double lambda) {
  for (auto& s : a.symbol) s += lambda;
  a.label += "+" + std::to_string(lambda);
  return a;
}

template <class Fn>
SpectralMultiplier make_symbol(const GridSpec& grid, std::string label, Fn&& fn) {
  std::vector<cplx> s(grid.size());
  for_each_mode(grid, [&](std::size_t idx, const Vec3& k, const std::array<int, 3>& p) { s[idx] = fn(k, p); });
  return {grid, std::move(s), std::move(label)};
}

inline SpectralMultiplier identity_symbol(const GridSpec& grid) {
  return {grid, std::vector<cplx>(grid.size(), cplx{1.0, 0.0}), "identity"};
}

/// sqrt(|k|^2 + m^2) - m, written as |k|^2 / (sqrt(|k|^2+m^2) + m) to avoid cancellation.
inline double kinetic_value(double k2, double m) {
  const double root = std::sqrt(k2 + m * m);
  return root + m > 0.0 ? k2 / (root + m) : 0.0;
}

inline SpectralMultiplier kinetic_symbol(const GridSpec& grid, double m) {
  require(std::isfinite(m) && m >= 0.0, "mass must satisfy m >= 0");
  return make_symbol(grid, "kinetic(m=" + std::to_string(m) + ")",
                     [m](const Vec3& k, const auto&) { return cplx{kinetic_value(dot(k, k), m), 0.0}; });
}

inline void require_subluminal(const Vec3& v) {
  require(std::isfinite(norm(v)) && norm(v) < 1.0, "speed must satisfy |v| < 1");
}

/// Wavevector with the Nyquist component zeroed on each axis; used by odd symbols.
inline Vec3 odd_wavevector(const GridSpec& grid, const Vec3& k, const std::array<int, 3>& p) {
  Vec3 out = k;
  for (int a = 0; a < 3; ++a)
    if (grid.is_nyquist(p[a])) out[a] = 0.0;
  return out;
}

/// Symbol of i (v . grad), which is -v.k.
inline SpectralMultiplier boost_symbol(const GridSpec& grid, const Vec3& v) {
  require_subluminal(v);
  return make_symbol(grid, "boost", [&](const Vec3& k, const std::array<int, 3>& p) {
    return cplx{-dot(v, odd_wavevector(grid, k, p)), 0.0};
  });
}

/// Bottom of the free boosted symbol, (sqrt(1-v^2) - 1) m.
inline double spectrum_bottom(double m, const Vec3& v) { return (std::sqrt(1.0 - dot(v, v)) - 1.0) * m; }

/// lambda > -Sigma_v with a round-off margin, so a shift equal to the bottom is rejected.
inline bool above_spectrum(double m, const Vec3& v, double lambda) {
  const double bottom = -spectrum_bottom(m, v);
  return lambda > bottom + 1e-12 * std::max(1.0, m);
}

/// Free boosted symbol f(k) = sqrt(k^2+m^2) - m - v.k.
inline SpectralMultiplier free_symbol(const GridSpec& grid, double m, const Vec3& v) {
  require(std::isfinite(m) && m >= 0.0, "mass must satisfy m >= 0");
  require_subluminal(v);
  return make_symbol(grid, "free", [&](const Vec3& k, const std::array<int, 3>& p) {
    return cplx{kinetic_value(dot(k, k), m) - dot(v, odd_wavevector(grid, k, p)), 0.0};
  });
}

/// Coulomb kernel 1/|x| truncated to the ball |x| < Rc:
/// 4 pi (1 - cos(|k| Rc)) / |k|^2, with 2 pi Rc^2 at k = 0.
inline SpectralMultiplier coulomb_symbol(const GridSpec& grid, double Rc) {
  require(std::isfinite(Rc) && Rc > 0.0 && Rc <= 0.5 * grid.L() * (1.0 + 1e-12),
          "truncation radius must satisfy 0 < Rc <= L/2");
  return make_symbol(grid, "coulomb(Rc=" + std::to_string(Rc) + ")", [Rc](const Vec3& k, const auto&) {
    const double kk = norm(k);
    if (kk == 0.0) return cplx{2.0 * std::numbers::pi * Rc * Rc, 0.0};
    const double s = std::sin(0.5 * kk * Rc);
    return cplx{8.0 * std::numbers::pi * s * s / (kk * kk), 0.0};
  });
}

inline SpectralMultiplier coulomb_symbol(const GridSpec& grid) { return coulomb_symbol(grid, 0.5 * grid.L()); }

/// Plain periodic Coulomb kernel 4 pi / |k|^2 with the zero mode removed.
/// Shifts the potential by a constant; not used for multiplier checks.
inline SpectralMultiplier coulomb_symbol_periodic(const GridSpec& grid) {
  return make_symbol(grid, "coulomb(periodic)", [](const Vec3& k, const auto&) {
    const double k2 = dot(k, k);
    return cplx{k2 == 0.0 ? 0.0 : 4.0 * std::numbers::pi / k2, 0.0};
  });
}

/// (H0 + lambda)^{-1} with H0 = sqrt(-Delta+m^2) - m + i v.grad.
inline SpectralMultiplier resolvent_symbol(const GridSpec& grid, double m, const Vec3& v, double lambda) {
  require(std::isfinite(lambda), "resolvent shift must be finite");
  require_subluminal(v);
  require(above_spectrum(m, v, lambda), "resolvent shift lies in the spectrum of H0 (need lambda > -Sigma_v)");
  auto f = free_symbol(grid, m, v);
  for (auto& s : f.symbol) s = 1.0 / (s + lambda);
  f.label = "resolvent(" + std::to_string(lambda) + ")";
  return f;
}

/// e^{-i t s(k)} for a real symbol s.
inline SpectralMultiplier propagator(const SpectralMultiplier& s, double t) {
  std::vector<cplx> out(s.symbol.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::polar(1.0, -t * s.symbol[i].real());
  return {s.grid, std::move(out), "exp(-i t " + s.label + ")"};
}

/// Pointwise product in Fourier space; the result is returned in the input's space.
inline Field apply(const SpectralMultiplier& mult, const Field& f) {
  require(mult.grid == f.grid(), "grid mismatch between multiplier and field");
  Field g = in_space(f, Space::fourier);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] *= mult.symbol[i];
  detail::ensure_finite(g, "apply");
  return in_space(std::move(g), f.space());
}

/// In-place variant for Fourier-space fields.
inline void apply_inplace(const SpectralMultiplier& mult, Field& fhat) {
  require(mult.grid == fhat.grid(), "grid mismatch between multiplier and field");
  require(fhat.space() == Space::fourier, "apply_inplace expects a Fourier-space field");
  for (std::size_t i = 0; i < fhat.size(); ++i) fhat[i] *= mult.symbol[i];
}

/// Real quadratic form <f, s f> for a real symbol, evaluated in Fourier space.
inline double quadratic_form(const SpectralMultiplier& mult, const Field& fhat) {
  require(fhat.space() == Space::fourier, "quadratic_form expects a Fourier-space field");
  double acc = 0.0;
  for (std::size_t i = 0; i < fhat.size(); ++i) acc += mult.symbol[i].real() * std::norm(fhat[i]);
  return acc * fhat.grid().fourier_weight();
}

}  // namespace bstar
