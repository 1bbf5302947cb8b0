#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "bstar/grid.hpp"
#include "bstar/multiplier.hpp"

namespace bstar {

struct PhysicalParams {
  double m = 1.0;
  Vec3 v{0.0, 0.0, 0.0};

  void validate() const {
    require(std::isfinite(m) && m >= 0.0, "mass must satisfy m >= 0");
    require_subluminal(v);
  }
  double speed() const { return norm(v); }
  /// Sigma_v = (sqrt(1-v^2) - 1) m.
  double sigma() const { return spectrum_bottom(m, v); }
};

/// All quadratic and quartic forms of a field. Forms are integrals, not
/// halves: energy = T/2 - P/4 and boosted_energy = energy + B/2.
struct EnergyReport {
  double charge = 0.0;
  double kinetic = 0.0;    ///< <psi, (sqrt(-Delta+m^2) - m) psi>
  double boost = 0.0;      ///< i <psi, (v.grad) psi>
  double potential = 0.0;  ///< int (|x|^-1 * |psi|^2) |psi|^2
  double energy = 0.0;
  double boosted_energy = 0.0;
  double h_half_sq = 0.0;  ///< squared H^{1/2} norm
};

/// Symbols for one grid and one (m, v), built once and reused by the solvers.
class Model {
 public:
  Model(const GridSpec& grid, const PhysicalParams& p, std::optional<double> coulomb_radius = std::nullopt)
      : grid_(grid),
        params_((p.validate(), p)),
        kinetic_(kinetic_symbol(grid, p.m)),
        boost_(boost_symbol(grid, p.v)),
        h0_(kinetic_ + boost_),
        coulomb_(coulomb_symbol(grid, coulomb_radius.value_or(0.5 * grid.L()))),
        sobolev_(make_symbol(grid, "sobolev(1/2)", [](const Vec3& k, const auto&) {
          return cplx{std::sqrt(1.0 + dot(k, k)), 0.0};
        })) {
    h0_.label = "H0";
    build_padding();
  }

  const GridSpec& grid() const { return grid_; }
  const PhysicalParams& params() const { return params_; }
  const SpectralMultiplier& kinetic() const { return kinetic_; }
  const SpectralMultiplier& boost() const { return boost_; }
  const SpectralMultiplier& h0() const { return h0_; }
  const SpectralMultiplier& coulomb() const { return coulomb_; }
  const SpectralMultiplier& sobolev_weight() const { return sobolev_; }

  /// Potential of the exact density |psi|^2, kept on the modes |j| < n/2 of each axis.
  /// Products are formed on a 3n/2 grid so no mode aliases back into the band.
  struct Hartree {
    Field phi_hat;
    double potential = 0.0;  ///< int Phi |psi|^2
  };

  Hartree hartree(const Field& psi) const {
    Field khat = in_space(psi, Space::fourier);
    CVector u = pad(khat);
    for (auto& c : u) c = std::norm(c);
    Field rho = unpad(u, true);
    Field phi = rho;
    apply_inplace(coulomb_, phi);
    const double pot = inner(rho, phi).real();
    return {std::move(phi), pot};
  }

  /// Phi in position space.
  Field hartree_potential(const Field& psi) const {
    Field phi = to_position(hartree(psi).phi_hat);
    for (auto& c : phi.values()) c = {c.real(), 0.0};
    return phi;
  }

  /// Fourier transform of Phi psi projected onto the grid band.
  Field hartree_product(const Field& phi_hat, const Field& psi) const {
    CVector a = pad(phi_hat);
    CVector b = pad(in_space(psi, Space::fourier));
    for (std::size_t i = 0; i < a.size(); ++i) b[i] *= a[i].real();
    return unpad(b, false);
  }

  EnergyReport report(const Field& psi_hat, const Hartree& h) const {
    EnergyReport r;
    r.charge = l2_norm_sq(psi_hat);
    r.kinetic = quadratic_form(kinetic_, psi_hat);
    r.boost = quadratic_form(boost_, psi_hat);
    r.h_half_sq = quadratic_form(sobolev_, psi_hat);
    r.potential = h.potential;
    r.energy = 0.5 * r.kinetic - 0.25 * r.potential;
    r.boosted_energy = r.energy + 0.5 * r.boost;
    return r;
  }

  EnergyReport report(const Field& psi) const {
    Field k = in_space(psi, Space::fourier);
    return report(k, hartree(k));
  }

  /// First variation of E_v with delta E_v = Re <grad, delta psi>:
  /// grad = H0 psi - Phi psi. Returned in the input's space.
  Field gradient(const Field& psi) const {
    Field g = in_space(psi, Space::fourier);
    Field nl = hartree_product(hartree(g).phi_hat, g);
    apply_inplace(h0_, g);
    g -= nl;
    return in_space(std::move(g), psi.space());
  }

 private:
  /// Band coefficients to values on the 3n/2 grid.
  CVector pad(const Field& khat) const {
    CVector u(std::size_t(m_) * m_ * m_, cplx{0.0, 0.0});
    const double c = grid_.fourier_weight() / std::pow(2.0 * std::numbers::pi, 1.5);
    for (std::size_t i = 0; i < khat.size(); ++i) u[fine_[i]] = khat[i] * (c * sign_[i]);
    auto* buf = reinterpret_cast<fftw_complex*>(u.data());
    fftw_execute_dft(detail::FftPlans::get(m_).backward, buf, buf);
    return u;
  }

  /// Values on the 3n/2 grid back to band coefficients; density drops the Nyquist planes.
  Field unpad(CVector& u, bool density) const {
    auto* buf = reinterpret_cast<fftw_complex*>(u.data());
    fftw_execute_dft(detail::FftPlans::get(m_).forward, buf, buf);
    const double c = std::pow(grid_.L() / m_, 3) / std::pow(2.0 * std::numbers::pi, 1.5);
    Field out(grid_, Space::fourier);
    for (std::size_t i = 0; i < out.size(); ++i)
      if (!density || !nyquist_[i]) out[i] = u[fine_[i]] * (c * sign_[i]);
    return out;
  }

  void build_padding() {
    const int n = grid_.n();
    m_ = 3 * n / 2;
    std::vector<int> q(n);
    std::vector<int> parity(n);
    for (int p = 0; p < n; ++p) {
      const int j = grid_.signed_mode(p);
      q[p] = j < 0 ? j + m_ : j;
      parity[p] = j & 1;
    }
    fine_.resize(grid_.size());
    sign_.resize(grid_.size());
    nyquist_.resize(grid_.size());
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c) {
          const std::size_t i = grid_.index(a, b, c);
          fine_[i] = (std::size_t(q[a]) * m_ + q[b]) * m_ + q[c];
          sign_[i] = ((parity[a] + parity[b] + parity[c]) & 1) ? -1.0 : 1.0;
          nyquist_[i] = grid_.is_nyquist(a) || grid_.is_nyquist(b) || grid_.is_nyquist(c);
        }
  }

  GridSpec grid_;
  PhysicalParams params_;
  SpectralMultiplier kinetic_;
  SpectralMultiplier boost_;
  SpectralMultiplier h0_;
  SpectralMultiplier coulomb_;
  SpectralMultiplier sobolev_;
  int m_ = 0;
  std::vector<std::size_t> fine_;
  std::vector<double> sign_;
  std::vector<char> nyquist_;
};

inline double charge(const Field& psi) { return l2_norm_sq(psi); }

inline Field hartree_potential(const Field& psi) {
  return Model(psi.grid(), PhysicalParams{0.0, {}}).hartree_potential(in_space(psi, Space::position));
}

inline EnergyReport boosted_energy(const Field& psi, const PhysicalParams& p) { return Model(psi.grid(), p).report(psi); }

/// sqrt(1-v^2)/(4m) int |grad psi|^2 - P/4.
inline double nonrelativistic_energy(const Field& psi, const PhysicalParams& p) {
  p.validate();
  require(p.m > 0.0, "nonrelativistic energy requires m > 0");
  Model model(psi.grid(), p);
  Field k = in_space(psi, Space::fourier);
  double grad2 = 0.0;
  for_each_mode(psi.grid(), [&](std::size_t idx, const Vec3& kv, const auto&) { grad2 += dot(kv, kv) * std::norm(k[idx]); });
  grad2 *= psi.grid().fourier_weight();
  const double pot = model.hartree(k).potential;
  return std::sqrt(1.0 - dot(p.v, p.v)) / (4.0 * p.m) * grad2 - 0.25 * pot;
}

/// Squared H^{1/2} norm: int |psi^(k)|^2 (1+|k|^2)^{1/2} dk.
inline double sobolev_half_norm_sq(const Field& psi) {
  Field k = in_space(psi, Space::fourier);
  double acc = 0.0;
  for_each_mode(psi.grid(), [&](std::size_t idx, const Vec3& kv, const auto&) {
    acc += std::sqrt(1.0 + dot(kv, kv)) * std::norm(k[idx]);
  });
  return acc * psi.grid().fourier_weight();
}

inline double sobolev_half_norm(const Field& psi) { return std::sqrt(sobolev_half_norm_sq(psi)); }

/// <psi, sqrt(-Delta) psi>.
inline double massless_kinetic(const Field& psi) {
  Field k = in_space(psi, Space::fourier);
  double acc = 0.0;
  for_each_mode(psi.grid(), [&](std::size_t idx, const Vec3& kv, const auto&) { acc += norm(kv) * std::norm(k[idx]); });
  return acc * psi.grid().fourier_weight();
}

struct GaussianBound {
  double width = 0.0;
  double value = 0.0;
};

/// Minimizes the nonrelativistic energy over centred real Gaussians
/// e^{-|x|^2 / (2 w^2)} of charge N by golden-section search in log w.
inline GaussianBound gaussian_nonrelativistic_bound(const GridSpec& grid, const PhysicalParams& p, double N, double w_lo,
                                                    double w_hi, double tol = 1e-6) {
  require(0.0 < w_lo && w_lo < w_hi, "width bracket must satisfy 0 < lo < hi");
  require(N > 0.0, "target charge N must be positive");
  auto value = [&](double logw) {
    const double w = std::exp(logw);
    Field f = sample(grid, [w](const Vec3& x) { return cplx{std::exp(-dot(x, x) / (2.0 * w * w)), 0.0}; });
    f *= std::sqrt(N / charge(f));
    return nonrelativistic_energy(f, p);
  };
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = std::log(w_lo), b = std::log(w_hi);
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = value(c), fd = value(d);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = value(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = value(d);
    }
  }
  const double x = 0.5 * (a + b);
  return {std::exp(x), value(x)};
}

inline Field gradient_Ev(const Field& psi, const PhysicalParams& p) { return Model(psi.grid(), p).gradient(psi); }

}  // namespace bstar
