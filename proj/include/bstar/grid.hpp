#pragma once

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <mutex>
#include <new>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "bstar/error.hpp"

namespace bstar {

using cplx = std::complex<double>;
using Vec3 = std::array<double, 3>;

inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

/// Periodic cubic box [-L/2, L/2)^3 sampled with n points per axis.
///
/// Node i sits at x_i = (i - n/2) dx, so the origin is the node i = n/2.
/// Fourier node p carries the signed index j = p (p < n/2) or p - n, and
/// wavenumber k_j = 2 pi j / L with j in [-n/2, n/2).
class GridSpec {
 public:
  GridSpec(int n, double L) : n_(n), L_(L) {
    require(n >= 8 && (n & (n - 1)) == 0, "grid size n must be a power of two and >= 8, got " + std::to_string(n));
    require(std::isfinite(L) && L > 0.0, "box length L must be positive");
  }

  int n() const { return n_; }
  double L() const { return L_; }
  double dx() const { return L_ / n_; }
  double dk() const { return 2.0 * std::numbers::pi / L_; }
  /// Largest representable wavenumber per axis (Nyquist magnitude).
  double k_max() const { return std::numbers::pi / dx(); }
  std::size_t size() const { return std::size_t(n_) * n_ * n_; }
  double cell_volume() const { return dx() * dx() * dx(); }
  double fourier_weight() const { return dk() * dk() * dk(); }

  std::size_t index(int i, int j, int l) const { return (std::size_t(i) * n_ + j) * n_ + l; }
  double x(int i) const { return (i - n_ / 2) * dx(); }
  int signed_mode(int p) const { return p < n_ / 2 ? p : p - n_; }
  bool is_nyquist(int p) const { return p == n_ / 2; }
  double k(int p) const { return signed_mode(p) * dk(); }

  bool operator==(const GridSpec& o) const { return n_ == o.n_ && L_ == o.L_; }

 private:
  int n_;
  double L_;
};

/// Allocator returning FFTW-aligned storage so every buffer shares the
/// alignment of the planning scratch.
template <class T>
struct FftwAllocator {
  using value_type = T;
  FftwAllocator() = default;
  template <class U>
  FftwAllocator(const FftwAllocator<U>&) {}
  T* allocate(std::size_t count) {
    void* p = fftw_malloc(count * sizeof(T));
    if (!p) throw std::bad_alloc();
    return static_cast<T*>(p);
  }
  void deallocate(T* p, std::size_t) { fftw_free(p); }
  template <class U>
  bool operator==(const FftwAllocator<U>&) const { return true; }
};

using CVector = std::vector<cplx, FftwAllocator<cplx>>;

enum class Space { position, fourier };

inline const char* to_string(Space s) { return s == Space::position ? "position" : "fourier"; }

/// Complex field sampled on a GridSpec, row-major with z fastest.
class Field {
 public:
  explicit Field(const GridSpec& grid, Space space = Space::position)
      : grid_(grid), data_(grid.size(), cplx{0.0, 0.0}), space_(space) {}

  Field(const GridSpec& grid, CVector values, Space space) : grid_(grid), data_(std::move(values)), space_(space) {
    require(data_.size() == grid_.size(), "field length does not match grid");
    require(all_finite(), "field contains non-finite values");
  }

  const GridSpec& grid() const { return grid_; }
  Space space() const { return space_; }
  std::size_t size() const { return data_.size(); }

  std::span<cplx> values() { return data_; }
  std::span<const cplx> values() const { return data_; }
  cplx* data() { return data_.data(); }
  const cplx* data() const { return data_.data(); }
  cplx& operator[](std::size_t i) { return data_[i]; }
  const cplx& operator[](std::size_t i) const { return data_[i]; }

  /// Relabels the storage without touching values; used by the transforms.
  void set_space(Space s) { space_ = s; }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](const cplx& c) { return std::isfinite(c.real()) && std::isfinite(c.imag()); });
  }

  Field& operator*=(cplx s) {
    for (auto& c : data_) c *= s;
    return *this;
  }
  Field& operator+=(const Field& o) {
    check_compatible(o);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  Field& operator-=(const Field& o) {
    check_compatible(o);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  /// this += a * o
  Field& axpy(cplx a, const Field& o) {
    check_compatible(o);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += a * o.data_[i];
    return *this;
  }

  void check_compatible(const Field& o) const {
    require(grid_ == o.grid_, "grid mismatch between fields");
    require(space_ == o.space_, "space mismatch between fields");
  }

 private:
  GridSpec grid_;
  CVector data_;
  Space space_;
};

inline Field operator+(Field a, const Field& b) { return a += b; }
inline Field operator-(Field a, const Field& b) { return a -= b; }
inline Field operator*(cplx s, Field a) { return a *= s; }

namespace detail {

/// Plans are shared process-wide; only the planner needs the lock; execution
/// with the new-array interface is thread safe.
class FftPlans {
 public:
  struct Pair {
    fftw_plan forward;
    fftw_plan backward;
  };

  static const Pair& get(int n) {
    static FftPlans instance;
    std::lock_guard<std::mutex> lock(instance.mutex_);
    auto it = instance.plans_.find(n);
    if (it != instance.plans_.end()) return it->second;
    CVector scratch(std::size_t(n) * n * n);
    auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
    Pair p{fftw_plan_dft_3d(n, n, n, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE),
           fftw_plan_dft_3d(n, n, n, buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE)};
    return instance.plans_.emplace(n, p).first->second;
  }

 private:
  FftPlans() = default;
  ~FftPlans() {
    for (auto& [n, p] : plans_) {
      fftw_destroy_plan(p.forward);
      fftw_destroy_plan(p.backward);
    }
  }
  std::mutex mutex_;
  std::map<int, Pair> plans_;
};

/// Multiplies by (-1)^(p1+p2+p3) and a scale; this moves the transform origin
/// to the box centre.
inline void checkerboard_scale(Field& f, double scale) {
  const int n = f.grid().n();
  cplx* d = f.data();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double s0 = ((i + j) & 1) ? -scale : scale;
      cplx* row = d + f.grid().index(i, j, 0);
      for (int l = 0; l < n; ++l) row[l] *= (l & 1) ? -s0 : s0;
    }
}

inline void ensure_finite(const Field& f, const char* where) {
  if (!f.all_finite()) throw NumericalError(std::string("non-finite values in field passed to ") + where);
}

}  // namespace detail

/// Forward transform with continuum normalization
/// f^(k) = dx^3 (2 pi)^{-3/2} sum_x f(x) e^{-i k.x},
/// so that sum |f|^2 dx^3 = sum |f^|^2 dk^3 (discrete Parseval).
inline Field to_fourier(Field f) {
  require(f.space() == Space::position, "to_fourier expects a position-space field");
  detail::ensure_finite(f, "to_fourier");
  const auto& plans = detail::FftPlans::get(f.grid().n());
  auto* buf = reinterpret_cast<fftw_complex*>(f.data());
  fftw_execute_dft(plans.forward, buf, buf);
  detail::checkerboard_scale(f, f.grid().cell_volume() / std::pow(2.0 * std::numbers::pi, 1.5));
  f.set_space(Space::fourier);
  return f;
}

inline Field to_position(Field f) {
  require(f.space() == Space::fourier, "to_position expects a Fourier-space field");
  detail::ensure_finite(f, "to_position");
  detail::checkerboard_scale(f, f.grid().fourier_weight() / std::pow(2.0 * std::numbers::pi, 1.5));
  const auto& plans = detail::FftPlans::get(f.grid().n());
  auto* buf = reinterpret_cast<fftw_complex*>(f.data());
  fftw_execute_dft(plans.backward, buf, buf);
  f.set_space(Space::position);
  return f;
}

inline Field in_space(Field f, Space s) {
  if (f.space() == s) return f;
  return s == Space::fourier ? to_fourier(std::move(f)) : to_position(std::move(f));
}

/// <f, g> = int conj(f) g, evaluated with the measure of the fields' space.
inline cplx inner(const Field& f, const Field& g) {
  f.check_compatible(g);
  cplx acc{0.0, 0.0};
  for (std::size_t i = 0; i < f.size(); ++i) acc += std::conj(f[i]) * g[i];
  const double w = f.space() == Space::position ? f.grid().cell_volume() : f.grid().fourier_weight();
  return acc * w;
}

inline double l2_norm_sq(const Field& f) {
  double acc = 0.0;
  for (const auto& c : f.values()) acc += std::norm(c);
  return acc * (f.space() == Space::position ? f.grid().cell_volume() : f.grid().fourier_weight());
}

inline double l2_norm(const Field& f) { return std::sqrt(l2_norm_sq(f)); }

inline double max_abs(const Field& f) {
  double m = 0.0;
  for (const auto& c : f.values()) m = std::max(m, std::abs(c));
  return m;
}

/// Fills a position-space field from a function of the node coordinates.
template <class Fn>
Field sample(const GridSpec& grid, Fn&& fn) {
  Field f(grid, Space::position);
  const int n = grid.n();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int l = 0; l < n; ++l) f[grid.index(i, j, l)] = fn(Vec3{grid.x(i), grid.x(j), grid.x(l)});
  require(f.all_finite(), "sampled function produced non-finite values");
  return f;
}

/// Visits every Fourier node with its wavevector.
template <class Fn>
void for_each_mode(const GridSpec& grid, Fn&& fn) {
  const int n = grid.n();
  for (int i = 0; i < n; ++i) {
    const double kx = grid.k(i);
    for (int j = 0; j < n; ++j) {
      const double ky = grid.k(j);
      for (int l = 0; l < n; ++l) fn(grid.index(i, j, l), Vec3{kx, ky, grid.k(l)}, std::array<int, 3>{i, j, l});
    }
  }
}

/// Density-weighted centroid using a periodic (circular) mean per axis.
inline Vec3 centroid(const Field& psi) {
  require(psi.space() == Space::position, "centroid expects a position-space field");
  const auto& g = psi.grid();
  const int n = g.n();
  std::array<cplx, 3> acc{};
  std::vector<cplx> phase(n);
  for (int i = 0; i < n; ++i) phase[i] = std::polar(1.0, g.dk() * g.x(i));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int l = 0; l < n; ++l) {
        const double rho = std::norm(psi[g.index(i, j, l)]);
        acc[0] += rho * phase[i];
        acc[1] += rho * phase[j];
        acc[2] += rho * phase[l];
      }
  Vec3 c{};
  for (int a = 0; a < 3; ++a) c[a] = std::abs(acc[a]) > 0.0 ? std::arg(acc[a]) / g.dk() : 0.0;
  return c;
}

/// Returns psi(x - a) for an arbitrary (sub-lattice) shift via the Fourier phase e^{-i k.a}.
inline Field shifted(const Field& psi, const Vec3& a) {
  Field f = in_space(psi, Space::fourier);
  for_each_mode(f.grid(), [&](std::size_t idx, const Vec3& k, const std::array<int, 3>&) {
    f[idx] *= std::polar(1.0, -dot(k, a));
  });
  return in_space(std::move(f), psi.space());
}

/// Cyclic shift by whole lattice steps: result(x) = psi(x - s dx).
inline Field lattice_shifted(const Field& psi, const std::array<int, 3>& s) {
  require(psi.space() == Space::position, "lattice_shifted expects a position-space field");
  const auto& g = psi.grid();
  const int n = g.n();
  Field out(g, Space::position);
  auto wrap = [n](int v) { return ((v % n) + n) % n; };
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int l = 0; l < n; ++l)
        out[g.index(wrap(i + s[0]), wrap(j + s[1]), wrap(l + s[2]))] = psi[g.index(i, j, l)];
  return out;
}

}  // namespace bstar
