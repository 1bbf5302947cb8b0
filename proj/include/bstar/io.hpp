#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "bstar/analysis.hpp"
#include "bstar/dynamics.hpp"
#include "bstar/functionals.hpp"

namespace bstar {

using json = nlohmann::json;

inline constexpr char kSnapshotMagic[4] = {'B', 'S', 'F', '1'};
inline constexpr int kSnapshotVersion = 1;

/// Distinct failure kinds when reading a BSF1 file.
class SnapshotError : public ValidationError {
 public:
  enum class Kind { io, bad_magic, bad_header, version_mismatch, payload_length_mismatch, grid_mismatch, non_finite };
  SnapshotError(Kind k, const std::string& msg) : ValidationError(msg), kind_(k) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct SnapshotMeta {
  double m = 1.0;
  Vec3 v{};
  double N = 0.0;
  std::optional<double> mu;
  json metadata = json::object();
  int version = kSnapshotVersion;
};

struct FieldSnapshot {
  Field field;
  SnapshotMeta meta;
};

namespace detail {

inline void put_u32_le(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32_le(const unsigned char* b) {
  return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 | std::uint32_t(b[3]) << 24;
}

inline void f64_to_le(double d, unsigned char* out) {
  std::uint64_t u = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) out[i] = static_cast<unsigned char>(u >> (8 * i));
}

inline double f64_from_le(const unsigned char* in) {
  std::uint64_t u = 0;
  for (int i = 0; i < 8; ++i) u |= std::uint64_t(in[i]) << (8 * i);
  return std::bit_cast<double>(u);
}

}  // namespace detail

inline json snapshot_header(const Field& f, const SnapshotMeta& meta) {
  json h;
  h["format"] = "BSF1";
  h["version"] = meta.version;
  h["n"] = f.grid().n();
  h["L"] = f.grid().L();
  h["space"] = to_string(f.space());
  h["m"] = meta.m;
  h["v"] = {meta.v[0], meta.v[1], meta.v[2]};
  h["N"] = meta.N;
  h["mu"] = meta.mu ? json(*meta.mu) : json(nullptr);
  h["metadata"] = meta.metadata;
  return h;
}

/// Writes magic, u32 LE header length, JSON header, then n^3 (re, im) LE f64 pairs.
inline void save_field(const std::filesystem::path& path, const Field& f, const SnapshotMeta& meta) {
  require(f.all_finite(), "refusing to save a field with non-finite samples");
  const std::string header = snapshot_header(f, meta).dump();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw SnapshotError(SnapshotError::Kind::io, "cannot open " + path.string() + " for writing");
  os.write(kSnapshotMagic, 4);
  detail::put_u32_le(os, static_cast<std::uint32_t>(header.size()));
  os.write(header.data(), static_cast<std::streamsize>(header.size()));
  std::vector<unsigned char> buf(16 * f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    detail::f64_to_le(f[i].real(), &buf[16 * i]);
    detail::f64_to_le(f[i].imag(), &buf[16 * i + 8]);
  }
  os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!os) throw SnapshotError(SnapshotError::Kind::io, "write failed for " + path.string());
}

inline void save_field(const std::filesystem::path& path, const Field& f) {
  SnapshotMeta meta;
  meta.N = charge(f);
  save_field(path, f, meta);
}

inline FieldSnapshot load_field(const std::filesystem::path& path) {
  using K = SnapshotError::Kind;
  std::ifstream is(path, std::ios::binary);
  if (!is) throw SnapshotError(K::io, "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kSnapshotMagic, 4) != 0)
    throw SnapshotError(K::bad_magic, "bad magic: not a BSF1 snapshot");
  if (bytes.size() < 8) throw SnapshotError(K::bad_header, "truncated header length");
  const std::uint32_t hlen = detail::get_u32_le(&bytes[4]);
  if (bytes.size() < 8 + std::size_t(hlen)) throw SnapshotError(K::bad_header, "truncated header");

  json h;
  try {
    h = json::parse(bytes.begin() + 8, bytes.begin() + 8 + hlen);
  } catch (const json::exception& e) {
    throw SnapshotError(K::bad_header, std::string("malformed header: ") + e.what());
  }
  FieldSnapshot out{Field(GridSpec(8, 1.0))};
  try {
    out.meta.version = h.at("version").get<int>();
    if (out.meta.version != kSnapshotVersion)
      throw SnapshotError(K::version_mismatch, "version mismatch: file has " + std::to_string(out.meta.version) +
                                                   ", reader supports " + std::to_string(kSnapshotVersion));
    const GridSpec grid(h.at("n").get<int>(), h.at("L").get<double>());
    const std::string space = h.at("space").get<std::string>();
    if (space != "position" && space != "fourier") throw SnapshotError(K::bad_header, "unknown space flag " + space);
    out.meta.m = h.at("m").get<double>();
    const auto v = h.at("v").get<std::vector<double>>();
    if (v.size() != 3) throw SnapshotError(K::bad_header, "v must have three components");
    out.meta.v = {v[0], v[1], v[2]};
    out.meta.N = h.at("N").get<double>();
    if (!h.at("mu").is_null()) out.meta.mu = h.at("mu").get<double>();
    out.meta.metadata = h.value("metadata", json::object());

    const std::size_t payload = bytes.size() - 8 - hlen;
    if (payload != 16 * grid.size())
      throw SnapshotError(K::payload_length_mismatch, "payload length mismatch: expected " +
                                                          std::to_string(16 * grid.size()) + " bytes, found " +
                                                          std::to_string(payload));
    Field f(grid, space == "position" ? Space::position : Space::fourier);
    const unsigned char* p = bytes.data() + 8 + hlen;
    for (std::size_t i = 0; i < f.size(); ++i)
      f[i] = {detail::f64_from_le(p + 16 * i), detail::f64_from_le(p + 16 * i + 8)};
    if (!f.all_finite()) throw SnapshotError(K::non_finite, "snapshot holds non-finite samples");
    out.field = std::move(f);
  } catch (const json::exception& e) {
    throw SnapshotError(K::bad_header, std::string("malformed header: ") + e.what());
  } catch (const SnapshotError&) {
    throw;
  } catch (const ValidationError& e) {
    throw SnapshotError(K::bad_header, std::string("invalid header: ") + e.what());
  }
  return out;
}

/// Loads and checks the grid against the run's grid.
inline FieldSnapshot load_field(const std::filesystem::path& path, const GridSpec& expected) {
  auto snap = load_field(path);
  const GridSpec& g = snap.field.grid();
  if (!(g == expected))
    throw SnapshotError(SnapshotError::Kind::grid_mismatch,
                        "grid mismatch: snapshot has n=" + std::to_string(g.n()) + ", L=" + std::to_string(g.L()) +
                            " but the run uses n=" + std::to_string(expected.n()) +
                            ", L=" + std::to_string(expected.L()));
  return snap;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

inline json to_json(const Vec3& v) { return json::array({v[0], v[1], v[2]}); }

inline json to_json(const EnergyReport& r) {
  return {{"charge", r.charge},       {"kinetic", r.kinetic}, {"boost", r.boost},
          {"potential", r.potential}, {"energy", r.energy},   {"boosted_energy", r.boosted_energy},
          {"h_half_sq", r.h_half_sq}};
}

inline json to_json(const GroundStateResult& r) {
  return {{"mu", r.mu},
          {"energy", to_json(r.energy)},
          {"residual", r.residual},
          {"iterations", r.iterations},
          {"converged", r.converged},
          {"mu_identity", r.mu_identity},
          {"mu_consistency", r.mu_consistency},
          {"mu_bound_margin", r.mu_bound_margin},
          {"status", r.status}};
}

inline json to_json(const DecayFit& f) {
  return {{"r1", f.r1},
          {"r2", f.r2},
          {"rate", f.rate},
          {"prefactor", f.prefactor},
          {"delta_max", f.delta_max},
          {"envelope_c", f.envelope_c},
          {"fit_residual", f.fit_residual},
          {"shells", f.shells},
          {"envelope_ok", f.envelope_ok},
          {"pass", f.pass}};
}

inline json to_json(const GreenProbe& g) {
  return {{"m", g.m},
          {"v", to_json(g.v)},
          {"mu", g.mu},
          {"epsilon", g.epsilon},
          {"rate_forward", g.rate_forward},
          {"rate_backward", g.rate_backward},
          {"rate_transverse", g.rate_transverse},
          {"rate", g.rate},
          {"threshold", g.threshold},
          {"window", {g.r1, g.r2}},
          {"anisotropy", g.anisotropy},
          {"pass", g.pass}};
}

inline json to_json(const BestConstantResult& b) {
  return {{"v", to_json(b.v)},         {"S", b.S},
          {"Nc", b.Nc},                {"residual", b.residual},
          {"saturation", b.saturation}, {"iterations", b.iterations},
          {"converged", b.converged}};
}

inline json to_json(const EvolutionTrace& t) {
  json j{{"termination", to_string(t.termination)}, {"message", t.message}, {"steps", t.steps},
         {"records", t.records.size()}};
  if (!t.records.empty()) {
    const auto& a = t.records.front();
    const auto& b = t.records.back();
    j["t_final"] = b.t;
    j["charge_drift"] = std::abs(b.charge - a.charge) / a.charge;
    j["energy_drift"] = a.energy != 0.0 ? std::abs(b.energy - a.energy) / std::abs(a.energy) : std::abs(b.energy);
    j["h_half_growth"] = b.h_half_sq / a.h_half_sq;
    j["tail_fraction"] = b.tail_fraction;
    double sup = 0.0;
    bool any = false;
    for (const auto& r : t.records)
      if (std::isfinite(r.orbit_distance)) {
        sup = std::max(sup, r.orbit_distance);
        any = true;
      }
    if (any) j["sup_orbit_distance"] = sup;
  }
  return j;
}

inline json to_json(const EnergyCurve& c) {
  json samples = json::array();
  for (const auto& s : c.samples)
    samples.push_back({{"N", s.N}, {"energy", s.energy}, {"mu", s.mu}, {"residual", s.residual}});
  json sub = json::array();
  for (const auto& s : c.subadditivity)
    sub.push_back({{"N", s.N}, {"alpha", s.alpha}, {"whole", s.whole}, {"split", s.split}, {"pass", s.pass}});
  return {{"Nc", c.Nc},
          {"samples", samples},
          {"first_differences", c.first_differences},
          {"second_differences", c.second_differences},
          {"subadditivity", sub},
          {"decreasing", c.decreasing},
          {"concave", c.concave},
          {"subadditive", c.subadditive},
          {"truncated", c.truncated},
          {"diagnostic", c.diagnostic}};
}

inline void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << j.dump(2) << '\n';
}

/// Streams trace records as CSV rows, flushed per row.
class TraceCsvWriter {
 public:
  explicit TraceCsvWriter(const std::filesystem::path& path) : os_(path, std::ios::trunc) {
    if (!os_) throw std::runtime_error("cannot open " + path.string() + " for writing");
    os_.precision(17);
    os_ << "t,charge,energy,boosted_energy,h_half_sq,centroid_x,centroid_y,centroid_z,phase,orbit_distance,"
           "tail_fraction\n";
    os_.flush();
  }
  void write(const TraceRecord& r) {
    os_ << r.t << ',' << r.charge << ',' << r.energy << ',' << r.boosted_energy << ',' << r.h_half_sq << ','
        << r.centroid[0] << ',' << r.centroid[1] << ',' << r.centroid[2] << ',' << r.phase << ',';
    if (std::isfinite(r.orbit_distance)) os_ << r.orbit_distance;
    os_ << ',' << r.tail_fraction << '\n';
    os_.flush();
  }

 private:
  std::ofstream os_;
};

inline void write_trace_csv(const std::filesystem::path& path, const EvolutionTrace& trace) {
  TraceCsvWriter w(path);
  for (const auto& r : trace.records) w.write(r);
}

inline void write_curve_csv(const std::filesystem::path& path, const EnergyCurve& c) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os.precision(17);
  os << "N,energy,mu,residual,iterations\n";
  for (const auto& s : c.samples) os << s.N << ',' << s.energy << ',' << s.mu << ',' << s.residual << ',' << s.iterations << '\n';
}

inline void write_iterations_csv(const std::filesystem::path& path, const std::vector<IterationRecord>& it) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os.precision(17);
  os << "iteration,boosted_energy,residual,mu,step\n";
  for (const auto& r : it) os << r.iteration << ',' << r.boosted_energy << ',' << r.residual << ',' << r.mu << ',' << r.step << '\n';
}

}  // namespace bstar
