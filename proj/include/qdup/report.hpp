#pragma once

// JSON / CSV serialization of results, and the config hash stamped on every
// output.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>

#include <json.hpp>

#include "qdup/g2.hpp"
#include "qdup/lifetime.hpp"
#include "qdup/spectrum.hpp"
#include "qdup/tcspc.hpp"

namespace qdup {

using Json = nlohmann::json;

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// FNV-1a of the canonical (sorted-key, compact) dump, as 16 hex digits.
inline std::string config_hash(const Json& config) {
  const std::uint64_t h = fnv1a64(config.dump());
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 0; i < 16; ++i) out[static_cast<std::size_t>(15 - i)] = kHex[(h >> (4 * i)) & 0xf];
  return out;
}

// Shortest round-trip decimal form.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

// Non-finite numbers become null in JSON.
inline Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json to_json(const HistogramConfig& c) {
  return {{"bin_width_ps", c.bin_width},
          {"range_start_ps", c.range_start},
          {"range_end_ps", c.range_end},
          {"mode", to_string(c.mode)}};
}

inline Json to_json(const G2Result& r) {
  Json peaks = Json::array();
  for (const auto& p : r.peaks) {
    peaks.push_back({{"index", p.index}, {"raw", p.raw}, {"area", p.area}, {"bins", p.bins}});
  }
  return {{"g2_zero", number(r.g2_zero)},
          {"err", number(r.err)},
          {"raw_suppression", number(r.raw_suppression)},
          {"raw_err", number(r.raw_err)},
          {"background_per_bin", number(r.background_per_bin)},
          {"background_bins", r.background_bins},
          {"far_peaks", r.far_peaks},
          {"negative_clamped", r.negative_clamped},
          {"peak_areas", std::move(peaks)}};
}

inline Json to_json(const FitResult& f) {
  return {{"tau_ns", number(f.tau_ns)},
          {"ci95_low_ns", number(f.ci95_low)},
          {"ci95_high_ns", number(f.ci95_high)},
          {"amplitude", number(f.amplitude)},
          {"offset", number(f.offset)},
          {"residual_norm", number(f.residual_norm)},
          {"chi2_reduced", number(f.chi2_reduced)},
          {"iterations", f.iterations},
          {"window_start_ps", f.window_start},
          {"window_end_ps", f.window_end}};
}

inline Json to_json(const ResponseMetrics& m) {
  return {{"peak_position_nm", number(m.peak_position)},
          {"peak_value", number(m.peak_value)},
          {"fwhm_nm", number(m.fwhm)},
          {"sidelobe_left", number(m.sidelobe_left)},
          {"sidelobe_right", number(m.sidelobe_right)},
          {"sidelobe", number(m.sidelobe)}};
}

inline std::string histogram_csv(const CorrelationHistogram& h) {
  std::string out = "bin_left_edge_ps,counts\n";
  for (std::size_t i = 0; i < h.size(); ++i) {
    out += std::to_string(h.config().bin_left(i));
    out += ',';
    out += std::to_string(h[i]);
    out += '\n';
  }
  return out;
}

inline Json histogram_sidecar(const CorrelationHistogram& h, const std::string& hash) {
  return {{"config", to_json(h.config())},
          {"bins", h.size()},
          {"total", h.total()},
          {"n_starts", h.n_starts()},
          {"n_stops", h.n_stops()},
          {"duration_ps", h.duration()},
          {"config_hash", hash}};
}

inline std::string value_histogram_csv(const ValueHistogram& h) {
  std::string out = "bin_left_edge_ps,value,variance\n";
  for (std::size_t i = 0; i < h.values.size(); ++i) {
    out += std::to_string(h.config.bin_left(i)) + ',' + format_number(h.values[i]) + ',' +
           format_number(h.variances[i]) + '\n';
  }
  return out;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw std::runtime_error("write to " + path.string() + " failed");
}

inline void write_json(const std::filesystem::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

// <stem>.csv plus <stem>.json sidecar.
inline void write_histogram(const std::filesystem::path& dir, const std::string& stem, const CorrelationHistogram& h,
                            const std::string& hash) {
  write_text(dir / (stem + ".csv"), histogram_csv(h));
  write_json(dir / (stem + ".json"), histogram_sidecar(h, hash));
}

}  // namespace qdup
