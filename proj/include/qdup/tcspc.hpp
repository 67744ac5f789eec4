#pragma once

// Streaming start-stop / coincidence histogramming over sorted timestamp
// streams.
//
// All routines are single pass: a lower pointer into the stop stream moves
// monotonically with the start times, so the cost is
// O(|starts| + |stops| + matches).

#include <algorithm>
#include <cstdint>
#include <future>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "qdup/core.hpp"

namespace qdup {

enum class HistogramMode : std::uint8_t { kFirstStop, kAllPairs };

inline const char* to_string(HistogramMode m) { return m == HistogramMode::kFirstStop ? "first_stop" : "all_pairs"; }

struct HistogramConfig {
  TimePs bin_width = 256;
  TimePs range_start = 0;
  TimePs range_end = 100 * kPsPerNs;
  HistogramMode mode = HistogramMode::kAllPairs;

  void validate() const {
    if (bin_width <= 0) throw PreconditionError("histogram bin_width must be positive");
    if (range_end <= range_start) throw PreconditionError("histogram range_end must exceed range_start");
  }

  std::size_t bins() const {
    return static_cast<std::size_t>((range_end - range_start + bin_width - 1) / bin_width);
  }

  TimePs bin_left(std::size_t i) const { return range_start + static_cast<TimePs>(i) * bin_width; }
  double bin_center(std::size_t i) const {
    return static_cast<double>(bin_left(i)) + 0.5 * static_cast<double>(bin_width);
  }

  bool in_range(TimePs dt) const { return dt >= range_start && dt < range_end; }
  std::size_t bin_of(TimePs dt) const { return static_cast<std::size_t>((dt - range_start) / bin_width); }

  friend bool operator==(const HistogramConfig&, const HistogramConfig&) = default;
};

// Finalized start-stop histogram. Counts cannot change after construction.
class CorrelationHistogram {
 public:
  explicit CorrelationHistogram(HistogramConfig config) : config_(checked(config)), counts_(config.bins(), 0) {}

  CorrelationHistogram(HistogramConfig config, std::vector<std::uint64_t> counts, std::uint64_t n_starts,
                       std::uint64_t n_stops, TimePs duration)
      : config_(checked(config)), counts_(std::move(counts)), n_starts_(n_starts), n_stops_(n_stops), duration_(duration) {
    if (counts_.size() != config_.bins()) throw PreconditionError("histogram counts do not match bin count");
  }

  const HistogramConfig& config() const noexcept { return config_; }
  std::span<const std::uint64_t> counts() const noexcept { return counts_; }
  std::uint64_t n_starts() const noexcept { return n_starts_; }
  std::uint64_t n_stops() const noexcept { return n_stops_; }
  TimePs duration() const noexcept { return duration_; }
  std::size_t size() const noexcept { return counts_.size(); }
  std::uint64_t operator[](std::size_t i) const { return counts_[i]; }

  std::uint64_t total() const {
    std::uint64_t s = 0;
    for (auto c : counts_) s += c;
    return s;
  }

  friend bool operator==(const CorrelationHistogram&, const CorrelationHistogram&) = default;

 private:
  static HistogramConfig checked(const HistogramConfig& c) {
    c.validate();
    return c;
  }

  HistogramConfig config_;
  std::vector<std::uint64_t> counts_;
  std::uint64_t n_starts_ = 0;
  std::uint64_t n_stops_ = 0;
  TimePs duration_ = 0;
};

namespace detail {

inline void require_sorted(std::span<const TimePs> s, const char* what) {
  if (!std::is_sorted(s.begin(), s.end())) throw PreconditionError(std::string(what) + ": timestamps are not sorted");
}

// Correlates `starts` against the full sorted `stops` into `counts`.
inline void correlate_into(std::span<const TimePs> starts, std::span<const TimePs> stops, const HistogramConfig& cfg,
                           std::vector<std::uint64_t>& counts) {
  if (starts.empty() || stops.empty()) return;
  // First stop that can pair with the first start.
  auto lo = static_cast<std::size_t>(
      std::lower_bound(stops.begin(), stops.end(), starts.front() + cfg.range_start) - stops.begin());
  const std::size_t n = stops.size();
  for (const TimePs s : starts) {
    const TimePs lo_t = s + cfg.range_start;
    const TimePs hi_t = s + cfg.range_end;
    while (lo < n && stops[lo] < lo_t) ++lo;
    if (cfg.mode == HistogramMode::kFirstStop) {
      if (lo < n && stops[lo] < hi_t) ++counts[cfg.bin_of(stops[lo] - s)];
      continue;
    }
    for (std::size_t j = lo; j < n && stops[j] < hi_t; ++j) ++counts[cfg.bin_of(stops[j] - s)];
  }
}

}  // namespace detail

// Start-stop histogram. FIRST_STOP counts, per start, only the earliest stop
// with delay in [range_start, range_end); ALL_PAIRS counts every such pair.
inline CorrelationHistogram start_stop_histogram(const TimeStream& starts, const TimeStream& stops,
                                                 const HistogramConfig& cfg) {
  cfg.validate();
  detail::require_sorted(starts.span(), "start stream");
  detail::require_sorted(stops.span(), "stop stream");
  std::vector<std::uint64_t> counts(cfg.bins(), 0);
  detail::correlate_into(starts.span(), stops.span(), cfg, counts);
  return CorrelationHistogram(cfg, std::move(counts), starts.size(), stops.size(),
                              std::max(starts.duration, stops.duration));
}

// HBT coincidences: arm A clicks start, arm B clicks stop. A symmetric range
// such as [-100 ns, +100 ns) stands in for the hardware delay offset.
inline CorrelationHistogram coincidence_histogram(const TimeStream& a, const TimeStream& b, const HistogramConfig& cfg) {
  return start_stop_histogram(a, b, cfg);
}

inline CorrelationHistogram merge(const CorrelationHistogram& h1, const CorrelationHistogram& h2) {
  if (!(h1.config() == h2.config())) throw PreconditionError("cannot merge histograms with different configs");
  std::vector<std::uint64_t> counts(h1.counts().begin(), h1.counts().end());
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += h2[i];
  return CorrelationHistogram(h1.config(), std::move(counts), h1.n_starts() + h2.n_starts(),
                              h1.n_stops() + h2.n_stops(), h1.duration() + h2.duration());
}

// Histogram of one block of starts. Overlap-carry rule: the block sees every
// stop in [first start + range_start, last start + range_end), so pairs that
// straddle a block boundary are counted exactly once, by the block owning the
// start. Stop totals and duration are carried by block 0 only.
inline CorrelationHistogram correlate_block(std::span<const TimePs> starts, std::span<const TimePs> stops,
                                            const HistogramConfig& cfg, bool owns_totals, TimePs duration) {
  std::vector<std::uint64_t> counts(cfg.bins(), 0);
  if (!starts.empty()) {
    const auto first = std::lower_bound(stops.begin(), stops.end(), starts.front() + cfg.range_start);
    const auto last = std::lower_bound(first, stops.end(), starts.back() + cfg.range_end);
    detail::correlate_into(starts, std::span<const TimePs>(first, last), cfg, counts);
  }
  return CorrelationHistogram(cfg, std::move(counts), starts.size(), owns_totals ? stops.size() : 0,
                              owns_totals ? duration : 0);
}

// Parallel start-stop histogram over fixed-size start blocks. The result is
// identical to start_stop_histogram for every block size and thread count.
inline CorrelationHistogram start_stop_histogram_blocked(const TimeStream& starts, const TimeStream& stops,
                                                         const HistogramConfig& cfg, std::size_t block_size,
                                                         unsigned threads = 1) {
  cfg.validate();
  detail::require_sorted(starts.span(), "start stream");
  detail::require_sorted(stops.span(), "stop stream");
  if (block_size == 0) throw PreconditionError("block_size must be positive");
  const TimePs duration = std::max(starts.duration, stops.duration);
  const std::size_t n_blocks = std::max<std::size_t>(1, (starts.size() + block_size - 1) / block_size);
  threads = std::max(1U, threads);

  std::vector<CorrelationHistogram> partial(threads, CorrelationHistogram(cfg));
  auto worker = [&](unsigned w) {
    CorrelationHistogram acc(cfg);
    for (std::size_t b = w; b < n_blocks; b += threads) {
      const std::size_t lo = b * block_size;
      const std::size_t hi = std::min(starts.size(), lo + block_size);
      const auto block = starts.span().subspan(lo, hi - lo);
      acc = merge(acc, correlate_block(block, stops.span(), cfg, b == 0, duration));
    }
    partial[w] = std::move(acc);
  };
  if (threads == 1) {
    worker(0);
  } else {
    std::vector<std::future<void>> jobs;
    for (unsigned w = 0; w < threads; ++w) jobs.push_back(std::async(std::launch::async, worker, w));
    for (auto& j : jobs) j.get();
  }
  CorrelationHistogram out = partial[0];
  for (unsigned w = 1; w < threads; ++w) out = merge(out, partial[w]);
  return out;
}

// Start-stop histogram against an implicit periodic start clock (laser sync
// at phase + k * period, k >= 0, inside [0, duration]). Equivalent to
// start_stop_histogram with the sync ticks materialized, without storing
// them.
inline CorrelationHistogram sync_histogram(const TimeStream& stops, TimePs period, TimePs phase,
                                           const HistogramConfig& cfg) {
  cfg.validate();
  if (period <= 0) throw PreconditionError("sync period must be positive");
  detail::require_sorted(stops.span(), "stop stream");
  const TimePs duration = stops.duration;
  auto floor_div = [](TimePs a, TimePs b) { return a >= 0 ? a / b : -((-a + b - 1) / b); };
  // Ticks inside [0, duration].
  const TimePs k_min = phase >= 0 ? 0 : floor_div(-phase + period - 1, period);
  const TimePs k_max = floor_div(duration - phase, period);
  const std::uint64_t n_starts = k_max >= k_min ? static_cast<std::uint64_t>(k_max - k_min + 1) : 0;

  std::vector<std::uint64_t> counts(cfg.bins(), 0);
  std::set<TimePs> taken;  // FIRST_STOP: ticks that already have their stop
  for (const TimePs t : stops.times) {
    // Ticks with range_start <= t - tick < range_end.
    const TimePs lo_k = std::max(k_min, floor_div(t - phase - cfg.range_end, period) + 1);
    const TimePs hi_k = std::min(k_max, floor_div(t - phase - cfg.range_start, period));
    if (cfg.mode == HistogramMode::kFirstStop) taken.erase(taken.begin(), taken.lower_bound(lo_k));
    for (TimePs k = lo_k; k <= hi_k; ++k) {
      if (cfg.mode == HistogramMode::kFirstStop && !taken.insert(k).second) continue;
      ++counts[cfg.bin_of(t - (phase + k * period))];
    }
  }
  return CorrelationHistogram(cfg, std::move(counts), n_starts, stops.size(), duration);
}

}  // namespace qdup
