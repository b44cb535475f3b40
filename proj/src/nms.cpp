#include "abacf/nms.hpp"

#include <array>
#include <cstdint>
#include <limits>
#include <string>

#include "abacf/errors.hpp"

namespace abacf::nms {

namespace {

// Cells are grouped into 2x2 blocks. All cells of a block are mutual
// neighbours, so a block holds at most one strict maximum: its strict block
// maximum (three comparisons). That candidate is then tested against its
// remaining in-bounds neighbours, grouped by the block they fall in. When the
// neighbouring block's maximum is among them, one comparison against it
// settles the whole group; outcomes between block maxima are remembered so
// no pair is compared twice and beaten blocks are skipped.
class Scanner {
 public:
  explicit Scanner(const spectral::RealGrid& map)
      : map_(map),
        h_(map.height()),
        w_(map.width()),
        bh_((h_ + 1) / 2),
        bw_((w_ + 1) / 2),
        block_max_(static_cast<std::size_t>(bh_) * bw_),
        dead_(block_max_.size(), 0),
        beats_(block_max_.size(), 0) {}

  std::vector<spectral::Cell> run() {
    for (int br = 0; br < bh_; ++br)
      for (int bc = 0; bc < bw_; ++bc) find_block_max(br, bc);

    std::vector<spectral::Cell> maxima;
    for (int br = 0; br < bh_; ++br) {
      for (int bc = 0; bc < bw_; ++bc) {
        if (dead_[block(br, bc)]) continue;
        if (check_neighbours(br, bc)) maxima.push_back(block_max_[block(br, bc)]);
      }
    }
    return maxima;
  }

  std::size_t comparisons() const noexcept { return comparisons_; }

 private:
  std::size_t block(int br, int bc) const { return static_cast<std::size_t>(br) * bw_ + bc; }
  double v(spectral::Cell c) const { return map_.at(c.row, c.col); }

  // Bit index of the neighbouring block at offset (dr, dc), both in {-1,0,1}.
  static int direction(int dr, int dc) { return (dr + 1) * 3 + (dc + 1); }

  int compare(double a, double b) {
    ++comparisons_;
    return a < b ? -1 : (a > b ? 1 : 0);
  }

  void find_block_max(int br, int bc) {
    spectral::Cell best{2 * br, 2 * bc};
    bool tied = false;
    for (int k = 1; k < 4; ++k) {
      const spectral::Cell cell{2 * br + k / 2, 2 * bc + k % 2};
      if (cell.row >= h_ || cell.col >= w_) continue;
      const int order = compare(v(cell), v(best));
      if (order > 0) {
        best = cell;
        tied = false;
      } else if (order == 0) {
        tied = true;
      }
    }
    block_max_[block(br, bc)] = best;
    dead_[block(br, bc)] = tied ? 1 : 0;
  }

  bool check_neighbours(int br, int bc) {
    const std::size_t self = block(br, bc);
    const spectral::Cell m = block_max_[self];
    const double value = v(m);

    // Outside neighbours grouped by block offset, in scan order.
    std::array<std::array<spectral::Cell, 2>, 9> groups{};
    std::array<int, 9> sizes{};
    for (int dr = -1; dr <= 1; ++dr) {
      for (int dc = -1; dc <= 1; ++dc) {
        const spectral::Cell q{m.row + dr, m.col + dc};
        if (q.row < 0 || q.col < 0 || q.row >= h_ || q.col >= w_) continue;
        const int obr = q.row / 2 - br;
        const int obc = q.col / 2 - bc;
        if (obr == 0 && obc == 0) continue;
        const int d = direction(obr, obc);
        groups[d][sizes[d]++] = q;
      }
    }

    for (int d = 0; d < 9; ++d) {
      if (sizes[d] == 0) continue;
      if (beats_[self] & (1u << d)) continue;
      const int obr = d / 3 - 1;
      const int obc = d % 3 - 1;
      const std::size_t other = block(br + obr, bc + obc);
      const spectral::Cell other_max = block_max_[other];
      bool has_max = false;
      for (int i = 0; i < sizes[d]; ++i) has_max |= groups[d][i] == other_max;

      if (has_max) {
        const int order = compare(value, v(other_max));
        if (order > 0) {
          dead_[other] = 1;
          continue;
        }
        if (order < 0) beats_[other] |= static_cast<std::uint16_t>(1u << direction(-obr, -obc));
        else dead_[other] = 1;
        return false;
      }
      for (int i = 0; i < sizes[d]; ++i) {
        if (compare(value, v(groups[d][i])) <= 0) return false;
      }
    }
    return true;
  }

  const spectral::RealGrid& map_;
  int h_;
  int w_;
  int bh_;
  int bw_;
  std::vector<spectral::Cell> block_max_;
  std::vector<std::uint8_t> dead_;
  std::vector<std::uint16_t> beats_;  // bit d: block max strictly above the block at offset d
  std::size_t comparisons_ = 0;
};

}  // namespace

NmsPeaks fast_nms_3x3(const spectral::RealGrid& map, const NmsOptions& options) {
  if (map.height() < 3 || map.width() < 3) {
    throw InputError("fast_nms_3x3: map must be at least 3x3, got " + std::to_string(map.height()) +
                     "x" + std::to_string(map.width()));
  }
  if (!(options.prune_fraction >= 0.0)) throw ParameterError("fast_nms_3x3: prune_fraction must be >= 0");

  Scanner scanner(map);
  const std::vector<spectral::Cell> maxima = scanner.run();

  NmsPeaks out;
  out.comparisons_used = scanner.comparisons();
  if (maxima.empty()) {
    const spectral::Cell top = spectral::argmax(map);
    out.global_peak = {map.at(top.row, top.col), top.row, top.col};
    return out;
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i < maxima.size(); ++i) {
    const auto [r, c] = maxima[i];
    const auto [br, bc] = maxima[best];
    if (map.at(r, c) > map.at(br, bc)) best = i;
  }
  out.global_peak = {map.at(maxima[best].row, maxima[best].col), maxima[best].row, maxima[best].col};
  const double floor = out.global_peak.value > 0.0 ? options.prune_fraction * out.global_peak.value
                                                   : -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < maxima.size(); ++i) {
    if (i == best) continue;
    const double value = map.at(maxima[i].row, maxima[i].col);
    if (value < floor) continue;
    out.local_peaks.push_back({value, maxima[i].row, maxima[i].col});
  }
  return out;
}

Reliability assess_reliability(const NmsPeaks& peaks, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw ParameterError("assess_reliability: threshold must lie in (0, 1]");
  }
  const double global = peaks.global_peak.value;
  if (!(global > 0.0)) return Reliability::Unreliable;
  for (const Peak& p : peaks.local_peaks) {
    if (p.value >= threshold * global) return Reliability::Unreliable;
  }
  return Reliability::Reliable;
}

}  // namespace abacf::nms
