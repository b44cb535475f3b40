#pragma once

// 3x3 non-maximum suppression over response maps and the peak-ratio
// reliability verdict.

#include <cstddef>
#include <vector>

#include "abacf/spectral.hpp"

namespace abacf::nms {

struct Peak {
  double value = 0.0;
  int row = 0;
  int col = 0;
  friend bool operator==(const Peak&, const Peak&) = default;
};

struct NmsOptions {
  // Local peaks below this fraction of a positive global peak are dropped.
  // 0 keeps every local maximum.
  double prune_fraction = 0.05;
};

struct NmsPeaks {
  Peak global_peak;
  std::vector<Peak> local_peaks;  // row-major order, global peak excluded
  std::size_t comparisons_used = 0;

  std::size_t count() const noexcept { return local_peaks.size(); }
};

// Strict 3x3 local maxima (border cells compare against in-bounds neighbours
// only), found in scan order with skip marks so that no cell is compared
// twice against the same neighbour. The global peak is the largest strict
// maximum (first in row-major order on ties); on maps without any strict
// maximum it is the row-major argmax and the local list is empty.
// comparisons_used counts neighbour value comparisons. Maps smaller than
// 3x3 raise InputError.
NmsPeaks fast_nms_3x3(const spectral::RealGrid& map, const NmsOptions& options = {});

enum class Reliability { Reliable, Unreliable };

// Unreliable iff some local peak reaches threshold * global peak, or the
// global peak is not positive. threshold must lie in (0, 1].
Reliability assess_reliability(const NmsPeaks& peaks, double threshold);

}  // namespace abacf::nms
