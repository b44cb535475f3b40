#include "doctest.h"

#include <algorithm>
#include <random>

#include "abacf/errors.hpp"
#include "abacf/nms.hpp"
#include "support/maps.hpp"
#include "support/oracles.hpp"

using namespace abacf;
using namespace abacf::nms;
using spectral::Cell;
using spectral::RealGrid;

namespace {

std::vector<Cell> all_peaks(const NmsPeaks& p, bool any_maximum) {
  std::vector<Cell> out;
  if (any_maximum) out.push_back({p.global_peak.row, p.global_peak.col});
  for (const Peak& q : p.local_peaks) out.push_back({q.row, q.col});
  std::sort(out.begin(), out.end(), [](Cell a, Cell b) { return a.row != b.row ? a.row < b.row : a.col < b.col; });
  return out;
}

NmsPeaks unpruned(const RealGrid& g) { return fast_nms_3x3(g, NmsOptions{0.0}); }

}  // namespace

TEST_CASE("single bump has one peak and no locals") {
  const RealGrid g = fixtures::bumps(21, 21, {{10, 12, 1.0, 2.0}});
  const NmsPeaks p = fast_nms_3x3(g);
  CHECK(p.global_peak == Peak{1.0, 10, 12});
  CHECK(p.count() == 0);
  CHECK(assess_reliability(p, 0.7) == Reliability::Reliable);
}

TEST_CASE("constant map falls back to row-major argmax") {
  const RealGrid g(6, 7, 0.3);
  const NmsPeaks p = fast_nms_3x3(g);
  CHECK(p.global_peak == Peak{0.3, 0, 0});
  CHECK(p.count() == 0);
}

TEST_CASE("small maps rejected") {
  CHECK_THROWS_AS(fast_nms_3x3(RealGrid(2, 5)), InputError);
  CHECK_THROWS_AS(fast_nms_3x3(RealGrid(5, 2)), InputError);
  CHECK_NOTHROW(fast_nms_3x3(RealGrid(3, 3)));
}

TEST_CASE("border cells compare against in-bounds neighbours only") {
  RealGrid g(4, 4, 0.0);
  g.at(0, 0) = 5.0;
  g.at(3, 3) = 4.0;
  g.at(0, 3) = 3.0;
  const NmsPeaks p = unpruned(g);
  CHECK(p.global_peak == Peak{5.0, 0, 0});
  REQUIRE(p.count() == 2);
  CHECK(p.local_peaks[0] == Peak{3.0, 0, 3});
  CHECK(p.local_peaks[1] == Peak{4.0, 3, 3});
}

TEST_CASE("equal neighbours are not maxima; equal separated peaks pick the first") {
  RealGrid g(5, 7, 0.0);
  g.at(2, 1) = 1.0;
  g.at(2, 2) = 1.0;  // plateau pair: neither is strict
  g.at(1, 5) = 0.8;
  g.at(3, 5) = 0.8;  // separated by one row, not neighbours
  const NmsPeaks p = unpruned(g);
  CHECK(p.global_peak == Peak{0.8, 1, 5});
  REQUIRE(p.count() == 1);
  CHECK(p.local_peaks[0] == Peak{0.8, 3, 5});
}

TEST_CASE("matches brute force on random maps within the comparison budget") {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> dim(3, 40);
  for (int trial = 0; trial < 300; ++trial) {
    const int h = dim(rng), w = dim(rng);
    RealGrid g(h, w);
    const bool coarse = trial % 3 == 0;  // many ties
    for (double& v : g.values()) v = coarse ? std::floor(u(rng) * 4.0) : u(rng);
    const NmsPeaks p = unpruned(g);
    const auto ref = oracle::strict_maxima(g);
    CHECK(all_peaks(p, !ref.empty()) == ref);
    CHECK(p.comparisons_used <= 2 * g.size());
  }
}

TEST_CASE("structured maps stay within the comparison budget") {
  auto make = [](auto f) {
    RealGrid g(64, 64);
    for (int r = 0; r < 64; ++r)
      for (int c = 0; c < 64; ++c) g.at(r, c) = f(r, c);
    return g;
  };
  const std::vector<RealGrid> maps{
      make([](int r, int c) { return (c % 2) + r * 1e-3; }),
      make([](int r, int c) { return (c % 2) - r * 1e-3; }),
      make([](int r, int c) { return static_cast<double>((r + c) % 2); }),
      make([](int r, int c) { return static_cast<double>(r % 2 == 0 && c % 2 == 0); }),
      make([](int r, int c) { return static_cast<double>(r * 64 + c); }),
      make([](int r, int c) { return -static_cast<double>(r * 64 + c); }),
      make([](int r, int c) { return static_cast<double>((c + r) % 3 == 0) * (1 + r); }),
      make([](int r, int c) { return static_cast<double>((c - r + 300) % 3 == 0) * (1 + r); }),
  };
  for (const RealGrid& g : maps) {
    const NmsPeaks p = unpruned(g);
    const auto ref = oracle::strict_maxima(g);
    CHECK(all_peaks(p, !ref.empty()) == ref);
    CHECK(p.comparisons_used <= 2 * g.size());
  }
}

TEST_CASE("pruning drops only locals below the fraction of a positive global") {
  const RealGrid g = fixtures::bumps(30, 30, {{5, 5, 1.0, 1.0}, {20, 20, 0.049, 1.0}, {5, 20, 0.06, 1.0}});
  const NmsPeaks p = fast_nms_3x3(g);
  REQUIRE(p.count() == 1);
  CHECK(p.local_peaks[0].row == 5);
  CHECK(p.local_peaks[0].col == 20);
  CHECK(unpruned(g).count() == 2);
}

TEST_CASE("reliability verdicts at the boundary") {
  NmsPeaks p;
  p.global_peak = {1.0, 0, 0};
  p.local_peaks = {{0.69, 1, 1}, {0.3, 2, 2}};
  CHECK(assess_reliability(p, 0.7) == Reliability::Reliable);
  p.local_peaks = {{0.70, 1, 1}};
  CHECK(assess_reliability(p, 0.7) == Reliability::Unreliable);
  p.local_peaks = {{1.0, 1, 1}};
  CHECK(assess_reliability(p, 0.7) == Reliability::Unreliable);
  p.local_peaks.clear();
  CHECK(assess_reliability(p, 0.7) == Reliability::Reliable);
  p.global_peak.value = 0.0;
  CHECK(assess_reliability(p, 0.7) == Reliability::Unreliable);
  p.global_peak.value = -1.0;
  CHECK(assess_reliability(p, 0.7) == Reliability::Unreliable);
  CHECK_THROWS_AS(assess_reliability(p, 0.0), ParameterError);
  CHECK_THROWS_AS(assess_reliability(p, 1.5), ParameterError);
}

TEST_CASE("verdict invariant under positive scaling of the map") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const double ratio = u(rng);
    RealGrid g = fixtures::bumps(40, 40, {{10, 10, 1.0, 2.0}, {28, 30, ratio, 2.0}});
    const Reliability base = assess_reliability(fast_nms_3x3(g), 0.7);
    for (double s : {0.5, 3.0, 1e3}) {
      RealGrid scaled = g;
      for (double& v : scaled.values()) v *= s;
      CHECK(assess_reliability(fast_nms_3x3(scaled), 0.7) == base);
    }
  }
}
