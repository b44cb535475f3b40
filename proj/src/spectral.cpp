#include "abacf/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <string>
#include <tuple>

#include "abacf/errors.hpp"

namespace abacf::spectral {

namespace {

void check_dims(int height, int width) {
  if (height < 1 || width < 1) {
    throw ShapeError("grid dimensions must be positive, got " + std::to_string(height) + "x" +
                     std::to_string(width));
  }
}

void check_count(int height, int width, std::size_t count) {
  check_dims(height, width);
  if (static_cast<std::size_t>(height) * static_cast<std::size_t>(width) != count) {
    throw ShapeError("declared shape " + std::to_string(height) + "x" + std::to_string(width) +
                     " does not match " + std::to_string(count) + " values");
  }
}

// FFTW planning is not thread-safe; execution with the new-array interface is.
// Plans are created once per (height, width, direction) and never destroyed.
class PlanCache {
 public:
  fftw_plan get(int height, int width, Direction direction) {
    const auto key = std::make_tuple(height, width, direction == Direction::Forward);
    std::lock_guard<std::mutex> lock(mutex_);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    std::vector<Complex> scratch(static_cast<std::size_t>(height) * width);
    auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
    fftw_plan plan =
        fftw_plan_dft_2d(height, width, buf, buf,
                         direction == Direction::Forward ? FFTW_FORWARD : FFTW_BACKWARD,
                         FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (plan == nullptr) throw Error("fftw planning failed");
    plans_.emplace(key, plan);
    return plan;
  }

 private:
  std::mutex mutex_;
  std::map<std::tuple<int, int, bool>, fftw_plan> plans_;
};

PlanCache& plan_cache() {
  static PlanCache cache;
  return cache;
}

}  // namespace

RealGrid::RealGrid(int height, int width, double fill) : height_(height), width_(width) {
  check_dims(height, width);
  values_.assign(static_cast<std::size_t>(height) * width, fill);
}

RealGrid::RealGrid(int height, int width, std::vector<double> values)
    : height_(height), width_(width), values_(std::move(values)) {
  check_count(height, width, values_.size());
}

SpectralGrid::SpectralGrid(int height, int width, Complex fill) : height_(height), width_(width) {
  check_dims(height, width);
  values_.assign(static_cast<std::size_t>(height) * width, fill);
}

SpectralGrid::SpectralGrid(int height, int width, std::vector<Complex> values)
    : height_(height), width_(width), values_(std::move(values)) {
  check_count(height, width, values_.size());
}

void transform2d(std::span<const Complex> in, std::span<Complex> out, int height, int width,
                 Direction direction) {
  check_count(height, width, in.size());
  check_count(height, width, out.size());
  fftw_plan plan = plan_cache().get(height, width, direction);
  if (in.data() != out.data()) std::copy(in.begin(), in.end(), out.begin());
  auto* buf = reinterpret_cast<fftw_complex*>(out.data());
  fftw_execute_dft(plan, buf, buf);
  const double scale = 1.0 / std::sqrt(static_cast<double>(out.size()));
  for (auto& v : out) v *= scale;
}

SpectralGrid forward(const RealGrid& grid) {
  std::vector<Complex> buf(grid.values().begin(), grid.values().end());
  transform2d(buf, buf, grid.height(), grid.width(), Direction::Forward);
  return SpectralGrid(grid.height(), grid.width(), std::move(buf));
}

SpectralGrid forward(const SpectralGrid& grid) {
  SpectralGrid out(grid.height(), grid.width());
  transform2d(grid.values(), out.values(), grid.height(), grid.width(), Direction::Forward);
  return out;
}

SpectralGrid inverse(const SpectralGrid& grid) {
  SpectralGrid out(grid.height(), grid.width());
  transform2d(grid.values(), out.values(), grid.height(), grid.width(), Direction::Inverse);
  return out;
}

RealGrid inverse_real(const SpectralGrid& grid) {
  const SpectralGrid full = inverse(grid);
  RealGrid out(grid.height(), grid.width());
  auto src = full.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = src[i].real();
  return out;
}

RealGrid gaussian_label(int height, int width, double sigma, Cell center) {
  check_dims(height, width);
  if (!(sigma > 0.0)) throw ParameterError("gaussian_label: sigma must be positive");
  if (center.row < 0 || center.row >= height || center.col < 0 || center.col >= width) {
    throw ParameterError("gaussian_label: center outside grid");
  }
  RealGrid out(height, width);
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (int r = 0; r < height; ++r) {
    int dr = std::abs(r - center.row);
    dr = std::min(dr, height - dr);
    for (int c = 0; c < width; ++c) {
      int dc = std::abs(c - center.col);
      dc = std::min(dc, width - dc);
      out.at(r, c) = std::exp(-static_cast<double>(dr * dr + dc * dc) * inv);
    }
  }
  return out;
}

RealGrid gaussian_window(int height, int width, double sigma_fraction) {
  check_dims(height, width);
  if (!(sigma_fraction > 0.0)) throw ParameterError("gaussian_window: sigma_fraction must be positive");
  auto axis = [sigma_fraction](int n) {
    std::vector<double> w(static_cast<std::size_t>(n));
    const double sigma = sigma_fraction * n;
    const int mid = n / 2;
    for (int i = 0; i < n; ++i) {
      const double d = i - mid;
      w[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
    }
    return w;
  };
  const auto rows = axis(height);
  const auto cols = axis(width);
  RealGrid out(height, width);
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) out.at(r, c) = rows[r] * cols[c];
  return out;
}

Cell argmax(const RealGrid& grid) {
  auto v = grid.values();
  const auto it = std::max_element(v.begin(), v.end());  // first of equal maxima
  const auto idx = static_cast<int>(it - v.begin());
  return {idx / grid.width(), idx % grid.width()};
}

}  // namespace abacf::spectral
