#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace abacf::spectral {

using Complex = std::complex<double>;

struct Cell {
  int row = 0;
  int col = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

// Row-major real grid. Holds labels, windows and spatial response maps.
class RealGrid {
 public:
  RealGrid() = default;
  RealGrid(int height, int width, double fill = 0.0);
  RealGrid(int height, int width, std::vector<double> values);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t size() const noexcept { return values_.size(); }

  double& at(int row, int col) { return values_[index(row, col)]; }
  double at(int row, int col) const { return values_[index(row, col)]; }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

 private:
  std::size_t index(int row, int col) const noexcept {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(col);
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<double> values_;
};

// Row-major complex grid, one value per frequency bin.
class SpectralGrid {
 public:
  SpectralGrid() = default;
  SpectralGrid(int height, int width, Complex fill = {});
  SpectralGrid(int height, int width, std::vector<Complex> values);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t size() const noexcept { return values_.size(); }

  Complex& at(int row, int col) { return values_[index(row, col)]; }
  const Complex& at(int row, int col) const { return values_[index(row, col)]; }

  std::span<Complex> values() noexcept { return values_; }
  std::span<const Complex> values() const noexcept { return values_; }

 private:
  std::size_t index(int row, int col) const noexcept {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(col);
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<Complex> values_;
};

enum class Direction { Forward, Inverse };

// Orthonormal 2D DFT over one row-major plane: both directions scale by
// 1/sqrt(height*width), so inverse(forward(g)) == g and Parseval holds.
// `in` and `out` may alias. Thread-safe.
void transform2d(std::span<const Complex> in, std::span<Complex> out, int height, int width,
                 Direction direction);

SpectralGrid forward(const RealGrid& grid);
SpectralGrid forward(const SpectralGrid& grid);
SpectralGrid inverse(const SpectralGrid& grid);
// Inverse transform keeping the real part; use when the input is known to be
// conjugate-symmetric.
RealGrid inverse_real(const SpectralGrid& grid);

// Gaussian with peak 1.0 at `center`, using wrap-around distances so the grid
// is the circular shift of an origin-centred Gaussian.
RealGrid gaussian_label(int height, int width, double sigma, Cell center);

// Separable Gaussian taper peaking at 1.0 on cell (height/2, width/2), with
// per-axis sigma = sigma_fraction * axis length.
RealGrid gaussian_window(int height, int width, double sigma_fraction);

// First maximum in row-major order.
Cell argmax(const RealGrid& grid);

}  // namespace abacf::spectral
