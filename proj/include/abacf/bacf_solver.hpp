#pragma once

// Background-aware correlation filter training by ADMM in the frequency
// domain.
//
// Spectra handled here (x_hat, y_hat and the three filter-bank stacks) are
// unnormalised DFTs, i.e. sqrt(M) times the orthonormal transform of the
// spectral module, M being the number of cells in the context region. With
// that convention the per-frequency auxiliary update is the Sherman-Morrison
// solution of
//
//   (x x^H + M mu I) z = M (M conj(y) x - rho + mu w)
//
// and the filter update shrinks mu z + rho (both back in the spatial domain)
// by (mu + lambda / sqrt(M)) on the filter support, zero elsewhere. Both are
// exact block minimisers of one augmented Lagrangian, so each primal sweep
// cannot increase it.
//
// The filter support is the target-sized window centred on cell (0, 0) with
// wrap-around; a label peaking at cell p makes the response of the training
// patch peak at p.

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "abacf/features.hpp"
#include "abacf/spectral.hpp"

namespace abacf::solver {

using spectral::Complex;

struct SolverConfig {
  double lambda = 0.01;
  double mu0 = 1.0;
  double beta = 10.0;
  double mu_max = 1000.0;
  int iterations = 2;

  void validate() const;
};

struct Support {
  int rows = 0;
  int cols = 0;
};

// N channel planes of one spectral grid shape, channel-planar.
class SpectralStack {
 public:
  SpectralStack() = default;
  SpectralStack(int height, int width, int channels);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  std::size_t plane_size() const noexcept {
    return static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_);
  }

  std::span<Complex> plane(int ch) { return {values_.data() + ch * plane_size(), plane_size()}; }
  std::span<const Complex> plane(int ch) const {
    return {values_.data() + ch * plane_size(), plane_size()};
  }
  std::span<Complex> values() noexcept { return values_; }
  std::span<const Complex> values() const noexcept { return values_; }

  bool same_shape(const SpectralStack& o) const noexcept {
    return height_ == o.height_ && width_ == o.width_ && channels_ == o.channels_;
  }

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<Complex> values_;
};

struct FilterBank {
  SpectralStack w_hat;
  SpectralStack z_hat;
  SpectralStack rho_hat;
  double mu = 1.0;
  Support support;

  int height() const noexcept { return w_hat.height(); }
  int width() const noexcept { return w_hat.width(); }
  int channels() const noexcept { return w_hat.channels(); }
  int cells() const noexcept { return height() * width(); }  // M
};

struct ResponseMap {
  spectral::RealGrid grid;
  double peak_value = 0.0;
  spectral::Cell peak_location;  // first maximum in row-major order
};

struct DualState {
  SpectralStack rho_hat;
  double mu = 0.0;
};

// Unnormalised per-channel spectra.
SpectralStack spectrum(const features::FeatureTensor& features);
spectral::SpectralGrid spectrum(const spectral::RealGrid& grid);

// Spatial filter (support-cropped) for one channel.
spectral::RealGrid spatial_filter(const FilterBank& bank, int channel);

// Zero ADMM state; mu = mu0.
FilterBank init_model(const features::FeatureTensor& features, const spectral::RealGrid& label,
                      Support support, const SolverConfig& config);

SpectralStack solve_auxiliary(const FilterBank& bank, const SpectralStack& x_hat,
                              const spectral::SpectralGrid& y_hat);

SpectralStack solve_filter(const FilterBank& bank, const SolverConfig& config);

// rho += mu (z - w) with the current mu, then mu = min(mu_max, beta mu).
DualState admm_dual_update(const FilterBank& bank, const SolverConfig& config);

// Called after every full iteration with the 1-based iteration index.
using IterationObserver = std::function<void(int iteration, const FilterBank& bank)>;

// `features` must already be windowed. A warm start keeps its w_hat and
// z_hat; rho_hat restarts at zero and mu at mu0.
FilterBank train(const features::FeatureTensor& features, const spectral::RealGrid& label,
                 Support support, const SolverConfig& config,
                 const FilterBank* warm_start = nullptr, const IterationObserver& observer = {});

// Spatial cross-correlation of the filter with the features:
// inverse transform of sum_c conj(w_hat_c) x_hat_c.
ResponseMap compute_response(const FilterBank& bank, const features::FeatureTensor& features);

// ||z_hat - w_hat||_2 over all channels and bins.
double primal_residual(const FilterBank& bank);

}  // namespace abacf::solver
