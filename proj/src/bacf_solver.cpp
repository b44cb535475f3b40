#include "abacf/bacf_solver.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "abacf/errors.hpp"

namespace abacf::solver {

namespace {

using spectral::Direction;
using spectral::transform2d;

void require_same(const SpectralStack& a, const SpectralStack& b, const char* what) {
  if (!a.same_shape(b)) throw ShapeError(std::string(what) + ": spectral stack shapes differ");
}

// Rows/cols of the support window centred on index 0 with wrap-around.
std::vector<char> support_mask(int n, int extent) {
  std::vector<char> mask(static_cast<std::size_t>(n), 0);
  const int half = extent / 2;
  for (int i = 0; i < n; ++i) mask[i] = ((i + half) % n) < extent;
  return mask;
}

void check_support(Support support, int height, int width) {
  if (support.rows < 1 || support.cols < 1 || support.rows > height || support.cols > width) {
    throw ShapeError("filter support " + std::to_string(support.rows) + "x" +
                     std::to_string(support.cols) + " does not fit the " + std::to_string(height) +
                     "x" + std::to_string(width) + " context grid");
  }
}

}  // namespace

void SolverConfig::validate() const {
  if (!(lambda >= 0.0)) throw ParameterError("solver: lambda must be >= 0");
  if (!(mu0 > 0.0)) throw ParameterError("solver: mu0 must be > 0");
  if (!(beta > 1.0)) throw ParameterError("solver: beta must be > 1");
  if (!(mu_max >= mu0)) throw ParameterError("solver: mu_max must be >= mu0");
  if (iterations < 1) throw ParameterError("solver: iterations must be >= 1");
}

SpectralStack::SpectralStack(int height, int width, int channels)
    : height_(height), width_(width), channels_(channels) {
  if (height < 1 || width < 1 || channels < 1) throw ShapeError("spectral stack dimensions must be positive");
  values_.assign(plane_size() * static_cast<std::size_t>(channels), Complex{});
}

SpectralStack spectrum(const features::FeatureTensor& features) {
  SpectralStack out(features.height(), features.width(), features.channels());
  const double root_m = std::sqrt(static_cast<double>(out.plane_size()));
  for (int ch = 0; ch < features.channels(); ++ch) {
    auto src = features.plane(ch);
    auto dst = out.plane(ch);
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = src[i];
    transform2d(dst, dst, out.height(), out.width(), Direction::Forward);
    for (auto& v : dst) v *= root_m;
  }
  return out;
}

spectral::SpectralGrid spectrum(const spectral::RealGrid& grid) {
  spectral::SpectralGrid out = spectral::forward(grid);
  const double root_m = std::sqrt(static_cast<double>(out.size()));
  for (auto& v : out.values()) v *= root_m;
  return out;
}

spectral::RealGrid spatial_filter(const FilterBank& bank, int channel) {
  std::vector<Complex> buf(bank.w_hat.plane(channel).begin(), bank.w_hat.plane(channel).end());
  transform2d(buf, buf, bank.height(), bank.width(), Direction::Inverse);
  const double inv_root_m = 1.0 / std::sqrt(static_cast<double>(bank.cells()));
  spectral::RealGrid out(bank.height(), bank.width());
  auto dst = out.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = buf[i].real() * inv_root_m;
  return out;
}

FilterBank init_model(const features::FeatureTensor& features, const spectral::RealGrid& label,
                      Support support, const SolverConfig& config) {
  config.validate();
  if (features.height() != label.height() || features.width() != label.width()) {
    throw ShapeError("init_model: feature grid and label shapes differ");
  }
  check_support(support, features.height(), features.width());
  FilterBank bank;
  bank.w_hat = SpectralStack(features.height(), features.width(), features.channels());
  bank.z_hat = bank.w_hat;
  bank.rho_hat = bank.w_hat;
  bank.mu = config.mu0;
  bank.support = support;
  return bank;
}

SpectralStack solve_auxiliary(const FilterBank& bank, const SpectralStack& x_hat,
                              const spectral::SpectralGrid& y_hat) {
  require_same(bank.w_hat, x_hat, "solve_auxiliary");
  if (y_hat.height() != x_hat.height() || y_hat.width() != x_hat.width()) {
    throw ShapeError("solve_auxiliary: label spectrum shape differs from features");
  }
  if (!(bank.mu > 0.0)) throw ParameterError("solve_auxiliary: mu must be positive");

  const int channels = x_hat.channels();
  const std::size_t bins = x_hat.plane_size();
  const double m = static_cast<double>(bank.cells());
  const double mu = bank.mu;
  auto y = y_hat.values();
  SpectralStack z(x_hat.height(), x_hat.width(), channels);

  for (std::size_t t = 0; t < bins; ++t) {
    // Per-bin scalars x^H x, x^H w, x^H rho.
    double s_x = 0.0;
    Complex s_w{}, s_rho{};
    for (int c = 0; c < channels; ++c) {
      const Complex xc = x_hat.plane(c)[t];
      s_x += std::norm(xc);
      s_w += std::conj(xc) * bank.w_hat.plane(c)[t];
      s_rho += std::conj(xc) * bank.rho_hat.plane(c)[t];
    }
    const Complex my = m * std::conj(y[t]);
    const Complex scalar = (my * s_x - s_rho + mu * s_w) / (mu * (s_x + m * mu));
    for (int c = 0; c < channels; ++c) {
      const Complex xc = x_hat.plane(c)[t];
      const Complex rhs = my * xc - bank.rho_hat.plane(c)[t] + mu * bank.w_hat.plane(c)[t];
      z.plane(c)[t] = rhs / mu - xc * scalar;
    }
  }
  return z;
}

SpectralStack solve_filter(const FilterBank& bank, const SolverConfig& config) {
  if (!(bank.mu > 0.0)) throw ParameterError("solve_filter: mu must be positive");
  require_same(bank.z_hat, bank.rho_hat, "solve_filter");
  const int h = bank.z_hat.height();
  const int w = bank.z_hat.width();
  check_support(bank.support, h, w);
  const double root_m = std::sqrt(static_cast<double>(h) * w);
  const double shrink = 1.0 / (bank.mu + config.lambda / root_m);
  const auto rows = support_mask(h, bank.support.rows);
  const auto cols = support_mask(w, bank.support.cols);

  SpectralStack out(h, w, bank.z_hat.channels());
  std::vector<Complex> zs(out.plane_size()), rs(out.plane_size());
  for (int ch = 0; ch < out.channels(); ++ch) {
    transform2d(bank.z_hat.plane(ch), zs, h, w, Direction::Inverse);
    transform2d(bank.rho_hat.plane(ch), rs, h, w, Direction::Inverse);
    auto dst = out.plane(ch);
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        const std::size_t i = static_cast<std::size_t>(r) * w + c;
        if (rows[r] && cols[c]) {
          // Spatial values are the orthonormal inverses divided by sqrt(M).
          const double z_s = zs[i].real() / root_m;
          const double rho_s = rs[i].real() / root_m;
          dst[i] = shrink * (bank.mu * z_s + rho_s);
        } else {
          dst[i] = 0.0;
        }
      }
    }
    transform2d(dst, dst, h, w, Direction::Forward);
    for (auto& v : dst) v *= root_m;
  }
  return out;
}

DualState admm_dual_update(const FilterBank& bank, const SolverConfig& config) {
  require_same(bank.z_hat, bank.w_hat, "admm_dual_update");
  require_same(bank.z_hat, bank.rho_hat, "admm_dual_update");
  DualState out{bank.rho_hat, std::min(config.mu_max, config.beta * bank.mu)};
  auto rho = out.rho_hat.values();
  auto z = bank.z_hat.values();
  auto w = bank.w_hat.values();
  for (std::size_t i = 0; i < rho.size(); ++i) rho[i] += bank.mu * (z[i] - w[i]);
  return out;
}

FilterBank train(const features::FeatureTensor& features, const spectral::RealGrid& label,
                 Support support, const SolverConfig& config, const FilterBank* warm_start,
                 const IterationObserver& observer) {
  FilterBank bank = init_model(features, label, support, config);
  if (warm_start != nullptr) {
    if (!warm_start->w_hat.same_shape(bank.w_hat) || !warm_start->z_hat.same_shape(bank.w_hat)) {
      throw ShapeError("train: warm-start bank does not match the feature shape");
    }
    bank.w_hat = warm_start->w_hat;
    bank.z_hat = warm_start->z_hat;
  }
  const SpectralStack x_hat = spectrum(features);
  const spectral::SpectralGrid y_hat = spectrum(label);
  for (int it = 1; it <= config.iterations; ++it) {
    bank.z_hat = solve_auxiliary(bank, x_hat, y_hat);
    bank.w_hat = solve_filter(bank, config);
    DualState dual = admm_dual_update(bank, config);
    bank.rho_hat = std::move(dual.rho_hat);
    bank.mu = dual.mu;
    if (observer) observer(it, bank);
  }
  return bank;
}

ResponseMap compute_response(const FilterBank& bank, const features::FeatureTensor& features) {
  if (features.height() != bank.height() || features.width() != bank.width() ||
      features.channels() != bank.channels()) {
    throw ShapeError("compute_response: features do not match the filter bank");
  }
  const SpectralStack x_hat = spectrum(features);
  const std::size_t bins = x_hat.plane_size();
  std::vector<Complex> acc(bins, Complex{});
  for (int c = 0; c < bank.channels(); ++c) {
    auto w = bank.w_hat.plane(c);
    auto x = x_hat.plane(c);
    for (std::size_t t = 0; t < bins; ++t) acc[t] += std::conj(w[t]) * x[t];
  }
  transform2d(acc, acc, bank.height(), bank.width(), Direction::Inverse);
  const double inv_root_m = 1.0 / std::sqrt(static_cast<double>(bins));
  ResponseMap out;
  out.grid = spectral::RealGrid(bank.height(), bank.width());
  auto g = out.grid.values();
  for (std::size_t i = 0; i < bins; ++i) g[i] = acc[i].real() * inv_root_m;
  out.peak_location = spectral::argmax(out.grid);
  out.peak_value = out.grid.at(out.peak_location.row, out.peak_location.col);
  return out;
}

double primal_residual(const FilterBank& bank) {
  double sum = 0.0;
  auto z = bank.z_hat.values();
  auto w = bank.w_hat.values();
  for (std::size_t i = 0; i < z.size(); ++i) sum += std::norm(z[i] - w[i]);
  return std::sqrt(sum);
}

}  // namespace abacf::solver
