#include "doctest.h"

#include <random>

#include "abacf/bacf_solver.hpp"
#include "abacf/errors.hpp"
#include "support/oracles.hpp"

using namespace abacf;
using solver::Complex;
using solver::FilterBank;
using solver::SolverConfig;
using solver::SpectralStack;
using solver::Support;

namespace {

spectral::RealGrid centred_label(int h, int w, double sigma) {
  return spectral::gaussian_label(h, w, sigma, {h / 2, w / 2});
}

void fill_random(SpectralStack& s, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  for (auto& v : s.values()) v = Complex(n(rng), n(rng));
}

FilterBank random_bank(int h, int w, int channels, double mu, std::mt19937_64& rng) {
  FilterBank bank;
  bank.w_hat = SpectralStack(h, w, channels);
  bank.z_hat = SpectralStack(h, w, channels);
  bank.rho_hat = SpectralStack(h, w, channels);
  fill_random(bank.w_hat, rng);
  fill_random(bank.rho_hat, rng);
  bank.mu = mu;
  bank.support = {h, w};
  return bank;
}

}  // namespace

TEST_CASE("config validation") {
  SolverConfig c;
  CHECK_NOTHROW(c.validate());
  c.iterations = 0;
  CHECK_THROWS_AS(c.validate(), ParameterError);
  c = {};
  c.beta = 1.0;
  CHECK_THROWS_AS(c.validate(), ParameterError);
  c = {};
  c.mu_max = 0.5;
  CHECK_THROWS_AS(c.validate(), ParameterError);
  c = {};
  c.lambda = -1e-3;
  CHECK_THROWS_AS(c.validate(), ParameterError);
}

TEST_CASE("init_model zeroes state and records support") {
  auto x = fixtures::textured_features(16, 12, 3, 1);
  auto y = centred_label(16, 12, 1.5);
  SolverConfig cfg;
  cfg.mu0 = 2.5;
  FilterBank bank = solver::init_model(x, y, {4, 5}, cfg);
  CHECK(bank.mu == 2.5);
  CHECK(bank.support.rows == 4);
  CHECK(bank.support.cols == 5);
  CHECK(bank.channels() == 3);
  for (auto v : bank.w_hat.values()) CHECK(v == Complex{});
  for (auto v : bank.z_hat.values()) CHECK(v == Complex{});
  for (auto v : bank.rho_hat.values()) CHECK(v == Complex{});
  CHECK_THROWS_AS(solver::init_model(x, y, {17, 2}, cfg), ShapeError);
  CHECK_THROWS_AS(solver::init_model(x, centred_label(16, 11, 1.0), {4, 4}, cfg), ShapeError);
}

TEST_CASE("auxiliary solve: vanishing data bin keeps w - rho/mu") {
  FilterBank bank;
  bank.w_hat = SpectralStack(2, 2, 2);
  bank.z_hat = bank.w_hat;
  bank.rho_hat = bank.w_hat;
  bank.mu = 4.0;
  bank.support = {1, 1};
  bank.w_hat.plane(0)[1] = {1.0, 2.0};
  bank.w_hat.plane(1)[1] = {-3.0, 0.5};
  bank.rho_hat.plane(0)[1] = {2.0, -4.0};
  bank.rho_hat.plane(1)[1] = {1.0, 1.0};
  SpectralStack x(2, 2, 2);
  x.plane(0)[0] = 1.0;  // data only in bin 0
  spectral::SpectralGrid y(2, 2, Complex{1.0, 0.0});
  SpectralStack z = solver::solve_auxiliary(bank, x, y);
  for (int c = 0; c < 2; ++c) {
    const Complex expect = bank.w_hat.plane(c)[1] - bank.rho_hat.plane(c)[1] / 4.0;
    CHECK(std::abs(z.plane(c)[1] - expect) < 1e-15);
  }
}

TEST_CASE("auxiliary solve: scalar closed form") {
  FilterBank bank;
  bank.w_hat = SpectralStack(1, 1, 1);
  bank.z_hat = bank.w_hat;
  bank.rho_hat = bank.w_hat;
  bank.mu = 1.0;
  bank.support = {1, 1};
  SpectralStack x(1, 1, 1);
  x.plane(0)[0] = 1.0;
  spectral::SpectralGrid y(1, 1, Complex{1.0, 0.0});
  CHECK(std::abs(solver::solve_auxiliary(bank, x, y).plane(0)[0] - Complex(0.5, 0.0)) < 1e-15);
}

TEST_CASE("auxiliary solve matches dense per-bin solves") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> dim(1, 16);
  std::uniform_int_distribution<int> chans(1, 4);
  std::uniform_real_distribution<double> mu_dist(0.1, 10.0);
  double worst = 0.0;
  int bins_checked = 0;
  for (int inst = 0; inst < 100; ++inst) {
    const int h = dim(rng), w = dim(rng), n = chans(rng);
    FilterBank bank = random_bank(h, w, n, mu_dist(rng), rng);
    SpectralStack x(h, w, n);
    fill_random(x, rng);
    spectral::SpectralGrid y(h, w);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (auto& v : y.values()) v = Complex(nd(rng), nd(rng));
    const SpectralStack z = solver::solve_auxiliary(bank, x, y);
    for (std::size_t t = 0; t < x.plane_size(); ++t) {
      Eigen::VectorXcd xv(n), wv(n), rv(n), zv(n);
      for (int c = 0; c < n; ++c) {
        xv[c] = x.plane(c)[t];
        wv[c] = bank.w_hat.plane(c)[t];
        rv[c] = bank.rho_hat.plane(c)[t];
        zv[c] = z.plane(c)[t];
      }
      const Eigen::VectorXcd ref = oracle::dense_bin_solve(xv, y.values()[t], wv, rv, bank.mu, h * w);
      worst = std::max(worst, (zv - ref).norm() / std::max(ref.norm(), 1e-300));
      ++bins_checked;
    }
  }
  CHECK(bins_checked >= 100);
  CHECK(worst <= 1e-8);
}

TEST_CASE("filter solve: support cropping and scalar shrinkage") {
  const int h = 8, w = 8;
  SolverConfig cfg;
  std::mt19937_64 rng(5);
  FilterBank bank = random_bank(h, w, 2, 3.0, rng);
  bank.support = {3, 4};
  fill_random(bank.z_hat, rng);
  cfg.lambda = 0.01;
  const SpectralStack w_hat = solver::solve_filter(bank, cfg);
  FilterBank probe = bank;
  probe.w_hat = w_hat;
  const auto got = oracle::spatial_filters(probe);

  // Support rows are {-1, 0, 1} mod 8, columns {-2, -1, 0, 1} mod 8.
  auto in_support = [](int r, int c) {
    const bool rr = r == 7 || r == 0 || r == 1;
    const bool cc = c == 6 || c == 7 || c == 0 || c == 1;
    return rr && cc;
  };
  const double m = h * w;
  for (int ch = 0; ch < 2; ++ch) {
    auto zp = bank.z_hat.plane(ch);
    auto rp = bank.rho_hat.plane(ch);
    const auto zs = oracle::dft2(std::vector<Complex>(zp.begin(), zp.end()), h, w, true);
    const auto rs = oracle::dft2(std::vector<Complex>(rp.begin(), rp.end()), h, w, true);
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        const int i = r * w + c;
        const double expect =
            in_support(r, c) ? (3.0 * zs[i].real() + rs[i].real()) / (3.0 + cfg.lambda / std::sqrt(m)) : 0.0;
        CHECK(got[ch][i] == doctest::Approx(expect).epsilon(1e-12).scale(1.0));
      }
    }
  }

  // Outside the support the spatial filter vanishes to rounding.
  const auto spatial = solver::spatial_filter(probe, 1);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      if (!in_support(r, c)) CHECK(std::abs(spatial.at(r, c)) < 1e-12);
}

TEST_CASE("filter solve: lambda=0 and rho=0 crops z") {
  const int h = 6, w = 6;
  SolverConfig cfg;
  cfg.lambda = 0.0;
  std::mt19937_64 rng(9);
  FilterBank bank = random_bank(h, w, 1, 1.7, rng);
  for (auto& v : bank.rho_hat.values()) v = 0.0;
  // Real spatial z so that the crop is exactly representable.
  features::FeatureTensor zt = fixtures::random_features(h, w, 1, rng);
  bank.z_hat = solver::spectrum(zt);
  bank.support = {2, 3};
  FilterBank probe = bank;
  probe.w_hat = solver::solve_filter(bank, cfg);
  const auto got = solver::spatial_filter(probe, 0);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const bool inside = (r == 5 || r == 0) && (c == 5 || c == 0 || c == 1);
      CHECK(got.at(r, c) == doctest::Approx(inside ? zt.at(r, c, 0) : 0.0).scale(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("filter solve: constant z with lambda = sqrt(M) halves") {
  const int h = 4, w = 4;
  SolverConfig cfg;
  cfg.lambda = 4.0;
  FilterBank bank;
  bank.mu = 1.0;
  bank.support = {2, 2};
  bank.rho_hat = SpectralStack(h, w, 1);
  features::FeatureTensor ones(h, w, 1, 1, features::FeatureKind::DeepSynth);
  for (double& v : ones.values()) v = 1.0;
  bank.z_hat = solver::spectrum(ones);
  bank.w_hat = bank.z_hat;
  bank.w_hat = solver::solve_filter(bank, cfg);
  const auto got = solver::spatial_filter(bank, 0);
  CHECK(got.at(0, 0) == doctest::Approx(0.5));
  CHECK(got.at(3, 3) == doctest::Approx(0.5));
  CHECK(std::abs(got.at(1, 1)) < 1e-15);
}

TEST_CASE("dual update and penalty schedule") {
  SolverConfig cfg;
  std::mt19937_64 rng(2);
  FilterBank bank = random_bank(4, 4, 2, 1.0, rng);
  bank.z_hat = bank.w_hat;
  auto d = solver::admm_dual_update(bank, cfg);
  for (std::size_t i = 0; i < d.rho_hat.values().size(); ++i) CHECK(d.rho_hat.values()[i] == bank.rho_hat.values()[i]);
  CHECK(d.mu == 10.0);

  std::vector<double> mus{bank.mu};
  for (int i = 0; i < 4; ++i) {
    bank.mu = solver::admm_dual_update(bank, cfg).mu;
    mus.push_back(bank.mu);
  }
  CHECK(mus == std::vector<double>{1, 10, 100, 1000, 1000});

  bank.mu = 2.0;
  const Complex c{0.25, -1.5};
  for (std::size_t i = 0; i < bank.z_hat.values().size(); ++i) bank.z_hat.values()[i] = bank.w_hat.values()[i] + c;
  d = solver::admm_dual_update(bank, cfg);
  for (std::size_t i = 0; i < d.rho_hat.values().size(); ++i) {
    CHECK(std::abs(d.rho_hat.values()[i] - (bank.rho_hat.values()[i] + 2.0 * c)) < 1e-14);
  }
}

TEST_CASE("train runs the loop in order and warm start resets duals") {
  auto x = fixtures::textured_features(12, 10, 2, 4);
  auto y = centred_label(12, 10, 1.0);
  SolverConfig cfg;
  cfg.iterations = 1;
  const Support sup{4, 4};
  FilterBank got = solver::train(x, y, sup, cfg);

  FilterBank manual = solver::init_model(x, y, sup, cfg);
  const auto xh = solver::spectrum(x);
  const auto yh = solver::spectrum(y);
  manual.z_hat = solver::solve_auxiliary(manual, xh, yh);
  manual.w_hat = solver::solve_filter(manual, cfg);
  auto d = solver::admm_dual_update(manual, cfg);
  for (std::size_t i = 0; i < got.w_hat.values().size(); ++i) {
    CHECK(got.w_hat.values()[i] == manual.w_hat.values()[i]);
    CHECK(got.rho_hat.values()[i] == d.rho_hat.values()[i]);
  }
  CHECK(got.mu == d.mu);

  int calls = 0;
  cfg.iterations = 3;
  FilterBank warm = solver::train(x, y, sup, cfg, &got, [&](int it, const FilterBank&) { CHECK(it == ++calls); });
  CHECK(calls == 3);

  // Warm start from got: first z-step uses got's w and zero duals at mu0.
  FilterBank start = got;
  for (auto& v : start.rho_hat.values()) v = 0.0;
  start.mu = cfg.mu0;
  const auto z1 = solver::solve_auxiliary(start, xh, yh);
  cfg.iterations = 1;
  FilterBank one = solver::train(x, y, sup, cfg, &got);
  for (std::size_t i = 0; i < z1.values().size(); ++i) CHECK(one.z_hat.values()[i] == z1.values()[i]);
  (void)warm;

  cfg.iterations = 0;
  CHECK_THROWS_AS(solver::train(x, y, sup, cfg), ParameterError);
}

TEST_CASE("trained filter peaks at the label centre and follows circular shifts") {
  const int n = 48;
  auto x = fixtures::textured_features(n, n, 4, 21);
  x = features::apply_window(x, spectral::gaussian_window(n, n, 0.25));
  auto y = centred_label(n, n, 1.2);
  SolverConfig cfg;
  FilterBank bank = solver::train(x, y, {12, 12}, cfg);
  auto resp = solver::compute_response(bank, x);
  CHECK(resp.peak_location == spectral::Cell{24, 24});
  CHECK(resp.peak_value == resp.grid.at(24, 24));

  auto shifted = solver::compute_response(bank, fixtures::circshift(x, 5, 3));
  CHECK(shifted.peak_location == spectral::Cell{29, 27});
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c)
      CHECK(std::abs(shifted.grid.at((r + 5) % n, (c + 3) % n) - resp.grid.at(r, c)) < 1e-9);
}

TEST_CASE("zero filter gives zero response; shape mismatch rejected") {
  auto x = fixtures::textured_features(8, 8, 2, 3);
  auto y = centred_label(8, 8, 1.0);
  FilterBank bank = solver::init_model(x, y, {3, 3}, SolverConfig{});
  auto r = solver::compute_response(bank, x);
  for (double v : r.grid.values()) CHECK(v == 0.0);
  CHECK_THROWS_AS(solver::compute_response(bank, fixtures::textured_features(8, 8, 3, 3)), ShapeError);
}

TEST_CASE("ADMM progress: residual shrinks and the Lagrangian does not increase") {
  std::mt19937_64 rng(77);
  for (int inst = 0; inst < 20; ++inst) {
    const int h = 8 + static_cast<int>(rng() % 5), w = 8 + static_cast<int>(rng() % 5);
    const int n = 1 + static_cast<int>(rng() % 3);
    auto x = fixtures::random_features(h, w, n, rng);
    auto y = centred_label(h, w, 1.0);
    const Support sup{h / 2, w / 2};
    SolverConfig cfg;
    cfg.iterations = 20;
    std::vector<double> residuals;
    solver::train(x, y, sup, cfg, nullptr,
                  [&](int, const FilterBank& b) { residuals.push_back(solver::primal_residual(b)); });
    REQUIRE(residuals.size() == 20);
    CHECK(residuals.back() <= residuals.front());

    FilterBank bank = solver::init_model(x, y, sup, cfg);
    const auto xh = solver::spectrum(x);
    const auto yh = solver::spectrum(y);
    auto value = [&](const FilterBank& b) {
      return oracle::augmented_lagrangian(x, y, b.z_hat, oracle::spatial_filters(b), b.rho_hat, b.mu, cfg.lambda);
    };
    for (int it = 0; it < 2; ++it) {
      const double before = value(bank);
      bank.z_hat = solver::solve_auxiliary(bank, xh, yh);
      const double mid = value(bank);
      bank.w_hat = solver::solve_filter(bank, cfg);
      const double after = value(bank);
      const double tol = 1e-9 * std::max(1.0, std::abs(before));
      CHECK(mid <= before + tol);
      CHECK(after <= mid + tol);
      auto d = solver::admm_dual_update(bank, cfg);
      bank.rho_hat = d.rho_hat;
      bank.mu = d.mu;
    }
  }
}
