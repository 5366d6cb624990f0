#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cvtomo/analysis.hpp"

using namespace cvtomo;

namespace {

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> xs(n);
  for (int j = 0; j < n; ++j) xs[j] = lo + (hi - lo) * j / (n - 1);
  return xs;
}

}  // namespace

TEST_CASE("Wigner values at the origin") {
  const Grid g = make_grid({{-7.0, 7.0}}, 281);
  const std::vector<double> xs = {0.0};
  const std::vector<double> ps = {0.0};
  const auto w0 =
      wigner(density_on_grid(PureStateSpec::fock(0), g), g, xs, ps);
  CHECK(w0.values(0, 0) == doctest::Approx(1.0 / kPi).epsilon(1e-6));
  const auto w1 =
      wigner(density_on_grid(PureStateSpec::fock(1), g), g, xs, ps);
  CHECK(w1.values(0, 0) == doctest::Approx(-1.0 / kPi).epsilon(1e-6));
  const auto wc = wigner(
      density_on_grid(PureStateSpec::two_cat({2.0, 0.0}, -1.0), g), g, xs, ps);
  CHECK(wc.values(0, 0) == doctest::Approx(-1.0 / kPi).epsilon(1e-2));
}

TEST_CASE("Wigner of a coherent state is the displaced Gaussian") {
  const Grid g = make_grid({{-6.0, 8.0}}, 281);
  const CMat rho = density_on_grid(PureStateSpec::coherent({1.1, -0.7}), g);
  const double cx = std::sqrt(2.0) * 1.1, cp = -std::sqrt(2.0) * 0.7;
  const auto xs = linspace(-2.0, 5.0, 15);
  const auto ps = linspace(-4.0, 2.0, 13);
  const auto w = wigner(rho, g, xs, ps);
  for (std::size_t xi = 0; xi < xs.size(); ++xi) {
    REQUIRE(w.valid[xi]);
    for (std::size_t pi = 0; pi < ps.size(); ++pi) {
      const double dx = xs[xi] - cx, dp = ps[pi] - cp;
      CHECK(w.values(xi, pi) ==
            doctest::Approx(std::exp(-dx * dx - dp * dp) / kPi)
                .epsilon(1e-5).scale(1.0));
    }
  }
}

TEST_CASE("Wigner is bounded by 1/pi") {
  const Grid g = make_grid({{-9.0, 9.0}}, 361);
  const std::vector<PureStateSpec> specs = {
      PureStateSpec::fock(3), PureStateSpec::two_cat({2.5, 0.0}, 1.0),
      PureStateSpec::gkp(0.4, 0.4, 4)};
  const auto xs = linspace(-4.0, 4.0, 41);
  const auto ps = linspace(-4.0, 4.0, 41);
  for (const auto& spec : specs) {
    const auto w = wigner(density_on_grid(spec, g), g, xs, ps);
    CHECK(w.values.cwiseAbs().maxCoeff() <= 1.0 / kPi + 1e-6);
  }
}

TEST_CASE("Wigner marginal reproduces the position density") {
  const Grid g = make_grid({{-8.0, 8.0}}, 321);
  const PureStateSpec spec = PureStateSpec::two_cat({2.0, 0.0}, -1.0);
  const CMat rho = density_on_grid(spec, g);
  const auto ps = linspace(-6.0, 6.0, 481);
  const double dp = ps[1] - ps[0];
  for (double x : {0.0, 1.0, 2.8}) {
    const auto w = wigner(rho, g, {x}, ps);
    REQUIRE(w.valid[0]);
    double mass = 0.0;
    for (std::size_t pi = 0; pi < ps.size(); ++pi) mass += w.values(0, pi) * dp;
    CHECK(mass == doctest::Approx(std::norm(wavefunction(spec, x)))
                      .epsilon(1e-3).scale(0.1));
  }
}

TEST_CASE("Wigner normalizes to one") {
  const Grid g = make_grid({{-8.0, 8.0}}, 321);
  const CMat rho = density_on_grid(PureStateSpec::fock(2), g);
  const auto xs = linspace(-6.0, 6.0, 241);
  const auto ps = linspace(-6.0, 6.0, 241);
  const auto w = wigner(rho, g, xs, ps);
  double mass = 0.0;
  const double dx = xs[1] - xs[0], dp = ps[1] - ps[0];
  for (std::size_t xi = 0; xi < xs.size(); ++xi)
    for (std::size_t pi = 0; pi < ps.size(); ++pi)
      mass += w.values(xi, pi) * dx * dp;
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-2));
}

TEST_CASE("off-grid x rows are flagged invalid") {
  const Grid g = make_grid({{-4.0, 4.0}}, 81);
  const CMat rho = density_on_grid(PureStateSpec::fock(0), g);
  const auto w = wigner(rho, g, {0.0, 0.05, 0.025, 6.0}, {0.0});
  CHECK(w.valid[0]);   // node
  CHECK(w.valid[1]);   // half-node: anti-diagonal through x_j + x_k = 0.1
  CHECK(!w.valid[2]);  // 2x = 0.05 is off the x_j + x_k lattice
  CHECK(!w.valid[3]);  // outside the grid
}

TEST_CASE("model-backed Wigner matches the analytic vacuum") {
  const Grid g = make_grid({{-4.5, 4.5}}, 37);
  const auto grids = ReconstructionGrids::make(g, g);
  const auto ds = sample_dataset(PureStateSpec::fock(0), 8000,
                                 PhasePolicy::comb(4), 1.0, 11);
  ArchSpec arch;
  arch.hidden = {24, 24};
  arch.activations = {Activation::Tanh, Activation::Tanh};
  TrainConfig cfg;
  cfg.max_iterations = 600;
  cfg.step_size = 5e-3;
  cfg.step_decay = 0.998;
  cfg.seed = 3;
  const auto [model, report] = train(init_mlp(arch, g, 3), ds, grids, cfg);
  const auto xs = linspace(-2.0, 2.0, 9);
  const auto ps = linspace(-2.0, 2.0, 9);
  const auto w = wigner(model, xs, ps);
  for (std::size_t xi = 0; xi < xs.size(); ++xi) {
    REQUIRE(w.valid[xi]);
    for (std::size_t pi = 0; pi < ps.size(); ++pi)
      // absolute tolerance: off-node queries inherit the network's
      // generalization error, a few permille of the 1/pi peak
      CHECK(std::abs(w.values(xi, pi) -
                     std::exp(-xs[xi] * xs[xi] - ps[pi] * ps[pi]) / kPi) <
            0.01);
  }
  // outside the training grid the row is invalid, not extrapolated
  const auto w_out = wigner(model, {6.0}, {0.0});
  CHECK(!w_out.valid[0]);
}

TEST_CASE("fidelity axioms") {
  const Grid g = make_grid({{-6.0, 6.0}}, 201);
  const CMat vac = density_on_grid(PureStateSpec::fock(0), g);
  const CMat one = density_on_grid(PureStateSpec::fock(1), g);
  const CMat coh = density_on_grid(PureStateSpec::coherent({1.0, 0.0}), g);
  CHECK(fidelity(vac, vac) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(fidelity(vac, one) == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
  CHECK(fidelity(vac, coh) == doctest::Approx(std::exp(-1.0)).epsilon(1e-6));
  CHECK(fidelity(vac, coh) == doctest::Approx(fidelity(coh, vac)).epsilon(1e-9));
  // pure target vs a mixture: F = <psi| rho |psi> = mixing weight
  const CMat mix = 0.9 * vac + 0.1 * one;
  CHECK(fidelity(vac, mix) == doctest::Approx(0.9).epsilon(1e-6));
  CHECK(fidelity(mix, one) == doctest::Approx(0.1).epsilon(1e-6));
}

TEST_CASE("fidelity rejects non-states") {
  const Grid g = make_grid({{-4.0, 4.0}}, 41);
  const CMat vac = density_on_grid(PureStateSpec::fock(0), g);
  CMat bad = vac;
  bad(3, 3) = -0.5;  // negative eigenvalue
  CHECK_THROWS(fidelity(vac, bad));
}

TEST_CASE("purity") {
  const Grid g = make_grid({{-6.0, 6.0}}, 201);
  const CMat vac = density_on_grid(PureStateSpec::fock(0), g);
  const CMat one = density_on_grid(PureStateSpec::fock(1), g);
  CHECK(purity(vac) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(purity(0.5 * vac + 0.5 * one) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(purity(0.9 * vac + 0.1 * one) ==
        doctest::Approx(0.81 + 0.01).epsilon(1e-9));
}

TEST_CASE("region inference on a large cat") {
  const auto ds = sample_dataset(PureStateSpec::two_cat({5.0, 0.0}, -1.0),
                                 8000, PhasePolicy::comb(8), 1.0, 17);
  const auto sug = infer_regions(ds, 0.1, 0.995, 1.0);
  REQUIRE(sug.position_intervals.size() == 2);
  const double peak = 5.0 * std::sqrt(2.0);
  CHECK(sug.position_intervals[0].first < -peak);
  CHECK(sug.position_intervals[0].second > -peak);
  CHECK(sug.position_intervals[1].first < peak);
  CHECK(sug.position_intervals[1].second > peak);
  // lobes are ~1-wide vacuum-like packets; with margin 1 the intervals stay
  // well separated from the origin
  CHECK(sug.position_intervals[1].first > 2.0);
  // momentum side: Gaussian envelope e^{-p^2} plus margin
  CHECK(sug.momentum_interval.first < -2.5);
  CHECK(sug.momentum_interval.second > 2.5);
  CHECK(sug.x_max >= peak);
  CHECK(sug.delta_x == doctest::Approx(1.0 / sug.p_max / 1.5).epsilon(1e-12));
  CHECK(sug.delta_p == doctest::Approx(1.0 / sug.x_max / 1.5).epsilon(1e-12));
}

TEST_CASE("region inference on the vacuum") {
  const auto ds = sample_dataset(PureStateSpec::fock(0), 4000,
                                 PhasePolicy::comb(4), 1.0, 9);
  const auto sug = infer_regions(ds, 0.1, 0.99, 0.5);
  REQUIRE(sug.position_intervals.size() == 1);
  CHECK(sug.position_intervals[0].first == doctest::Approx(-3.0).epsilon(0.25));
  CHECK(sug.position_intervals[0].second == doctest::Approx(3.0).epsilon(0.25));
  CHECK(sug.momentum_interval.first == doctest::Approx(-3.0).epsilon(0.25));
  CHECK(sug.momentum_interval.second == doctest::Approx(3.0).epsilon(0.25));
}

TEST_CASE("region inference scales to a very large cat") {
  const auto ds = sample_dataset(PureStateSpec::two_cat({40.0, 0.0}, -1.0),
                                 20000, PhasePolicy::comb(8), 1.0, 23);
  const auto sug = infer_regions(ds, 0.1, 0.995);  // default margin 4.5
  REQUIRE(sug.position_intervals.size() == 2);
  const double peak = 40.0 * std::sqrt(2.0);
  // each lobe interval sits at +-alpha sqrt(2), padded by the margin
  CHECK(sug.position_intervals[1].first ==
        doctest::Approx(peak - 4.5 - 1.5).epsilon(0.2));
  CHECK(sug.position_intervals[1].second ==
        doctest::Approx(peak + 4.5 + 1.5).epsilon(0.2));
  CHECK(sug.position_intervals[0].first ==
        doctest::Approx(-(peak + 4.5 + 1.5)).epsilon(0.2));
}

TEST_CASE("region inference needs enough samples near both axes") {
  QuadratureDataset ds;
  ds.efficiency = 1.0;
  for (int j = 0; j < 1000; ++j) ds.samples.push_back({kPi / 4, 0.1 * j});
  CHECK_THROWS(infer_regions(ds, 0.1, 0.99, 1.0));
}

TEST_CASE("region suggestion JSON round-trip and grid realization") {
  const auto ds = sample_dataset(PureStateSpec::two_cat({5.0, 0.0}, -1.0),
                                 8000, PhasePolicy::comb(8), 1.0, 17);
  const auto sug = infer_regions(ds, 0.1, 0.995, 1.0);
  const auto back = RegionSuggestion::from_json(sug.to_json());
  CHECK(back.position_intervals == sug.position_intervals);
  CHECK(back.momentum_interval == sug.momentum_interval);
  CHECK(back.delta_x == sug.delta_x);

  const Grid gx = sug.position_grid();
  const Grid gp = sug.momentum_grid();
  CHECK(gx.delta <= sug.delta_x * (1.0 + 1e-9));
  CHECK(gp.delta <= sug.delta_p * (1.0 + 1e-9));
  CHECK(gx.abs_max() >= sug.x_max - sug.delta_x);
  const auto runs = gx.runs();
  CHECK(runs.size() == sug.position_intervals.size());
}
