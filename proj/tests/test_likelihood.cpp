#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "cvtomo/likelihood.hpp"

using namespace cvtomo;

namespace {

ReconstructionGrids standard_grids(double half = 8.0, std::size_t n = 321) {
  return ReconstructionGrids::make(make_grid({{-half, half}}, n),
                                   make_grid({{-half, half}}, n));
}

double prob_any(const CMat& rho_x, double x, double theta,
                const ReconstructionGrids& grids, double eta) {
  if (position_branch(theta)) return prob_position(rho_x, x, theta, grids, eta);
  return prob_momentum(to_momentum(rho_x, grids.change), x, theta, grids, eta);
}

CMat random_hermitian(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  CMat h(n, n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = 0; k < n; ++k) h(j, k) = Cmplx(gauss(rng), gauss(rng));
  return 0.5 * (h + h.adjoint());
}

}  // namespace

TEST_CASE("branch selection rule") {
  CHECK(position_branch(kPi / 2));
  CHECK(position_branch(kPi / 4));
  CHECK(position_branch(3 * kPi / 4));
  CHECK(!position_branch(0.0));
  CHECK(!position_branch(0.2));
  CHECK(!position_branch(kPi - 0.2));
}

TEST_CASE("branch misuse throws") {
  const auto grids = standard_grids(6.0, 121);
  const CMat rho = density_on_grid(PureStateSpec::fock(0), grids.position);
  CHECK_THROWS(prob_position(rho, 0.0, 0.1, grids, 1.0));
  CHECK_THROWS(prob_momentum(rho, 0.0, kPi / 2, grids, 1.0));
}

TEST_CASE("vacuum density at the origin, both branches") {
  const auto grids = standard_grids();
  const CMat rho_x = density_on_grid(PureStateSpec::fock(0), grids.position);
  const CMat rho_p = to_momentum(rho_x, grids.change);
  CHECK(prob_position(rho_x, 0.0, kPi / 2, grids, 1.0) ==
        doctest::Approx(1.0 / std::sqrt(kPi)).epsilon(1e-6));
  CHECK(prob_momentum(rho_p, 0.0, 0.0, grids, 1.0) ==
        doctest::Approx(1.0 / std::sqrt(kPi)).epsilon(1e-6));
}

TEST_CASE("single photon, eta = 0.56, pinned origin density") {
  const auto grids = standard_grids();
  const CMat rho_x = density_on_grid(PureStateSpec::fock(1), grids.position);
  // closed form (1 - eta)/sqrt(pi); checked against the sampling oracle too
  const double expect = 0.44 / std::sqrt(kPi);
  CHECK(prob_position(rho_x, 0.0, 1.2, grids, 0.56) ==
        doctest::Approx(expect).epsilon(1e-6));
  CHECK(prob_any(rho_x, 0.0, 0.3, grids, 0.56) ==
        doctest::Approx(expect).epsilon(1e-6));
  CHECK(expect == doctest::Approx(0.24824).epsilon(1e-3));
}

TEST_CASE("coherent peak on the momentum branch") {
  const auto grids = standard_grids();
  const CMat rho_x =
      density_on_grid(PureStateSpec::coherent({2.0, 0.0}), grids.position);
  const CMat rho_p = to_momentum(rho_x, grids.change);
  CHECK(prob_momentum(rho_p, 2.0 * std::sqrt(2.0), 0.0, grids, 1.0) ==
        doctest::Approx(1.0 / std::sqrt(kPi)).epsilon(1e-6));
}

TEST_CASE("single-sample likelihood gives ln 2 at the half-maximum point") {
  const auto grids = standard_grids();
  const CMat rho_x = density_on_grid(PureStateSpec::fock(0), grids.position);
  QuadratureDataset ds;
  ds.efficiency = 1.0;
  ds.samples = {{kPi / 2, std::sqrt(std::log(2.0 / std::sqrt(kPi)))}};
  CHECK(neg_log_likelihood(rho_x, ds, grids) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-5));
}

TEST_CASE("true state beats a wrong state in likelihood") {
  const auto grids = standard_grids();
  const auto ds = sample_dataset(PureStateSpec::fock(0), 400,
                                 PhasePolicy::comb(4), 1.0, 17);
  const CMat vac = density_on_grid(PureStateSpec::fock(0), grids.position);
  const CMat one = density_on_grid(PureStateSpec::fock(1), grids.position);
  CHECK(neg_log_likelihood(vac, ds, grids) <
        neg_log_likelihood(one, ds, grids));
}

TEST_CASE("branches agree at the switchover phase") {
  const auto grids = standard_grids();
  const CMat rho_x = density_on_grid(
      PureStateSpec::superposition({{0, {1.0, 0.0}}, {2, {0.4, 0.6}}}),
      grids.position);
  const CMat rho_p = to_momentum(rho_x, grids.change);
  for (double eta : {1.0, 0.7}) {
    for (double x : {0.0, 0.8, -1.7}) {
      const double above = prob_position(rho_x, x, kPi / 4 + 1e-9, grids, eta);
      const double below = prob_momentum(rho_p, x, kPi / 4 - 1e-9, grids, eta);
      CHECK(above == doctest::Approx(below).epsilon(1e-6));
    }
  }
}

TEST_CASE("predicted densities integrate to one") {
  const auto grids = standard_grids(9.0, 361);
  const std::vector<PureStateSpec> specs = {
      PureStateSpec::fock(2), PureStateSpec::coherent({1.5, -0.8}),
      PureStateSpec::two_cat({2.0, 0.0}, -1.0), PureStateSpec::gkp(0.4, 0.4, 4)};
  const std::vector<double> thetas = {0.0, 0.5, kPi / 4 + 0.01, kPi / 2, 2.6};
  const int nq = 601;
  const double lo = -9.0, hi = 9.0, dq = (hi - lo) / (nq - 1);
  for (const auto& spec : specs) {
    const CMat rho_x = density_on_grid(spec, grids.position);
    const CMat rho_p = to_momentum(rho_x, grids.change);
    for (double theta : thetas) {
      for (double eta : {1.0, 0.56}) {
        double mass = 0.0;
        for (int j = 0; j < nq; ++j) {
          const double w = (j == 0 || j == nq - 1) ? 0.5 : 1.0;
          const double x = lo + j * dq;
          mass += w * dq *
                  (position_branch(theta)
                       ? prob_position(rho_x, x, theta, grids, eta)
                       : prob_momentum(rho_p, x, theta, grids, eta));
        }
        CHECK(mass == doctest::Approx(1.0).epsilon(1e-3));
      }
    }
  }
}

TEST_CASE("lossless kernel matches the analytic rotated density") {
  // independent oracle: the sampler-side pdf built from direct quadrature of
  // the rotated wavefunction
  const auto grids = standard_grids(8.0, 401);
  const std::vector<PureStateSpec> specs = {
      PureStateSpec::fock(2), PureStateSpec::coherent({1.0, 0.3}),
      PureStateSpec::superposition({{1, {1.0, 0.0}}, {3, {0.0, 0.7}}})};
  const std::vector<double> thetas = {0.15, kPi / 3, kPi / 2, 2.9};
  for (const auto& spec : specs) {
    const CMat rho_x = density_on_grid(spec, grids.position);
    const CMat rho_p = to_momentum(rho_x, grids.change);
    for (double theta : thetas) {
      const std::vector<double> xs = {0.0, 0.7, -1.9, 2.4};
      const auto oracle = oracle_pdf(spec, theta, xs, 1.0);
      for (std::size_t j = 0; j < xs.size(); ++j) {
        const double p = position_branch(theta)
                             ? prob_position(rho_x, xs[j], theta, grids, 1.0)
                             : prob_momentum(rho_p, xs[j], theta, grids, 1.0);
        CHECK(p == doctest::Approx(oracle[j]).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("lossy kernel matches the sampling oracle") {
  const auto grids = standard_grids(8.0, 401);
  const PureStateSpec spec = PureStateSpec::two_cat({1.8, 0.0}, -1.0);
  const CMat rho_x = density_on_grid(spec, grids.position);
  const CMat rho_p = to_momentum(rho_x, grids.change);
  for (double theta : {0.1, 0.6, 1.1, kPi / 2}) {
    for (double eta : {0.56, 0.62, 0.9}) {
      const std::vector<double> xs = {0.0, 1.3, -2.1};
      const auto oracle = oracle_pdf(spec, theta, xs, eta);
      for (std::size_t j = 0; j < xs.size(); ++j) {
        const double p = position_branch(theta)
                             ? prob_position(rho_x, xs[j], theta, grids, eta)
                             : prob_momentum(rho_p, xs[j], theta, grids, eta);
        CHECK(p == doctest::Approx(oracle[j]).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("loss kernel is continuous at the lossless switch") {
  const auto grids = standard_grids();
  const CMat rho_x = density_on_grid(PureStateSpec::fock(1), grids.position);
  for (double x : {0.0, 0.9, 1.8}) {
    const double lossless = prob_position(rho_x, x, kPi / 2, grids, 1.0);
    const double routed = prob_position(rho_x, x, kPi / 2, grids, 0.9995);
    const double lossy = prob_position(rho_x, x, kPi / 2, grids, 0.9989);
    CHECK(routed == doctest::Approx(lossless).epsilon(1e-12));
    CHECK(lossy == doctest::Approx(lossless).epsilon(2e-3));
  }
}

TEST_CASE("precomputed kernels reproduce the direct probabilities") {
  const auto grids = standard_grids(6.0, 161);
  const PureStateSpec spec = PureStateSpec::coherent({0.9, -0.4});
  const auto ds = sample_dataset(spec, 300, PhasePolicy::uniform(), 0.8, 31);
  const CMat rho_x = density_on_grid(spec, grids.position);
  const CMat rho_p = to_momentum(rho_x, grids.change);
  const KernelSet ks = precompute_kernels(ds, grids, ds.efficiency);
  REQUIRE(ks.sample_to_kernel.size() == ds.samples.size());
  for (std::size_t j = 0; j < ds.samples.size(); ++j) {
    const auto& k = ks.kernels[ks.sample_to_kernel[j]];
    CHECK(k.momentum_branch == !position_branch(ds.samples[j].theta));
    const double direct =
        k.momentum_branch
            ? prob_momentum(rho_p, ds.samples[j].value, ds.samples[j].theta,
                            grids, 0.8)
            : prob_position(rho_x, ds.samples[j].value, ds.samples[j].theta,
                            grids, 0.8);
    CHECK(kernel_prob(k, k.momentum_branch ? rho_p : rho_x) ==
          doctest::Approx(direct).epsilon(1e-10));
  }
}

TEST_CASE("kernel quantization shares work at bounded error") {
  const auto grids = standard_grids(6.0, 161);
  const PureStateSpec spec = PureStateSpec::fock(1);
  const auto ds = sample_dataset(spec, 500, PhasePolicy::uniform(), 1.0, 8);
  const CMat rho_x = density_on_grid(spec, grids.position);
  const CMat rho_p = to_momentum(rho_x, grids.change);
  KernelOptions opts;
  opts.quantize = 1e-3;
  const KernelSet exact = precompute_kernels(ds, grids, 1.0);
  const KernelSet binned = precompute_kernels(ds, grids, 1.0, opts);
  CHECK(binned.kernels.size() <= exact.kernels.size());
  CHECK(binned.bytes <= exact.bytes);
  for (std::size_t j = 0; j < ds.samples.size(); ++j) {
    const auto& ke = exact.kernels[exact.sample_to_kernel[j]];
    const auto& kb = binned.kernels[binned.sample_to_kernel[j]];
    const CMat& rho_e = ke.momentum_branch ? rho_p : rho_x;
    const CMat& rho_b = kb.momentum_branch ? rho_p : rho_x;
    // binning (theta, X) to 1e-3 moves X by up to 5e-4 against pdf slopes
    // of order one, so allow a few-per-mille relative error
    CHECK(kernel_prob(kb, rho_b) ==
          doctest::Approx(kernel_prob(ke, rho_e)).epsilon(5e-3));
  }
}

TEST_CASE("kernel memory cap throws") {
  const auto grids = standard_grids(6.0, 161);
  const auto ds = sample_dataset(PureStateSpec::fock(0), 200,
                                 PhasePolicy::uniform(), 1.0, 9);
  KernelOptions opts;
  opts.memory_cap_bytes = 1024;
  CHECK_THROWS(precompute_kernels(ds, grids, 1.0, opts));
}

TEST_CASE("engine matches the direct likelihood") {
  // multi-interval position grid to exercise the run-pair class machinery
  const auto grids = ReconstructionGrids::make(
      make_grid({{-6.5, -0.5}, {0.7, 6.3}}, 230),
      make_grid({{-6.0, 6.0}}, 241));
  const PureStateSpec spec = PureStateSpec::two_cat({2.4, 0.0}, 1.0);
  const CMat rho_x = density_on_grid(spec, grids.position);
  for (double eta : {1.0, 0.62}) {
    const auto ds = sample_dataset(spec, 1500, PhasePolicy::uniform(), eta, 77);
    const LikelihoodEngine engine(ds, grids);
    CHECK(engine.sample_count() == 1500);
    const double direct = neg_log_likelihood(rho_x, ds, grids);
    CHECK(engine.value(rho_x) == doctest::Approx(direct).epsilon(1e-8));
  }
}

TEST_CASE("engine phase binning stays close to exact") {
  const auto grids = standard_grids(6.0, 201);
  const PureStateSpec spec = PureStateSpec::coherent({1.2, 0.5});
  const auto ds = sample_dataset(spec, 2000, PhasePolicy::uniform(), 1.0, 5);
  const CMat rho_x = density_on_grid(spec, grids.position);
  const LikelihoodEngine exact(ds, grids);
  LikelihoodOptions opts;
  opts.theta_bin = 1e-4;
  const LikelihoodEngine binned(ds, grids, opts);
  CHECK(binned.value(rho_x) ==
        doctest::Approx(exact.value(rho_x)).epsilon(1e-4));
}

TEST_CASE("engine subset mask selects sample subsets") {
  const auto grids = standard_grids(6.0, 201);
  const PureStateSpec spec = PureStateSpec::fock(1);
  auto ds = sample_dataset(spec, 600, PhasePolicy::uniform(), 0.9, 13);
  const CMat rho_x = density_on_grid(spec, grids.position);
  const LikelihoodEngine engine(ds, grids);
  std::vector<std::uint8_t> mask(600, 0);
  for (std::size_t j = 0; j < 300; ++j) mask[j] = 1;
  QuadratureDataset head = ds;
  head.samples.resize(300);
  const LikelihoodEngine head_engine(head, grids);
  CHECK(engine.value(rho_x, &mask) ==
        doctest::Approx(head_engine.value(rho_x)).epsilon(1e-10));
}

TEST_CASE("engine adjoint matches finite differences") {
  const auto grids = ReconstructionGrids::make(make_grid({{-5.0, 5.0}}, 81),
                                               make_grid({{-5.0, 5.0}}, 81));
  const PureStateSpec spec =
      PureStateSpec::superposition({{0, {1.0, 0.0}}, {1, {0.0, 0.8}}});
  const CMat rho_x = density_on_grid(spec, grids.position);
  for (double eta : {1.0, 0.7}) {
    const auto ds = sample_dataset(spec, 120, PhasePolicy::uniform(), eta, 23);
    const LikelihoodEngine engine(ds, grids);
    CMat adj;
    const double l0 = engine.value_and_adjoint(rho_x, adj);
    CHECK(l0 == doctest::Approx(engine.value(rho_x)).epsilon(1e-12));
    for (unsigned dir = 0; dir < 3; ++dir) {
      const CMat h = 1e-3 * random_hermitian(grids.position.size(), 100 + dir);
      const double eps = 1e-5;
      const double fd =
          (engine.value(rho_x + eps * h) - engine.value(rho_x - eps * h)) /
          (2.0 * eps);
      double an = 0.0;
      for (Eigen::Index j = 0; j < adj.rows(); ++j)
        for (Eigen::Index k = 0; k < adj.cols(); ++k)
          an += adj(j, k).real() * h(j, k).real() +
                adj(j, k).imag() * h(j, k).imag();
      CHECK(an == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}
