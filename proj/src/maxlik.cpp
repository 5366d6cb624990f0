#include "cvtomo/maxlik.hpp"

#include <cmath>
#include <iostream>
#include <map>
#include <stdexcept>

namespace cvtomo {

double fock_wavefunction_naive(int n, double x) {
  if (n < 0) throw std::invalid_argument("fock_wavefunction_naive: n >= 0");
  // Hermite polynomial by recurrence; the instability lives in the explicit
  // (2^n n!)^(-1/2) normalization, which hits +inf (so the factor becomes 0)
  // long before H_n(x) overflows.
  double h_prev = 1.0, h = (n == 0) ? 1.0 : 2.0 * x;
  for (int k = 1; k < n; ++k) {
    const double h_next = 2.0 * x * h - 2.0 * k * h_prev;
    h_prev = h;
    h = h_next;
  }
  const double coeff =
      1.0 / std::sqrt(std::pow(2.0, n) * std::tgamma(n + 1.0));
  return coeff * std::pow(kPi, -0.25) * std::exp(-0.5 * x * x) * h;
}

int default_fock_cutoff(double alpha_abs) {
  return static_cast<int>(
      std::ceil(alpha_abs * alpha_abs + 5.0 * alpha_abs + 10.0));
}

namespace {

constexpr double kLosslessEta = 0.999;
constexpr double kProbFloor = 1e-12;

// psi_m(x) for m = 0..cutoff over the given abscissas, by the stable
// two-term recurrence (columns are abscissas).
RMat fock_matrix(int cutoff, const std::vector<double>& xs, bool naive) {
  const int dim = cutoff + 1;
  RMat psi(dim, xs.size());
  if (naive) {
    for (std::size_t q = 0; q < xs.size(); ++q)
      for (int m = 0; m < dim; ++m)
        psi(m, q) = fock_wavefunction_naive(m, xs[q]);
    return psi;
  }
  for (std::size_t q = 0; q < xs.size(); ++q) {
    const double x = xs[q];
    double p0 = std::pow(kPi, -0.25) * std::exp(-0.5 * x * x);
    psi(0, q) = p0;
    if (dim == 1) continue;
    double p1 = std::sqrt(2.0) * x * p0;
    psi(1, q) = p1;
    for (int m = 2; m < dim; ++m) {
      const double p2 = std::sqrt(2.0 / m) * x * p1 -
                        std::sqrt((m - 1.0) / m) * p0;
      p0 = p1;
      p1 = p2;
      psi(m, q) = p2;
    }
  }
  return psi;
}

struct GroupSample {
  double x;
  double count;
  std::size_t lo = 0, hi = 0;        // q-grid window (lossy path)
  std::vector<double> gauss;          // dq-weighted Gaussian over the window
};

struct ThetaGroup {
  double theta;
  CVec d;  // e^{i m theta}
  std::vector<GroupSample> samples;
  RMat psi;  // lossless path: psi over this group's quantized X values
};

}  // namespace

MaxLikResult maxlik_reconstruct(const QuadratureDataset& dataset, int cutoff,
                                const MaxLikOptions& opts) {
  if (dataset.samples.empty())
    throw std::invalid_argument("maxlik_reconstruct: empty dataset");
  if (cutoff < 1) throw std::invalid_argument("maxlik_reconstruct: cutoff >= 1");
  if (opts.iterations < 1)
    throw std::invalid_argument("maxlik_reconstruct: iterations >= 1");
  const int dim = cutoff + 1;
  const double eta = dataset.efficiency;
  const bool lossless = eta >= kLosslessEta;

  // Group samples by quantized theta; within a group merge quantized X
  // values with multiplicities.
  const double quant = opts.quantize > 0 ? opts.quantize : 1e-12;
  std::map<long long, std::map<long long, double>> buckets;
  for (const auto& s : dataset.samples)
    buckets[std::llround(s.theta / quant)][std::llround(s.value / quant)] +=
        1.0;

  std::vector<ThetaGroup> groups;
  double x_lo = 0.0, x_hi = 0.0;
  bool first = true;
  for (const auto& [tq, xs] : buckets) {
    ThetaGroup g;
    g.theta = tq * quant;
    g.d.resize(dim);
    for (int m = 0; m < dim; ++m) g.d(m) = std::polar(1.0, m * g.theta);
    for (const auto& [xq, cnt] : xs) {
      GroupSample gs;
      gs.x = xq * quant;
      gs.count = cnt;
      g.samples.push_back(gs);
      if (first || gs.x < x_lo) x_lo = gs.x;
      if (first || gs.x > x_hi) x_hi = gs.x;
      first = false;
    }
    groups.push_back(std::move(g));
  }

  // Measurement kernels.
  std::vector<double> qgrid;
  RMat psi_q;  // lossy path: psi over the shared q-grid
  if (lossless) {
    for (auto& g : groups) {
      std::vector<double> xs(g.samples.size());
      for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = g.samples[i].x;
      g.psi = fock_matrix(cutoff, xs, opts.naive_wavefunctions);
    }
  } else {
    const double sq_eta = std::sqrt(eta);
    const double sigma_q = std::sqrt((1.0 - eta) / (2.0 * eta));
    const double dq = std::min(sigma_q / 3.0,
                               kPi / (8.0 * std::sqrt(2.0 * cutoff + 1.0)));
    const double q_lo = x_lo / sq_eta - 8.0 * sigma_q;
    const double q_hi = x_hi / sq_eta + 8.0 * sigma_q;
    const std::size_t nq = static_cast<std::size_t>((q_hi - q_lo) / dq) + 2;
    qgrid.resize(nq);
    for (std::size_t i = 0; i < nq; ++i) qgrid[i] = q_lo + i * dq;
    psi_q = fock_matrix(cutoff, qgrid, opts.naive_wavefunctions);

    const double inv_var = eta / (1.0 - eta);
    const double norm =
        dq / std::sqrt(kPi * (1.0 - eta));  // so that sum over q gives P
    for (auto& g : groups) {
      for (auto& gs : g.samples) {
        const double center = gs.x / sq_eta;
        gs.lo = static_cast<std::size_t>(
            std::max(0.0, (center - 8.0 * sigma_q - q_lo) / dq));
        gs.hi = std::min(nq - 1, static_cast<std::size_t>(
                                     (center + 8.0 * sigma_q - q_lo) / dq) +
                                     1);
        gs.gauss.resize(gs.hi - gs.lo + 1);
        for (std::size_t i = gs.lo; i <= gs.hi; ++i) {
          const double d = qgrid[i] - center;
          gs.gauss[i - gs.lo] = norm * std::exp(-d * d * inv_var);
        }
      }
    }
  }

  MaxLikResult result;
  result.rho.cutoff = cutoff;
  CMat rho = CMat::Identity(dim, dim) / static_cast<double>(dim);

  CMat r_total(dim, dim), rho_theta;
  for (int it = 0; it < opts.iterations; ++it) {
    r_total.setZero();
    double L = 0.0;
    for (const auto& g : groups) {
      // rho in the rotated frame: (D^dag rho D)_{mn} = conj(d_m) rho_mn d_n,
      // so that P = Tr(rho_theta K) with the real kernel K = psi psi^T.
      rho_theta = g.d.conjugate().asDiagonal() * rho * g.d.asDiagonal();
      if (lossless) {
        const CMat t = rho_theta * g.psi;
        const RVec w =
            g.psi.cwiseProduct(t.real()).colwise().sum().transpose();
        RVec coeff(g.samples.size());
        for (std::size_t i = 0; i < g.samples.size(); ++i) {
          const double p = std::max(w(i), kProbFloor);
          L -= g.samples[i].count * std::log(p);
          coeff(i) = g.samples[i].count / p;
        }
        const RMat s = g.psi * coeff.asDiagonal() * g.psi.transpose();
        r_total += g.d.asDiagonal() * s.cast<Cmplx>() *
                   g.d.conjugate().asDiagonal();
      } else {
        const CMat t = rho_theta * psi_q;
        const RVec w =
            psi_q.cwiseProduct(t.real()).colwise().sum().transpose();
        RVec coeff = RVec::Zero(qgrid.size());
        for (const auto& gs : g.samples) {
          double p = 0.0;
          for (std::size_t i = gs.lo; i <= gs.hi; ++i)
            p += gs.gauss[i - gs.lo] * w(i);
          p = std::max(p, kProbFloor);
          L -= gs.count * std::log(p);
          const double c = gs.count / p;
          for (std::size_t i = gs.lo; i <= gs.hi; ++i)
            coeff(i) += c * gs.gauss[i - gs.lo];
        }
        const RMat s = psi_q * coeff.asDiagonal() * psi_q.transpose();
        r_total += g.d.asDiagonal() * s.cast<Cmplx>() *
                   g.d.conjugate().asDiagonal();
      }
    }
    result.nll.push_back(L);

    rho = r_total * rho * r_total;
    rho = 0.5 * (rho + rho.adjoint()).eval();
    const double tr = rho.trace().real();
    if (!(tr > 0.0))
      throw std::runtime_error("maxlik_reconstruct: iteration collapsed");
    rho /= tr;
  }

  const double top = rho(dim - 1, dim - 1).real() +
                     (dim > 1 ? rho(dim - 2, dim - 2).real() : 0.0);
  if (top > 1e-3)
    std::cerr << "warning: maxlik cutoff " << cutoff
              << " may be too small (top-level population " << top << ")\n";

  result.rho.entries = std::move(rho);
  return result;
}

CMat fock_to_position(const FockDensity& rho, const Grid& grid) {
  if (rho.entries.rows() != rho.cutoff + 1)
    throw std::invalid_argument("fock_to_position: inconsistent FockDensity");
  const RMat psi = fock_matrix(rho.cutoff, grid.points, false);
  CMat out = psi.transpose().cast<Cmplx>() * rho.entries * psi.cast<Cmplx>();
  out *= grid.delta;
  const double tr = out.trace().real();
  if (tr < 1.0 - 1e-3)
    throw std::runtime_error(
        "fock_to_position: grid does not cover the state (trace deficit)");
  return out;
}

}  // namespace cvtomo
