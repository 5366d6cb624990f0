#ifndef CVTOMO_MAXLIK_HPP
#define CVTOMO_MAXLIK_HPP

#include "cvtomo/homodyne.hpp"

namespace cvtomo {

/// Density matrix in the truncated Fock basis {|0>, ..., |cutoff>}.
struct FockDensity {
  int cutoff = 0;
  CMat entries;  // (cutoff+1) x (cutoff+1), Hermitian PSD trace-1
};

/// Naive closed form (2^n n!)^(-1/2) pi^(-1/4) e^(-x^2/2) H_n(x); the
/// normalization factor underflows to zero for large n (n >= 170 at any x),
/// which is exactly the failure mode the recurrence in fock_wavefunction
/// avoids.
double fock_wavefunction_naive(int n, double x);

struct MaxLikOptions {
  int iterations = 500;
  double quantize = 1e-3;  // (theta, X) cache quantization
  bool naive_wavefunctions = false;  // use the underflowing closed form
};

struct MaxLikResult {
  FockDensity rho;
  std::vector<double> nll;  // per iteration, non-increasing
};

/// Iterative R rho R maximum-likelihood reconstruction. For eta < 1 the
/// quadrature projectors are replaced by generalized measurement operators
/// obtained by numerically convolving the projector kernel with the
/// efficiency Gaussian.
MaxLikResult maxlik_reconstruct(const QuadratureDataset& dataset, int cutoff,
                                const MaxLikOptions& opts = {});

/// rho(x, x') = sum_mn rho_mn psi_m(x) psi_n(x') * deltaX (trace-1 in the
/// grid convention).
CMat fock_to_position(const FockDensity& rho, const Grid& grid);

/// n_max = ceil(|alpha|^2 + 5 |alpha| + 10), the default basis size for
/// cat-like states of amplitude alpha.
int default_fock_cutoff(double alpha_abs);

}  // namespace cvtomo

#endif
