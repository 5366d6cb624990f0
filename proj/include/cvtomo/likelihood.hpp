#ifndef CVTOMO_LIKELIHOOD_HPP
#define CVTOMO_LIKELIHOOD_HPP

#include <cstdint>
#include <vector>

#include "cvtomo/grid.hpp"
#include "cvtomo/homodyne.hpp"

namespace cvtomo {

/// Position/momentum reconstruction grids plus the dense basis change
/// between them. Construction warns (stderr) when the grid-period rules
/// dX <= 1/P_max, dP <= 1/X_max are violated.
struct ReconstructionGrids {
  Grid position;
  Grid momentum;
  BasisChange change;

  static ReconstructionGrids make(const Grid& position, const Grid& momentum);
  nlohmann::json to_json() const;
  static ReconstructionGrids from_json(const nlohmann::json& j);
};

/// Quadratures with |sin theta| >= 1/sqrt(2) are evaluated in the position
/// basis, the rest in the momentum basis.
inline bool position_branch(double theta) {
  return std::abs(std::sin(theta)) >= 1.0 / std::sqrt(2.0) - 1e-12;
}

/// Probability density of measuring x_theta at phase theta, as a double
/// Riemann sum over the position grid. Requires the position branch.
/// eta >= 0.999 routes to the lossless formula.
double prob_position(const CMat& rho_x, double x_theta, double theta,
                     const ReconstructionGrids& grids, double eta);

/// Momentum-basis analogue; rho_p must already be in the momentum basis.
double prob_momentum(const CMat& rho_p, double x_theta, double theta,
                     const ReconstructionGrids& grids, double eta);

/// L = -sum_n ln P(X_n, theta_n), using the dataset's efficiency and the
/// branch rule. Probabilities are floored at 1e-12 before the log.
double neg_log_likelihood(const CMat& rho_x, const QuadratureDataset& dataset,
                          const ReconstructionGrids& grids);

// --- explicit per-sample kernels -------------------------------------------

struct SampleKernel {
  double theta;
  double value;
  bool momentum_branch;
  CMat kernel;  // P = Re sum_jk kernel[j][k] * rho_branch[j][k]
};

struct KernelSet {
  std::vector<SampleKernel> kernels;
  std::vector<std::size_t> sample_to_kernel;
  std::size_t bytes = 0;
};

struct KernelOptions {
  double quantize = 0.0;  // (theta, X) quantization step; 0 = exact sharing
  std::size_t memory_cap_bytes = 2ull << 30;
};

KernelSet precompute_kernels(const QuadratureDataset& dataset,
                             const ReconstructionGrids& grids, double eta,
                             const KernelOptions& opts = {});

double kernel_prob(const SampleKernel& k, const CMat& rho_branch);

// --- fast exact evaluator ---------------------------------------------------

struct LikelihoodOptions {
  double prob_floor = 1e-12;
  double theta_bin = 0.0;  // optional phase quantization; 0 = exact
};

/// Likelihood (and its adjoint w.r.t. rho_x) evaluated by grouping samples
/// per phase and collapsing the density matrix along constant x - x'
/// anti-diagonals; exact up to summation order, O(groups * N^2 + n * N)
/// per evaluation.
class LikelihoodEngine {
 public:
  LikelihoodEngine(const QuadratureDataset& dataset,
                   const ReconstructionGrids& grids,
                   LikelihoodOptions opts = {});

  std::size_t sample_count() const { return n_samples_; }
  bool uses_momentum() const { return has_momentum_; }
  const ReconstructionGrids& grids() const { return grids_; }

  /// L for the given position-basis density matrix.
  double value(const CMat& rho_x) const;

  /// L plus the adjoint dL/d(rho_x) (complex pair convention: adj = dL/dRe +
  /// i dL/dIm per entry). `subset`, when non-null, is a 0/1 mask over samples.
  double value_and_adjoint(const CMat& rho_x, CMat& adj,
                           const std::vector<std::uint8_t>* subset = nullptr) const;
  double value(const CMat& rho_x, const std::vector<std::uint8_t>* subset) const;

 private:
  struct Family {
    double base;  // u = base + m * delta
    long m_min, m_max;
    std::size_t offset;
  };
  struct PairClasses {
    std::vector<Family> families;
    std::vector<std::uint32_t> cls;  // N*N row-major class index
    std::vector<double> u;           // per class
    std::size_t count = 0;
    static PairClasses build(const Grid& grid);
  };
  struct Group {
    bool momentum_branch;
    double den;        // sin(theta) or cos(theta), signed
    double g_coef;     // (1-eta)/(4 eta den^2), 0 when lossless
    double weight;     // delta * prefactor
    CVec diag;         // chirp phases over the branch grid
    std::vector<double> ts;               // X~ / den per sample
    std::vector<std::uint32_t> indices;   // global sample indices
  };

  void collapse(const Group& g, const CMat& rho, std::vector<Cmplx>& c) const;
  const PairClasses& classes(bool momentum_branch) const;

  ReconstructionGrids grids_;
  LikelihoodOptions opts_;
  std::size_t n_samples_ = 0;
  bool has_momentum_ = false;
  bool has_position_ = false;
  std::vector<Group> groups_;
  PairClasses pos_classes_, mom_classes_;
};

}  // namespace cvtomo

#endif
