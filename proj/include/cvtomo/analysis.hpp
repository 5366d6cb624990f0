#ifndef CVTOMO_ANALYSIS_HPP
#define CVTOMO_ANALYSIS_HPP

#include "cvtomo/nn.hpp"

namespace cvtomo {

struct WignerGrid {
  std::vector<double> xs, ps;
  RMat values;                      // xs.size() rows, ps.size() cols
  std::vector<std::uint8_t> valid;  // per x row: supported by the source
};

/// W(x, p) = (1/pi) int rho(x+y, x-y) e^{-2ipy} dy, evaluated as a sum over
/// the source grid's anti-diagonal through 2x. Rows whose x is not
/// representable on the grid are flagged invalid rather than extrapolated.
WignerGrid wigner(const CMat& rho, const Grid& grid,
                  const std::vector<double>& xs, const std::vector<double>& ps);

/// Model-backed Wigner: queries the network at the exact (x+y, x-y) pairs,
/// restricted to the training-grid intervals (zero outside by construction).
WignerGrid wigner(const TrainedModel& model, const std::vector<double>& xs,
                  const std::vector<double>& ps);

/// Uhlmann fidelity [Tr sqrt(sqrt(rho) sigma sqrt(rho))]^2 via Hermitian
/// eigendecompositions. Rejects eigenvalues below -1e-8.
double fidelity(const CMat& rho, const CMat& sigma);

/// Tr(rho^2).
double purity(const CMat& rho);

struct RegionSuggestion {
  std::vector<std::pair<double, double>> position_intervals;
  std::pair<double, double> momentum_interval;
  double delta_x = 0.0, delta_p = 0.0;
  double x_max = 0.0, p_max = 0.0;

  nlohmann::json to_json() const;
  static RegionSuggestion from_json(const nlohmann::json& j);

  /// Grids realizing the suggestion (point counts chosen from the deltas).
  Grid position_grid() const;
  Grid momentum_grid() const;
};

/// Region-of-interest inference from the samples at theta ~ 0 (position)
/// and theta ~ pi/2 (momentum): 1-D gap clustering (threshold 3x Silverman
/// bandwidth), central mass_quantile per cluster, padded by margin;
/// delta_x = 1/p_max and delta_p = 1/x_max, each divided by a 1.5 safety
/// factor.
RegionSuggestion infer_regions(const QuadratureDataset& dataset,
                               double phase_window, double mass_quantile,
                               double margin = 4.5);

}  // namespace cvtomo

#endif
