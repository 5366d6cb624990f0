#ifndef CVTOMO_GRID_HPP
#define CVTOMO_GRID_HPP

#include <complex>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace cvtomo {

using Cmplx = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

inline constexpr double kPi = 3.14159265358979323846;

/// Coordinate grid: union of disjoint intervals sampled with one uniform
/// step. Quadrature units are dimensionless, hbar = 1, X = (a + a^dag)/sqrt(2).
struct Grid {
  std::vector<std::pair<double, double>> intervals;
  std::vector<double> points;
  double delta = 0.0;

  std::size_t size() const { return points.size(); }
  double min() const { return points.front(); }
  double max() const { return points.back(); }
  /// Largest |coordinate| on the grid.
  double abs_max() const;
  /// Index ranges [first, last] of the run of points inside each interval.
  std::vector<std::pair<std::size_t, std::size_t>> runs() const;

  nlohmann::json to_json() const;
  static Grid from_json(const nlohmann::json& j);
};

/// Builds a grid over disjoint intervals with `total_points` points sharing a
/// single step. A single interval includes both endpoints exactly; with
/// several intervals each run of points is centered inside its interval.
Grid make_grid(const std::vector<std::pair<double, double>>& intervals,
               int total_points);

/// Dense position -> momentum basis-change kernel,
/// F[k][j] = exp(-i p_k x_j) sqrt(dX dP / 2 pi).
/// The sqrt(dX dP) scaling keeps the trace convention (entries carry the grid
/// step) intact on both sides, so trace(F rho F^dag) = trace(rho) whenever the
/// grids resolve the state.
struct BasisChange {
  Grid momentum;  // rows
  Grid position;  // cols
  CMat kernel;
};

BasisChange make_basis_change(const Grid& momentum, const Grid& position);

/// rho(p,p') = F rho(x,x') F^dag.
CMat to_momentum(const CMat& rho_x, const BasisChange& change);
/// Inverse map, rho(x,x') = F^dag rho(p,p') F.
CMat to_position(const CMat& rho_p, const BasisChange& change);

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
/// Throws if the input is not Hermitian within tolerance.
std::pair<RVec, CMat> eig_hermitian(const CMat& m);

/// Max |M - M^dag| entry.
double hermiticity_defect(const CMat& m);

}  // namespace cvtomo

#endif
