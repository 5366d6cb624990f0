#include "cvtomo/grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cvtomo {

double Grid::abs_max() const {
  double m = 0.0;
  for (double x : points) m = std::max(m, std::abs(x));
  return m;
}

std::vector<std::pair<std::size_t, std::size_t>> Grid::runs() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t j = 0;
  for (const auto& [lo, hi] : intervals) {
    const double pad = delta * 1e-6;
    std::size_t first = j;
    while (j < points.size() && points[j] <= hi + pad) ++j;
    if (j == first) throw std::logic_error("grid interval holds no points");
    out.emplace_back(first, j - 1);
    (void)lo;
  }
  return out;
}

nlohmann::json Grid::to_json() const {
  nlohmann::json j;
  j["intervals"] = nlohmann::json::array();
  for (const auto& [lo, hi] : intervals) j["intervals"].push_back({lo, hi});
  j["points"] = points.size();
  j["delta"] = delta;
  return j;
}

Grid Grid::from_json(const nlohmann::json& j) {
  std::vector<std::pair<double, double>> ivs;
  for (const auto& iv : j.at("intervals"))
    ivs.emplace_back(iv.at(0).get<double>(), iv.at(1).get<double>());
  return make_grid(ivs, j.at("points").get<int>());
}

namespace {

std::vector<std::pair<double, double>> sorted_checked(
    std::vector<std::pair<double, double>> ivs) {
  if (ivs.empty()) throw std::invalid_argument("make_grid: no intervals");
  std::sort(ivs.begin(), ivs.end());
  for (std::size_t i = 0; i < ivs.size(); ++i) {
    if (!(ivs[i].second > ivs[i].first))
      throw std::invalid_argument("make_grid: interval of non-positive width");
    if (i > 0 && ivs[i].first <= ivs[i - 1].second)
      throw std::invalid_argument("make_grid: overlapping intervals");
  }
  return ivs;
}

// Number of step-delta points fitting inside each interval (>= 1 each).
long count_points(const std::vector<std::pair<double, double>>& ivs,
                  double delta) {
  long n = 0;
  for (const auto& [lo, hi] : ivs)
    n += static_cast<long>(std::floor((hi - lo) / delta * (1.0 + 1e-12))) + 1;
  return n;
}

}  // namespace

Grid make_grid(const std::vector<std::pair<double, double>>& intervals,
               int total_points) {
  auto ivs = sorted_checked(intervals);
  const std::size_t ni = ivs.size();
  if (total_points < 2 * static_cast<int>(ni))
    throw std::invalid_argument("make_grid: need at least 2 points per interval");

  Grid g;
  g.intervals = ivs;

  if (ni == 1) {
    const auto [lo, hi] = ivs[0];
    const int n = total_points;
    g.delta = (hi - lo) / (n - 1);
    g.points.resize(n);
    for (int m = 0; m < n; ++m) g.points[m] = lo + m * g.delta;
    g.points.back() = hi;
    return g;
  }

  double wsum = 0.0, wmin = ivs[0].second - ivs[0].first;
  for (const auto& [lo, hi] : ivs) {
    wsum += hi - lo;
    wmin = std::min(wmin, hi - lo);
  }
  // Largest shared step for which the intervals hold >= total_points points.
  double hi_d = std::min(wsum / (total_points - static_cast<int>(ni)), wmin);
  double lo_d = hi_d;
  while (count_points(ivs, lo_d) < total_points) lo_d *= 0.5;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo_d + hi_d);
    if (count_points(ivs, mid) >= total_points)
      lo_d = mid;
    else
      hi_d = mid;
  }
  g.delta = lo_d;

  std::vector<long> counts(ni);
  long total = 0;
  for (std::size_t i = 0; i < ni; ++i) {
    counts[i] = static_cast<long>(
                    std::floor((ivs[i].second - ivs[i].first) / g.delta *
                               (1.0 + 1e-12))) +
                1;
    total += counts[i];
  }
  // The step search can overshoot by a point or two when several interval
  // counts jump at the same delta; trim from the largest runs.
  while (total > total_points) {
    std::size_t imax = 0;
    for (std::size_t i = 1; i < ni; ++i)
      if (counts[i] > counts[imax]) imax = i;
    --counts[imax];
    --total;
  }
  for (std::size_t i = 0; i < ni; ++i)
    if (counts[i] < 2)
      throw std::invalid_argument("make_grid: interval too short for 2 points");

  for (std::size_t i = 0; i < ni; ++i) {
    const auto [lo, hi] = ivs[i];
    const double start = lo + 0.5 * ((hi - lo) - (counts[i] - 1) * g.delta);
    for (long m = 0; m < counts[i]; ++m) g.points.push_back(start + m * g.delta);
  }
  return g;
}

BasisChange make_basis_change(const Grid& momentum, const Grid& position) {
  BasisChange bc;
  bc.momentum = momentum;
  bc.position = position;
  const double scale =
      std::sqrt(position.delta * momentum.delta / (2.0 * kPi));
  bc.kernel.resize(momentum.size(), position.size());
  for (std::size_t k = 0; k < momentum.size(); ++k)
    for (std::size_t j = 0; j < position.size(); ++j)
      bc.kernel(k, j) =
          std::polar(scale, -momentum.points[k] * position.points[j]);
  return bc;
}

CMat to_momentum(const CMat& rho_x, const BasisChange& change) {
  if (rho_x.rows() != static_cast<Eigen::Index>(change.position.size()) ||
      rho_x.cols() != rho_x.rows())
    throw std::invalid_argument("to_momentum: dimension mismatch");
  return change.kernel * rho_x * change.kernel.adjoint();
}

CMat to_position(const CMat& rho_p, const BasisChange& change) {
  if (rho_p.rows() != static_cast<Eigen::Index>(change.momentum.size()) ||
      rho_p.cols() != rho_p.rows())
    throw std::invalid_argument("to_position: dimension mismatch");
  return change.kernel.adjoint() * rho_p * change.kernel;
}

double hermiticity_defect(const CMat& m) {
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

std::pair<RVec, CMat> eig_hermitian(const CMat& m) {
  if (m.rows() != m.cols())
    throw std::invalid_argument("eig_hermitian: matrix not square");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if (hermiticity_defect(m) > 1e-9 * scale)
    throw std::invalid_argument("eig_hermitian: input not Hermitian");
  Eigen::SelfAdjointEigenSolver<CMat> es(m);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("eig_hermitian: eigensolver failed");
  return {es.eigenvalues(), es.eigenvectors()};
}

}  // namespace cvtomo
