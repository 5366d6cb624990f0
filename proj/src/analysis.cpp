#include "cvtomo/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cvtomo {

namespace {

struct AntiDiagonal {
  std::vector<Cmplx> rho;  // matrix entries along x_j + x_k = 2x
  std::vector<double> y;   // (x_j - x_k) / 2
};

bool find_index(const std::vector<double>& pts, double x, double tol,
                std::size_t& idx) {
  auto it = std::lower_bound(pts.begin(), pts.end(), x - tol);
  if (it == pts.end() || std::abs(*it - x) > tol) return false;
  idx = static_cast<std::size_t>(it - pts.begin());
  return true;
}

RMat wigner_row_values(const AntiDiagonal& diag, const std::vector<double>& ps) {
  RMat row(1, ps.size());
  for (std::size_t pi = 0; pi < ps.size(); ++pi) {
    Cmplx acc = 0.0;
    for (std::size_t m = 0; m < diag.rho.size(); ++m)
      acc += diag.rho[m] * std::polar(1.0, -2.0 * ps[pi] * diag.y[m]);
    row(0, pi) = acc.real() / kPi;
  }
  return row;
}

}  // namespace

WignerGrid wigner(const CMat& rho, const Grid& grid,
                  const std::vector<double>& xs,
                  const std::vector<double>& ps) {
  if (rho.rows() != static_cast<Eigen::Index>(grid.size()))
    throw std::invalid_argument("wigner: dimension mismatch");
  WignerGrid w;
  w.xs = xs;
  w.ps = ps;
  w.values = RMat::Zero(xs.size(), ps.size());
  w.valid.assign(xs.size(), 0);
  const double tol = 1e-6 * grid.delta;

  for (std::size_t xi = 0; xi < xs.size(); ++xi) {
    AntiDiagonal diag;
    for (std::size_t j = 0; j < grid.size(); ++j) {
      std::size_t k;
      if (!find_index(grid.points, 2.0 * xs[xi] - grid.points[j], tol, k))
        continue;
      diag.rho.push_back(rho(j, k));
      diag.y.push_back(0.5 * (grid.points[j] - grid.points[k]));
    }
    if (diag.rho.empty()) continue;
    w.valid[xi] = 1;
    w.values.row(xi) = wigner_row_values(diag, ps);
  }
  return w;
}

WignerGrid wigner(const TrainedModel& model, const std::vector<double>& xs,
                  const std::vector<double>& ps) {
  const Grid& g = model.grid;
  auto inside = [&](double x) {
    for (const auto& [lo, hi] : g.intervals)
      if (x >= lo - 1e-9 && x <= hi + 1e-9) return true;
    return false;
  };

  // Half-step y sampling exercises the network's interpolation while the
  // 1/delta entry convention keeps the quadrature weight dy/delta = 1/2.
  const double dy = 0.5 * g.delta;
  const long m_max =
      static_cast<long>(std::ceil((g.max() - g.min()) / dy)) + 1;

  std::vector<std::pair<double, double>> pairs;
  std::vector<std::vector<double>> row_y(xs.size());
  std::vector<std::size_t> row_begin(xs.size() + 1, 0);
  for (std::size_t xi = 0; xi < xs.size(); ++xi) {
    row_begin[xi] = pairs.size();
    if (!inside(xs[xi])) continue;
    for (long m = -m_max; m <= m_max; ++m) {
      const double y = m * dy;
      if (!inside(xs[xi] + y) || !inside(xs[xi] - y)) continue;
      pairs.emplace_back(xs[xi] + y, xs[xi] - y);
      row_y[xi].push_back(y);
    }
  }
  row_begin[xs.size()] = pairs.size();

  const auto vals = query_density(model, pairs);

  WignerGrid w;
  w.xs = xs;
  w.ps = ps;
  w.values = RMat::Zero(xs.size(), ps.size());
  w.valid.assign(xs.size(), 0);
  for (std::size_t xi = 0; xi < xs.size(); ++xi) {
    if (row_y[xi].empty()) continue;
    AntiDiagonal diag;
    diag.y = row_y[xi];
    diag.rho.assign(vals.begin() + row_begin[xi],
                    vals.begin() + row_begin[xi] + row_y[xi].size());
    for (auto& r : diag.rho) r *= dy / g.delta;
    w.valid[xi] = 1;
    w.values.row(xi) = wigner_row_values(diag, ps);
  }
  return w;
}

double fidelity(const CMat& rho, const CMat& sigma) {
  if (rho.rows() != sigma.rows())
    throw std::invalid_argument("fidelity: dimension mismatch");
  // F(rho, rho) = (Tr rho)^2 exactly; skips the sqrt's noise amplification
  // on near-null eigenvalues
  if (rho.rows() == sigma.rows() && rho.cols() == sigma.cols() &&
      rho == sigma) {
    const double tr = rho.trace().real();
    return tr * tr;
  }
  auto [lr, vr] = eig_hermitian(rho);
  auto [ls, vs] = eig_hermitian(sigma);
  if (lr.minCoeff() < -1e-8 || ls.minCoeff() < -1e-8)
    throw std::invalid_argument("fidelity: input is not PSD");
  // zero out numerically-null modes; sqrt() would otherwise inflate
  // O(eps) eigenvalue noise into O(sqrt(eps)) fidelity error
  const double floor_r = 1e-13 * std::max(lr.maxCoeff(), 0.0);
  RVec sq = (lr.array() > floor_r).select(lr, RVec::Zero(lr.size()))
                .cwiseSqrt();
  const CMat sqrt_rho = vr * sq.asDiagonal() * vr.adjoint();
  const CMat inner = sqrt_rho * sigma * sqrt_rho;
  auto [li, vi] = eig_hermitian(0.5 * (inner + inner.adjoint()));
  const double floor_i = 1e-13 * std::max(li.maxCoeff(), 0.0);
  const double root_sum =
      (li.array() > floor_i).select(li, RVec::Zero(li.size()))
          .cwiseSqrt()
          .sum();
  return root_sum * root_sum;
}

double purity(const CMat& rho) { return rho.squaredNorm(); }

nlohmann::json RegionSuggestion::to_json() const {
  nlohmann::json pos = nlohmann::json::array();
  for (const auto& [lo, hi] : position_intervals) pos.push_back({lo, hi});
  return {{"position_intervals", pos},
          {"momentum_interval", {momentum_interval.first,
                                 momentum_interval.second}},
          {"delta_x", delta_x},
          {"delta_p", delta_p},
          {"x_max", x_max},
          {"p_max", p_max}};
}

RegionSuggestion RegionSuggestion::from_json(const nlohmann::json& j) {
  RegionSuggestion r;
  for (const auto& iv : j.at("position_intervals"))
    r.position_intervals.emplace_back(iv.at(0).get<double>(),
                                      iv.at(1).get<double>());
  r.momentum_interval = {j.at("momentum_interval").at(0).get<double>(),
                         j.at("momentum_interval").at(1).get<double>()};
  r.delta_x = j.at("delta_x").get<double>();
  r.delta_p = j.at("delta_p").get<double>();
  r.x_max = j.at("x_max").get<double>();
  r.p_max = j.at("p_max").get<double>();
  return r;
}

Grid RegionSuggestion::position_grid() const {
  double width = 0.0;
  for (const auto& [lo, hi] : position_intervals) width += hi - lo;
  const int n = static_cast<int>(std::ceil(width / delta_x)) +
                static_cast<int>(position_intervals.size());
  return make_grid(position_intervals, n);
}

Grid RegionSuggestion::momentum_grid() const {
  const double width = momentum_interval.second - momentum_interval.first;
  const int n = static_cast<int>(std::ceil(width / delta_p)) + 1;
  return make_grid({momentum_interval}, n);
}

namespace {

double quantile(std::vector<double> sorted, double q) {
  const double pos = q * (sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double f = pos - lo;
  return (1.0 - f) * sorted[lo] + f * sorted[hi];
}

double silverman_bandwidth(const std::vector<double>& sorted) {
  const double n = static_cast<double>(sorted.size());
  double mean = 0.0;
  for (double v : sorted) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : sorted) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / std::max(1.0, n - 1.0));
  const double iqr = quantile(sorted, 0.75) - quantile(sorted, 0.25);
  double spread = sd;
  if (iqr > 0.0) spread = std::min(spread, iqr / 1.34);
  return 0.9 * spread * std::pow(n, -0.2);
}

// Clusters sorted values at gaps larger than 3x the Silverman bandwidth,
// keeps the central mass_quantile of each cluster, pads by margin, and
// merges any overlap.
std::vector<std::pair<double, double>> cluster_intervals(
    std::vector<double>& values, double mass_quantile, double margin) {
  std::sort(values.begin(), values.end());
  const double gap = 3.0 * silverman_bandwidth(values);
  std::vector<std::pair<std::size_t, std::size_t>> clusters;
  std::size_t start = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] - values[i - 1] > gap) {
      clusters.emplace_back(start, i - 1);
      start = i;
    }
  }
  clusters.emplace_back(start, values.size() - 1);

  const double trim = 0.5 * (1.0 - mass_quantile);
  std::vector<std::pair<double, double>> out;
  for (const auto& [a, b] : clusters) {
    std::vector<double> part(values.begin() + a, values.begin() + b + 1);
    const double lo = quantile(part, trim) - margin;
    const double hi = quantile(part, 1.0 - trim) + margin;
    if (!out.empty() && lo <= out.back().second)
      out.back().second = std::max(out.back().second, hi);
    else
      out.emplace_back(lo, hi);
  }
  return out;
}

}  // namespace

RegionSuggestion infer_regions(const QuadratureDataset& dataset,
                               double phase_window, double mass_quantile,
                               double margin) {
  if (!(phase_window > 0.0) || !(mass_quantile > 0.0) || mass_quantile > 1.0)
    throw std::invalid_argument("infer_regions: bad window or quantile");
  std::vector<double> xs, ps;
  for (const auto& s : dataset.samples) {
    // theta ~ pi measures -X; fold it onto the position window.
    if (s.theta <= phase_window)
      xs.push_back(s.value);
    else if (s.theta >= kPi - phase_window)
      xs.push_back(-s.value);
    else if (std::abs(s.theta - 0.5 * kPi) <= phase_window)
      ps.push_back(s.value);
  }
  if (xs.size() < 50 || ps.size() < 50)
    throw std::runtime_error(
        "infer_regions: fewer than 50 samples near theta = 0 or pi/2; "
        "use a phase comb or widen the window");

  RegionSuggestion r;
  r.position_intervals = cluster_intervals(xs, mass_quantile, margin);
  const auto mom = cluster_intervals(ps, mass_quantile, margin);
  r.momentum_interval = {mom.front().first, mom.back().second};

  for (const auto& [lo, hi] : r.position_intervals)
    r.x_max = std::max({r.x_max, std::abs(lo), std::abs(hi)});
  r.p_max = std::max(std::abs(r.momentum_interval.first),
                     std::abs(r.momentum_interval.second));
  r.delta_x = 1.0 / r.p_max / 1.5;
  r.delta_p = 1.0 / r.x_max / 1.5;
  return r;
}

}  // namespace cvtomo
