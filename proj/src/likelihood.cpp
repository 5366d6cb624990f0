#include "cvtomo/likelihood.hpp"

#include <cmath>
#include <iostream>
#include <map>
#include <stdexcept>

namespace cvtomo {

namespace {
constexpr double kLosslessEta = 0.999;  // above this the (1-eta) kernel blows up
}

ReconstructionGrids ReconstructionGrids::make(const Grid& position,
                                              const Grid& momentum) {
  ReconstructionGrids g;
  g.position = position;
  g.momentum = momentum;
  g.change = make_basis_change(momentum, position);
  const double p_max = momentum.abs_max(), x_max = position.abs_max();
  if (position.delta > 1.0 / p_max * (1.0 + 1e-9))
    std::cerr << "warning: position step " << position.delta
              << " exceeds 1/P_max = " << 1.0 / p_max << "\n";
  if (momentum.delta > 1.0 / x_max * (1.0 + 1e-9))
    std::cerr << "warning: momentum step " << momentum.delta
              << " exceeds 1/X_max = " << 1.0 / x_max << "\n";
  return g;
}

nlohmann::json ReconstructionGrids::to_json() const {
  return {{"position", position.to_json()}, {"momentum", momentum.to_json()}};
}

ReconstructionGrids ReconstructionGrids::from_json(const nlohmann::json& j) {
  return make(Grid::from_json(j.at("position")),
              Grid::from_json(j.at("momentum")));
}

namespace {

struct BranchParams {
  double den;     // sin(theta) or cos(theta), signed
  double x_eff;   // X / sqrt(eta) (or X when lossless)
  double pref;    // 1 / (2 pi sqrt(eta) |den|)
  double g_coef;  // (1 - eta) / (4 eta den^2)
};

BranchParams branch_params(double x_theta, double den, double eta) {
  BranchParams p;
  p.den = den;
  if (eta >= kLosslessEta) {
    p.x_eff = x_theta;
    p.pref = 1.0 / (2.0 * kPi * std::abs(den));
    p.g_coef = 0.0;
  } else {
    const double sq = std::sqrt(eta);
    p.x_eff = x_theta / sq;
    p.pref = 1.0 / (2.0 * kPi * sq * std::abs(den));
    p.g_coef = (1.0 - eta) / (4.0 * eta * den * den);
  }
  return p;
}

double direct_prob(const CMat& rho, const Grid& grid, const BranchParams& bp,
                   double chirp_sign) {
  // chirp_sign: +1 position branch (cot theta), -1 momentum branch (tan theta)
  const std::size_t n = grid.size();
  Cmplx acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double xk = grid.points[k];
    for (std::size_t j = 0; j < n; ++j) {
      const double xj = grid.points[j];
      const double u = xj - xk;
      const double phase =
          -(u / bp.den) * bp.x_eff + chirp_sign * 0.5 * (xj * xj - xk * xk);
      acc += rho(j, k) * std::polar(std::exp(-bp.g_coef * u * u), phase);
    }
  }
  return std::max(0.0, bp.pref * grid.delta * acc.real());
}

}  // namespace

double prob_position(const CMat& rho_x, double x_theta, double theta,
                     const ReconstructionGrids& grids, double eta) {
  if (!position_branch(theta))
    throw std::invalid_argument("prob_position: |sin theta| < 1/sqrt(2)");
  if (rho_x.rows() != static_cast<Eigen::Index>(grids.position.size()))
    throw std::invalid_argument("prob_position: dimension mismatch");
  const double s = std::sin(theta), c = std::cos(theta);
  return direct_prob(rho_x, grids.position, branch_params(x_theta, s, eta),
                     c / s);
}

double prob_momentum(const CMat& rho_p, double x_theta, double theta,
                     const ReconstructionGrids& grids, double eta) {
  if (position_branch(theta))
    throw std::invalid_argument("prob_momentum: |sin theta| >= 1/sqrt(2)");
  if (rho_p.rows() != static_cast<Eigen::Index>(grids.momentum.size()))
    throw std::invalid_argument("prob_momentum: dimension mismatch");
  // momentum-basis kernel carries e^{+i u X / cos(theta)}; the sign flip is
  // absorbed into the signed denominator
  const double s = std::sin(theta), c = std::cos(theta);
  return direct_prob(rho_p, grids.momentum, branch_params(x_theta, -c, eta),
                     -s / c);
}

double neg_log_likelihood(const CMat& rho_x, const QuadratureDataset& dataset,
                          const ReconstructionGrids& grids) {
  if (dataset.samples.empty())
    throw std::invalid_argument("neg_log_likelihood: empty dataset");
  const double eta = dataset.efficiency;
  CMat rho_p;
  double L = 0.0;
  for (const auto& s : dataset.samples) {
    double p;
    if (position_branch(s.theta)) {
      p = prob_position(rho_x, s.value, s.theta, grids, eta);
    } else {
      if (rho_p.size() == 0) rho_p = to_momentum(rho_x, grids.change);
      p = prob_momentum(rho_p, s.value, s.theta, grids, eta);
    }
    L -= std::log(std::max(p, 1e-12));
  }
  return L;
}

// --- explicit kernels --------------------------------------------------------

namespace {
CMat build_kernel(const Grid& grid, const BranchParams& bp, double chirp_sign) {
  const std::size_t n = grid.size();
  CMat k(n, n);
  for (std::size_t kk = 0; kk < n; ++kk) {
    const double xk = grid.points[kk];
    for (std::size_t j = 0; j < n; ++j) {
      const double xj = grid.points[j];
      const double u = xj - xk;
      const double phase =
          -(u / bp.den) * bp.x_eff + chirp_sign * 0.5 * (xj * xj - xk * xk);
      k(j, kk) = bp.pref * grid.delta *
                 std::polar(std::exp(-bp.g_coef * u * u), phase);
    }
  }
  return k;
}
}  // namespace

KernelSet precompute_kernels(const QuadratureDataset& dataset,
                             const ReconstructionGrids& grids, double eta,
                             const KernelOptions& opts) {
  KernelSet set;
  set.sample_to_kernel.resize(dataset.samples.size());
  std::map<std::pair<long long, long long>, std::size_t> seen;
  auto key_of = [&](double theta, double x) {
    if (opts.quantize <= 0.0)
      return std::make_pair(
          static_cast<long long>(std::llround(theta / 1e-15)),
          static_cast<long long>(std::llround(x / 1e-15)));
    return std::make_pair(
        static_cast<long long>(std::llround(theta / opts.quantize)),
        static_cast<long long>(std::llround(x / opts.quantize)));
  };
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    const auto& s = dataset.samples[i];
    double theta = s.theta, x = s.value;
    if (opts.quantize > 0.0) {
      theta = std::round(theta / opts.quantize) * opts.quantize;
      x = std::round(x / opts.quantize) * opts.quantize;
    }
    const auto key = key_of(theta, x);
    auto it = seen.find(key);
    if (it == seen.end()) {
      SampleKernel sk;
      sk.theta = theta;
      sk.value = x;
      sk.momentum_branch = !position_branch(theta);
      const double sn = std::sin(theta), cs = std::cos(theta);
      if (sk.momentum_branch)
        sk.kernel = build_kernel(grids.momentum, branch_params(x, -cs, eta),
                                 -sn / cs);
      else
        sk.kernel =
            build_kernel(grids.position, branch_params(x, sn, eta), cs / sn);
      set.bytes += sk.kernel.size() * sizeof(Cmplx);
      if (set.bytes > opts.memory_cap_bytes)
        throw std::runtime_error("precompute_kernels: memory cap exceeded");
      it = seen.emplace(key, set.kernels.size()).first;
      set.kernels.push_back(std::move(sk));
    }
    set.sample_to_kernel[i] = it->second;
  }
  return set;
}

double kernel_prob(const SampleKernel& k, const CMat& rho_branch) {
  return std::max(0.0, k.kernel.cwiseProduct(rho_branch).sum().real());
}

// --- fast engine -------------------------------------------------------------

LikelihoodEngine::PairClasses LikelihoodEngine::PairClasses::build(
    const Grid& grid) {
  PairClasses pc;
  const auto runs = grid.runs();
  const double delta = grid.delta;
  const double tol = 1e-9 * delta;
  const std::size_t n = grid.size();

  struct RunPair {
    std::size_t a0, b0, na, nb, fam;
    long m0;
  };
  std::vector<RunPair> pairs;
  for (const auto& [a0, a1] : runs) {
    for (const auto& [b0, b1] : runs) {
      RunPair rp;
      rp.a0 = a0;
      rp.b0 = b0;
      rp.na = a1 - a0 + 1;
      rp.nb = b1 - b0 + 1;
      const double base = grid.points[a0] - grid.points[b0];
      std::size_t fam = pc.families.size();
      long m0 = 0;
      for (std::size_t f = 0; f < pc.families.size(); ++f) {
        const double q = (base - pc.families[f].base) / delta;
        const long m = std::lround(q);
        if (std::abs(base - pc.families[f].base - m * delta) < tol) {
          fam = f;
          m0 = m;
          break;
        }
      }
      if (fam == pc.families.size())
        pc.families.push_back({base, 0, 0, 0});
      auto& f = pc.families[fam];
      f.m_min = std::min(f.m_min, m0 - static_cast<long>(rp.nb) + 1);
      f.m_max = std::max(f.m_max, m0 + static_cast<long>(rp.na) - 1);
      rp.fam = fam;
      rp.m0 = m0;
      pairs.push_back(rp);
    }
  }
  for (auto& f : pc.families) {
    f.offset = pc.count;
    pc.count += static_cast<std::size_t>(f.m_max - f.m_min + 1);
  }
  pc.cls.resize(n * n);
  pc.u.resize(pc.count);
  for (const auto& rp : pairs) {
    const auto& f = pc.families[rp.fam];
    for (std::size_t dk = 0; dk < rp.nb; ++dk) {
      const std::size_t k = rp.b0 + dk;
      const std::size_t col = k * n;
      for (std::size_t dj = 0; dj < rp.na; ++dj) {
        const long m = rp.m0 + static_cast<long>(dj) - static_cast<long>(dk);
        const std::uint32_t idx =
            static_cast<std::uint32_t>(f.offset + (m - f.m_min));
        pc.cls[rp.a0 + dj + col] = idx;
        pc.u[idx] = f.base + m * delta;
      }
    }
  }
  return pc;
}

LikelihoodEngine::LikelihoodEngine(const QuadratureDataset& dataset,
                                   const ReconstructionGrids& grids,
                                   LikelihoodOptions opts)
    : grids_(grids), opts_(opts), n_samples_(dataset.samples.size()) {
  if (dataset.samples.empty())
    throw std::invalid_argument("LikelihoodEngine: empty dataset");
  const double eta = dataset.efficiency;
  const bool lossless = eta >= kLosslessEta;
  const double sq_eta = lossless ? 1.0 : std::sqrt(eta);

  std::map<long long, std::size_t> group_of;
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    double theta = dataset.samples[i].theta;
    if (opts_.theta_bin > 0.0)
      theta = std::round(theta / opts_.theta_bin) * opts_.theta_bin;
    const long long key = static_cast<long long>(std::llround(theta / 1e-15));
    auto it = group_of.find(key);
    if (it == group_of.end()) {
      Group g;
      g.momentum_branch = !position_branch(theta);
      const double sn = std::sin(theta), cs = std::cos(theta);
      g.den = g.momentum_branch ? -cs : sn;
      g.g_coef = lossless ? 0.0 : (1.0 - eta) / (4.0 * eta * g.den * g.den);
      const Grid& grid = g.momentum_branch ? grids_.momentum : grids_.position;
      g.weight = grid.delta / (2.0 * kPi * sq_eta * std::abs(g.den));
      const double chirp = g.momentum_branch ? -sn / cs : cs / sn;
      g.diag.resize(grid.size());
      for (std::size_t j = 0; j < grid.size(); ++j)
        g.diag(j) = std::polar(1.0, 0.5 * chirp * grid.points[j] * grid.points[j]);
      (g.momentum_branch ? has_momentum_ : has_position_) = true;
      it = group_of.emplace(key, groups_.size()).first;
      groups_.push_back(std::move(g));
    }
    auto& g = groups_[it->second];
    g.ts.push_back(dataset.samples[i].value / sq_eta / g.den);
    g.indices.push_back(static_cast<std::uint32_t>(i));
  }
  if (has_position_) pos_classes_ = PairClasses::build(grids_.position);
  if (has_momentum_) mom_classes_ = PairClasses::build(grids_.momentum);
}

const LikelihoodEngine::PairClasses& LikelihoodEngine::classes(
    bool momentum_branch) const {
  return momentum_branch ? mom_classes_ : pos_classes_;
}

void LikelihoodEngine::collapse(const Group& g, const CMat& rho,
                                std::vector<Cmplx>& c) const {
  const auto& pc = classes(g.momentum_branch);
  const std::size_t n = static_cast<std::size_t>(rho.rows());
  c.assign(pc.count, Cmplx(0, 0));
  for (std::size_t k = 0; k < n; ++k) {
    const Cmplx dk = std::conj(g.diag(k));
    const Cmplx* col = rho.data() + k * n;
    const std::uint32_t* cl = pc.cls.data() + k * n;
    for (std::size_t j = 0; j < n; ++j)
      c[cl[j]] += g.diag(j) * dk * col[j];
  }
  // per-class weight: delta * prefactor * Gaussian loss factor
  for (std::size_t m = 0; m < pc.count; ++m) {
    double w = g.weight;
    if (g.g_coef != 0.0) w *= std::exp(-g.g_coef * pc.u[m] * pc.u[m]);
    c[m] *= w;
  }
}

double LikelihoodEngine::value(const CMat& rho_x) const {
  return value(rho_x, nullptr);
}

double LikelihoodEngine::value(const CMat& rho_x,
                               const std::vector<std::uint8_t>* subset) const {
  CMat rho_p;
  if (has_momentum_) rho_p = to_momentum(rho_x, grids_.change);
  double L = 0.0;
  std::vector<Cmplx> c;
  for (const auto& g : groups_) {
    collapse(g, g.momentum_branch ? rho_p : rho_x, c);
    const auto& pc = classes(g.momentum_branch);
    const double delta =
        (g.momentum_branch ? grids_.momentum : grids_.position).delta;
    for (std::size_t si = 0; si < g.ts.size(); ++si) {
      if (subset && !(*subset)[g.indices[si]]) continue;
      const double t = g.ts[si];
      Cmplx acc = 0.0;
      const Cmplx step = std::polar(1.0, -delta * t);
      for (const auto& f : pc.families) {
        Cmplx z = std::polar(1.0, -(f.base + f.m_min * delta) * t);
        const std::size_t cnt = static_cast<std::size_t>(f.m_max - f.m_min + 1);
        const Cmplx* cf = c.data() + f.offset;
        for (std::size_t m = 0; m < cnt; ++m) {
          acc += cf[m] * z;
          z *= step;
        }
      }
      L -= std::log(std::max(acc.real(), opts_.prob_floor));
    }
  }
  return L;
}

double LikelihoodEngine::value_and_adjoint(
    const CMat& rho_x, CMat& adj,
    const std::vector<std::uint8_t>* subset) const {
  const std::size_t n_pos = grids_.position.size();
  const std::size_t n_mom = grids_.momentum.size();
  CMat rho_p;
  if (has_momentum_) rho_p = to_momentum(rho_x, grids_.change);
  adj = CMat::Zero(n_pos, n_pos);
  CMat adj_p;
  if (has_momentum_) adj_p = CMat::Zero(n_mom, n_mom);

  double L = 0.0;
  std::vector<Cmplx> c, chat;
  std::vector<double> ws;
  for (const auto& g : groups_) {
    const CMat& rho = g.momentum_branch ? rho_p : rho_x;
    collapse(g, rho, c);
    const auto& pc = classes(g.momentum_branch);
    const double delta =
        (g.momentum_branch ? grids_.momentum : grids_.position).delta;

    ws.assign(g.ts.size(), 0.0);
    for (std::size_t si = 0; si < g.ts.size(); ++si) {
      if (subset && !(*subset)[g.indices[si]]) continue;
      const double t = g.ts[si];
      Cmplx acc = 0.0;
      const Cmplx step = std::polar(1.0, -delta * t);
      for (const auto& f : pc.families) {
        Cmplx z = std::polar(1.0, -(f.base + f.m_min * delta) * t);
        const std::size_t cnt = static_cast<std::size_t>(f.m_max - f.m_min + 1);
        const Cmplx* cf = c.data() + f.offset;
        for (std::size_t m = 0; m < cnt; ++m) {
          acc += cf[m] * z;
          z *= step;
        }
      }
      const double p = std::max(acc.real(), opts_.prob_floor);
      L -= std::log(p);
      ws[si] = -1.0 / p;
    }

    chat.assign(pc.count, Cmplx(0, 0));
    for (std::size_t si = 0; si < g.ts.size(); ++si) {
      if (ws[si] == 0.0) continue;
      const double t = g.ts[si];
      const double w = ws[si];
      const Cmplx step = std::polar(1.0, delta * t);  // conj of forward step
      for (const auto& f : pc.families) {
        Cmplx z = std::polar(w, (f.base + f.m_min * delta) * t);
        const std::size_t cnt = static_cast<std::size_t>(f.m_max - f.m_min + 1);
        Cmplx* ch = chat.data() + f.offset;
        for (std::size_t m = 0; m < cnt; ++m) {
          ch[m] += z;
          z *= step;
        }
      }
    }
    for (std::size_t m = 0; m < pc.count; ++m) {
      double w = g.weight;
      if (g.g_coef != 0.0) w *= std::exp(-g.g_coef * pc.u[m] * pc.u[m]);
      chat[m] *= w;
    }

    CMat& target = g.momentum_branch ? adj_p : adj;
    const std::size_t n = static_cast<std::size_t>(rho.rows());
    for (std::size_t k = 0; k < n; ++k) {
      const Cmplx dk = g.diag(k);
      Cmplx* col = target.data() + k * n;
      const std::uint32_t* cl = pc.cls.data() + k * n;
      for (std::size_t j = 0; j < n; ++j)
        col[j] += std::conj(g.diag(j)) * dk * chat[cl[j]];
    }
  }
  if (has_momentum_)
    adj += grids_.change.kernel.adjoint() * adj_p * grids_.change.kernel;
  return L;
}

}  // namespace cvtomo
