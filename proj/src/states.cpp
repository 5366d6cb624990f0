#include "cvtomo/states.hpp"

#include <cmath>
#include <mutex>
#include <stdexcept>

#include <fftw3.h>

namespace cvtomo {

namespace {

constexpr double kQuarterRootPi = 0.7511255444649425;  // pi^(-1/4)

// Continuous Fourier transform G(k) = dx * sum_j g_j exp(-i k x_j) evaluated
// on the FFT frequency grid k_m = m * 2pi/(N dx), m in [-N/2, N/2).
// Output is in ascending-k order.
struct CftResult {
  double k0;
  double dk;
  std::vector<Cmplx> values;
};

std::mutex fftw_mutex;  // FFTW planner is not thread-safe

CftResult continuous_ft(const std::vector<Cmplx>& g, double x0, double dx,
                        std::size_t nfft) {
  const std::size_t n = std::max(nfft, g.size());
  std::vector<Cmplx> in(n, Cmplx(0, 0)), out(n);
  std::copy(g.begin(), g.end(), in.begin());
  {
    std::lock_guard<std::mutex> lock(fftw_mutex);
    fftw_plan plan = fftw_plan_dft_1d(
        static_cast<int>(n), reinterpret_cast<fftw_complex*>(in.data()),
        reinterpret_cast<fftw_complex*>(out.data()), FFTW_FORWARD,
        FFTW_ESTIMATE);
    fftw_execute(plan);
    fftw_destroy_plan(plan);
  }
  CftResult res;
  res.dk = 2.0 * kPi / (static_cast<double>(n) * dx);
  const long half = static_cast<long>(n / 2);
  res.k0 = -half * res.dk;
  res.values.resize(n);
  for (long m = -half; m < static_cast<long>(n) - half; ++m) {
    const double k = m * res.dk;
    const std::size_t src = static_cast<std::size_t>((m + n) % n);
    res.values[static_cast<std::size_t>(m + half)] =
        dx * std::polar(1.0, -k * x0) * out[src];
  }
  return res;
}

std::size_t next_pow2(double x) {
  std::size_t n = 1024;
  while (static_cast<double>(n) < x && n < (1u << 22)) n <<= 1;
  return n;
}

}  // namespace

double fock_wavefunction(int n, double x) {
  if (n < 0) throw std::invalid_argument("fock_wavefunction: n < 0");
  double prev = 0.0;
  double cur = kQuarterRootPi * std::exp(-0.5 * x * x);
  for (int m = 0; m < n; ++m) {
    const double next = std::sqrt(2.0 / (m + 1)) * x * cur -
                        std::sqrt(static_cast<double>(m) / (m + 1)) * prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

// --- spec construction and JSON -------------------------------------------

PureStateSpec PureStateSpec::fock(int n) {
  PureStateSpec s;
  s.kind = StateKind::Fock;
  s.n = n;
  return s;
}

PureStateSpec PureStateSpec::coherent(Cmplx alpha) {
  PureStateSpec s;
  s.kind = StateKind::Coherent;
  s.alpha = alpha;
  return s;
}

PureStateSpec PureStateSpec::superposition(std::vector<FockTerm> terms) {
  PureStateSpec s;
  s.kind = StateKind::Superposition;
  s.terms = std::move(terms);
  return s;
}

PureStateSpec PureStateSpec::cat(std::vector<CatComponent> components) {
  PureStateSpec s;
  s.kind = StateKind::Cat;
  s.components = std::move(components);
  return s;
}

PureStateSpec PureStateSpec::two_cat(Cmplx alpha, double parity) {
  return cat({{alpha, Cmplx(1, 0)}, {-alpha, Cmplx(parity, 0)}});
}

PureStateSpec PureStateSpec::gkp(double delta, double k, int s_max) {
  PureStateSpec s;
  s.kind = StateKind::Gkp;
  s.gkp_delta = delta;
  s.gkp_k = k;
  s.gkp_smax = s_max;
  if (!(delta > 0) || !(k > 0) || s_max < 1)
    throw std::invalid_argument("gkp: need delta > 0, k > 0, s_max >= 1");
  return s;
}

namespace {
nlohmann::json cx_json(Cmplx z) { return {z.real(), z.imag()}; }
Cmplx cx_from(const nlohmann::json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>()};
}
}  // namespace

nlohmann::json PureStateSpec::to_json() const {
  nlohmann::json j;
  switch (kind) {
    case StateKind::Fock:
      j["kind"] = "fock";
      j["n"] = n;
      break;
    case StateKind::Superposition: {
      j["kind"] = "superposition";
      j["terms"] = nlohmann::json::array();
      for (const auto& t : terms)
        j["terms"].push_back({{"n", t.n}, {"coeff", cx_json(t.coeff)}});
      break;
    }
    case StateKind::Coherent:
      j["kind"] = "coherent";
      j["alpha"] = cx_json(alpha);
      break;
    case StateKind::Cat: {
      j["kind"] = "cat";
      j["components"] = nlohmann::json::array();
      for (const auto& c : components)
        j["components"].push_back(
            {{"alpha", cx_json(c.alpha)}, {"coeff", cx_json(c.coeff)}});
      break;
    }
    case StateKind::Gkp:
      j["kind"] = "gkp";
      j["delta"] = gkp_delta;
      j["k"] = gkp_k;
      j["s_max"] = gkp_smax;
      break;
  }
  if (!transforms.empty()) {
    j["transforms"] = nlohmann::json::array();
    for (const auto& t : transforms) {
      if (t.kind == Transform::Kind::Displace)
        j["transforms"].push_back({{"displace", cx_json(t.beta)}});
      else
        j["transforms"].push_back({{"squeeze", t.r}});
    }
  }
  return j;
}

PureStateSpec PureStateSpec::from_json(const nlohmann::json& j) {
  PureStateSpec s;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "fock") {
    s = fock(j.at("n").get<int>());
  } else if (kind == "superposition") {
    std::vector<FockTerm> terms;
    for (const auto& t : j.at("terms"))
      terms.push_back({t.at("n").get<int>(), cx_from(t.at("coeff"))});
    s = superposition(std::move(terms));
  } else if (kind == "coherent") {
    s = coherent(cx_from(j.at("alpha")));
  } else if (kind == "cat") {
    std::vector<CatComponent> comps;
    for (const auto& c : j.at("components"))
      comps.push_back({cx_from(c.at("alpha")), cx_from(c.at("coeff"))});
    s = cat(std::move(comps));
  } else if (kind == "gkp") {
    s = gkp(j.at("delta").get<double>(), j.at("k").get<double>(),
            j.at("s_max").get<int>());
  } else {
    throw std::invalid_argument("unknown state kind: " + kind);
  }
  if (j.contains("transforms")) {
    for (const auto& t : j.at("transforms")) {
      Transform tr;
      if (t.contains("displace")) {
        tr.kind = Transform::Kind::Displace;
        tr.beta = cx_from(t.at("displace"));
      } else if (t.contains("squeeze")) {
        tr.kind = Transform::Kind::Squeeze;
        tr.r = t.at("squeeze").get<double>();
      } else if (t.contains("squeeze_db")) {
        tr.kind = Transform::Kind::Squeeze;
        tr.r = squeeze_db_to_r(t.at("squeeze_db").get<double>());
      } else {
        throw std::invalid_argument("unknown transform entry");
      }
      s.transforms.push_back(tr);
    }
  }
  return s;
}

double WavefunctionOnGrid::norm2() const {
  double s = 0.0;
  for (const auto& v : values) s += std::norm(v);
  return s * grid.delta;
}

double PureState::RotatedTable::value_norm2() const {
  double s = 0.0;
  for (const auto& v : values) s += std::norm(v);
  return s * dx;
}

// --- PureState --------------------------------------------------------------

namespace {

Cmplx coherent_amplitude(Cmplx alpha, double x) {
  const double a = alpha.real(), b = alpha.imag();
  const double xc = x - std::sqrt(2.0) * a;
  return kQuarterRootPi * std::exp(-0.5 * xc * xc) *
         std::polar(1.0, std::sqrt(2.0) * b * x - a * b);
}

Cmplx base_amplitude(const PureStateSpec& s, double x) {
  switch (s.kind) {
    case StateKind::Fock:
      return fock_wavefunction(s.n, x);
    case StateKind::Superposition: {
      int nmax = 0;
      for (const auto& t : s.terms) nmax = std::max(nmax, t.n);
      Cmplx acc = 0.0;
      double prev = 0.0, cur = kQuarterRootPi * std::exp(-0.5 * x * x);
      for (int m = 0; m <= nmax; ++m) {
        for (const auto& t : s.terms)
          if (t.n == m) acc += t.coeff * cur;
        const double next = std::sqrt(2.0 / (m + 1)) * x * cur -
                            std::sqrt(static_cast<double>(m) / (m + 1)) * prev;
        prev = cur;
        cur = next;
      }
      return acc;
    }
    case StateKind::Coherent:
      return coherent_amplitude(s.alpha, x);
    case StateKind::Cat: {
      Cmplx acc = 0.0;
      for (const auto& c : s.components)
        acc += c.coeff * coherent_amplitude(c.alpha, x);
      return acc;
    }
    case StateKind::Gkp: {
      double acc = 0.0;
      const double two_sqrt_pi = 2.0 * std::sqrt(kPi);
      for (int sidx = -s.gkp_smax; sidx <= s.gkp_smax; ++sidx) {
        const double env = std::exp(-2.0 * kPi * (sidx * s.gkp_k) * (sidx * s.gkp_k));
        const double xc = (x - sidx * two_sqrt_pi) / s.gkp_delta;
        acc += env * std::exp(-xc * xc);
      }
      return acc;
    }
  }
  return 0.0;
}

void base_extents(const PureStateSpec& s, double& pos, double& mom) {
  auto fock_ext = [](int n) { return std::sqrt(2.0 * n + 1.0) + 6.0; };
  switch (s.kind) {
    case StateKind::Fock:
      pos = mom = fock_ext(s.n);
      break;
    case StateKind::Superposition: {
      int nmax = 0;
      if (s.terms.empty())
        throw std::invalid_argument("superposition: no terms");
      for (const auto& t : s.terms) nmax = std::max(nmax, t.n);
      pos = mom = fock_ext(nmax);
      break;
    }
    case StateKind::Coherent:
      pos = std::sqrt(2.0) * std::abs(s.alpha.real()) + 7.0;
      mom = std::sqrt(2.0) * std::abs(s.alpha.imag()) + 7.0;
      break;
    case StateKind::Cat: {
      if (s.components.empty()) throw std::invalid_argument("cat: no components");
      pos = mom = 0.0;
      for (const auto& c : s.components) {
        pos = std::max(pos, std::sqrt(2.0) * std::abs(c.alpha.real()) + 7.0);
        mom = std::max(mom, std::sqrt(2.0) * std::abs(c.alpha.imag()) + 7.0);
      }
      break;
    }
    case StateKind::Gkp: {
      // Peaks with envelope exp(-2 pi (s k)^2) are negligible beyond s_eff.
      const double s_eff = std::min<double>(
          s.gkp_smax, std::floor(std::sqrt(std::log(1e10) / (2.0 * kPi)) / s.gkp_k) + 1);
      pos = 2.0 * s_eff * std::sqrt(kPi) + 4.0 * s.gkp_delta + 3.0;
      mom = 2.0 * std::sqrt(std::log(1e10)) / s.gkp_delta + 3.0;
      break;
    }
  }
}

}  // namespace

Cmplx PureState::psi_raw(double x) const {
  // Transforms are applied in order; unwind from the last one.
  double arg = x;
  Cmplx factor = 1.0;
  for (auto it = spec_.transforms.rbegin(); it != spec_.transforms.rend(); ++it) {
    if (it->kind == Transform::Kind::Displace) {
      factor *= std::polar(1.0, std::sqrt(2.0) * it->beta.imag() * arg);
      arg -= std::sqrt(2.0) * it->beta.real();
    } else {
      factor *= std::exp(0.5 * it->r);
      arg *= std::exp(it->r);
    }
  }
  return factor * base_amplitude(spec_, arg);
}

PureState::PureState(const PureStateSpec& spec) : spec_(spec) {
  base_extents(spec_, pos_extent_, mom_extent_);
  for (const auto& t : spec_.transforms) {
    if (t.kind == Transform::Kind::Displace) {
      pos_extent_ += std::sqrt(2.0) * std::abs(t.beta.real());
      mom_extent_ += std::sqrt(2.0) * std::abs(t.beta.imag());
    } else {
      pos_extent_ *= std::exp(-t.r);
      mom_extent_ *= std::exp(t.r);
    }
  }

  // Norm by trapezoid quadrature; grow the span until the value settles.
  const double dx = std::min(0.02, 0.25 / (mom_extent_ + 1.0));
  double span = pos_extent_ + 2.0;
  double prev = -1.0, norm2 = 0.0;
  for (int round = 0; round < 6; ++round) {
    const long n = static_cast<long>(std::ceil(2.0 * span / dx)) + 1;
    norm2 = 0.0;
    for (long j = 0; j < n; ++j) {
      const double x = -span + j * dx;
      double w = (j == 0 || j == n - 1) ? 0.5 : 1.0;
      norm2 += w * std::norm(psi_raw(x));
    }
    norm2 *= dx;
    if (prev >= 0.0 && std::abs(norm2 - prev) <= 1e-10 * std::max(norm2, 1e-300))
      break;
    prev = norm2;
    span *= 1.5;
  }
  if (!(norm2 > 1e-30))
    throw std::invalid_argument("PureState: spec has zero norm");
  norm_ = 1.0 / std::sqrt(norm2);
}

Cmplx PureState::psi(double x) const { return norm_ * psi_raw(x); }

double PureState::rotated_extent(double theta) const {
  return std::abs(std::cos(theta)) * pos_extent_ +
         std::abs(std::sin(theta)) * mom_extent_ + 1.0;
}

void PureState::build_momentum_table() const {
  if (mom_table_) return;
  const double span = pos_extent_ + 2.0;
  const double dx =
      std::min(0.04, 2.0 * kPi / (12.0 * (mom_extent_ + 2.0)));
  const long n = static_cast<long>(std::ceil(2.0 * span / dx)) + 1;
  std::vector<Cmplx> g(n);
  for (long j = 0; j < n; ++j) g[j] = psi(-span + j * dx);
  // dp fine enough for psi~ oscillations (rate <= pos extent) plus the
  // rotated-kernel chirp used later.
  const double dp_wanted =
      2.0 * kPi / (12.0 * (pos_extent_ + mom_extent_ + 4.0));
  const std::size_t nfft =
      next_pow2(2.0 * kPi / (dp_wanted * dx));
  auto ft = continuous_ft(g, -span, dx, nfft);
  auto table = std::make_shared<RotatedTable>();
  table->dx = ft.dk;
  table->x0 = ft.k0;
  table->values.resize(ft.values.size());
  const double scale = 1.0 / std::sqrt(2.0 * kPi);
  for (std::size_t i = 0; i < ft.values.size(); ++i)
    table->values[i] = scale * ft.values[i];
  // Trim to the momentum support to keep later quadratures short.
  const double keep = mom_extent_ + 4.0;
  std::size_t first = 0, last = table->values.size();
  while (first < last && table->x0 + first * table->dx < -keep) ++first;
  while (last > first && table->x0 + (last - 1) * table->dx > keep) --last;
  table->values = std::vector<Cmplx>(table->values.begin() + first,
                                     table->values.begin() + last);
  table->x0 += first * table->dx;
  mom_table_ = table;
}

Cmplx PureState::psi_rotated(double theta, double x_theta) const {
  const double s = std::sin(theta), c = std::cos(theta);
  if (std::abs(s) < 1e-12) {
    return c > 0 ? psi(x_theta) : psi(-x_theta);
  }
  if (std::abs(s) >= 1.0 / std::sqrt(2.0)) {
    const double cot = c / s;
    const double span = pos_extent_ + 2.0;
    const double rate =
        std::abs(x_theta / s) + std::abs(cot) * span + mom_extent_ + 2.0;
    const double dx = std::min(0.05, 2.0 * kPi / (10.0 * rate));
    const long n = static_cast<long>(std::ceil(2.0 * span / dx)) + 1;
    Cmplx acc = 0.0;
    for (long j = 0; j < n; ++j) {
      const double x = -span + j * dx;
      acc += psi(x) * std::polar(1.0, -x * x_theta / s + 0.5 * cot * x * x);
    }
    return acc * dx / std::sqrt(2.0 * kPi * std::abs(s));
  }
  build_momentum_table();
  const auto& t = *mom_table_;
  const double tan = s / c;
  Cmplx acc = 0.0;
  for (std::size_t j = 0; j < t.values.size(); ++j) {
    const double p = t.x0 + j * t.dx;
    acc += t.values[j] * std::polar(1.0, x_theta * p / c - 0.5 * tan * p * p);
  }
  return acc * t.dx / std::sqrt(2.0 * kPi * std::abs(c));
}

PureState::RotatedTable PureState::rotated_table(double theta) const {
  const double s = std::sin(theta), c = std::cos(theta);
  const double r_out = rotated_extent(theta) + 2.0;
  const double r_conj = rotated_extent(theta + 0.5 * kPi) + 2.0;

  RotatedTable out;
  if (std::abs(s) >= 1.0 / std::sqrt(2.0)) {
    const double cot = c / s;
    const double span = pos_extent_ + 2.0;
    const double rate = std::abs(cot) * span + mom_extent_ + 2.0;
    double dx = std::min(0.05, 2.0 * kPi / (10.0 * rate));
    dx = std::min(dx, kPi * std::abs(s) / r_out);  // k range must reach r_out/s
    const long n = static_cast<long>(std::ceil(2.0 * span / dx)) + 1;
    std::vector<Cmplx> g(n);
    for (long j = 0; j < n; ++j) {
      const double x = -span + j * dx;
      g[j] = psi(x) * std::polar(1.0, 0.5 * cot * x * x);
    }
    const std::size_t nfft =
        next_pow2(std::max(2.0 * span / dx, 16.0 * std::abs(s) * r_conj / dx));
    auto ft = continuous_ft(g, -span, dx, nfft);
    const double scale = 1.0 / std::sqrt(2.0 * kPi * std::abs(s));
    out.dx = s * ft.dk;  // s > 0 on this branch for theta in (0, pi)
    out.x0 = s * ft.k0;
    out.values.resize(ft.values.size());
    for (std::size_t i = 0; i < ft.values.size(); ++i)
      out.values[i] = scale * ft.values[i];
  } else {
    build_momentum_table();
    const auto& t = *mom_table_;
    const double tan = s / c;
    std::vector<Cmplx> g(t.values.size());
    for (std::size_t j = 0; j < g.size(); ++j) {
      const double p = t.x0 + j * t.dx;
      g[j] = t.values[j] * std::polar(1.0, -0.5 * tan * p * p);
    }
    // Kernel exp(i X p / c) = exp(-i k p) with k = -X/c.
    double dp = t.dx;
    const std::size_t nfft = next_pow2(std::max(
        static_cast<double>(g.size()),
        std::max(16.0 * std::abs(c) * r_conj / dp, r_out / (kPi * std::abs(c)) * 2.0 * kPi / dp)));
    auto ft = continuous_ft(g, t.x0, dp, nfft);
    const double scale = 1.0 / std::sqrt(2.0 * kPi * std::abs(c));
    // X = -c k: flip ordering when c > 0.
    const std::size_t n = ft.values.size();
    out.values.resize(n);
    if (c > 0) {
      out.dx = c * ft.dk;
      out.x0 = -c * (ft.k0 + (n - 1) * ft.dk);
      for (std::size_t i = 0; i < n; ++i)
        out.values[i] = scale * ft.values[n - 1 - i];
    } else {
      out.dx = -c * ft.dk;
      out.x0 = -c * ft.k0;
      for (std::size_t i = 0; i < n; ++i) out.values[i] = scale * ft.values[i];
    }
  }

  // Trim to the rotated support.
  std::size_t first = 0, last = out.values.size();
  while (first < last && out.x0 + first * out.dx < -r_out) ++first;
  while (last > first && out.x0 + (last - 1) * out.dx > r_out) --last;
  out.values = std::vector<Cmplx>(out.values.begin() + first,
                                  out.values.begin() + last);
  out.x0 += first * out.dx;
  return out;
}

WavefunctionOnGrid rotated_wavefunction(const PureState& state, double theta,
                                        const Grid& out_grid) {
  WavefunctionOnGrid w;
  w.grid = out_grid;
  w.values.resize(out_grid.size());
  for (std::size_t j = 0; j < out_grid.size(); ++j)
    w.values[j] = state.psi_rotated(theta, out_grid.points[j]);
  if (w.norm2() < 0.999)
    throw std::invalid_argument(
        "rotated_wavefunction: grid too narrow (captured probability < 0.999)");
  return w;
}

WavefunctionOnGrid rotated_wavefunction(const PureStateSpec& spec, double theta,
                                        const Grid& out_grid) {
  return rotated_wavefunction(PureState(spec), theta, out_grid);
}

CMat density_on_grid(const PureState& state, const Grid& grid) {
  const std::size_t n = grid.size();
  CVec psi(n);
  for (std::size_t j = 0; j < n; ++j) psi(j) = state.psi(grid.points[j]);
  const double tr = psi.squaredNorm() * grid.delta;
  if (std::abs(tr - 1.0) > 1e-3)
    throw std::invalid_argument("density_on_grid: grid does not cover support");
  CMat rho = (psi * psi.adjoint()) * (grid.delta / tr);
  return rho;
}

CMat density_on_grid(const PureStateSpec& spec, const Grid& grid) {
  return density_on_grid(PureState(spec), grid);
}

Cmplx wavefunction(const PureStateSpec& spec, double x) {
  return PureState(spec).psi(x);
}

}  // namespace cvtomo
