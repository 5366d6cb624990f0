#include "cvtomo/homodyne.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace cvtomo {

PhasePolicy PhasePolicy::comb(int m) {
  if (m < 1) throw std::invalid_argument("comb policy needs m >= 1");
  return {Kind::Comb, m};
}

std::string PhasePolicy::to_string() const {
  return kind == Kind::Uniform ? "uniform"
                               : "comb:" + std::to_string(comb_size);
}

PhasePolicy PhasePolicy::parse(const std::string& s) {
  if (s == "uniform") return uniform();
  if (s.rfind("comb:", 0) == 0) return comb(std::stoi(s.substr(5)));
  throw std::invalid_argument("unknown phase policy: " + s);
}

namespace {

// Counter-based per-sample randomness (splitmix64); sample i is independent
// of how samples are partitioned across workers.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline double to_unit(std::uint64_t u) {
  return (static_cast<double>(u >> 11) + 0.5) * 0x1.0p-53;
}

struct SampleRng {
  std::uint64_t base;
  int k = 0;
  SampleRng(std::uint64_t seed, std::uint64_t index)
      : base(splitmix64(seed ^ (0x632be59bd9b4e019ULL * (index + 1)))) {}
  double uniform() { return to_unit(splitmix64(base + static_cast<std::uint64_t>(++k))); }
  double gaussian() {
    const double u1 = uniform(), u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }
};

struct PdfTable {
  double x0, dx;
  std::vector<double> pdf;
  std::vector<double> cdf;  // trapezoid cumulative, normalized to 1
};

PdfTable lossless_pdf_table(const PureState& state, double theta) {
  auto rt = state.rotated_table(theta);
  if (rt.value_norm2() < 0.999)
    throw std::runtime_error(
        "sample_dataset: internal grid captured < 0.999 probability mass");
  PdfTable t;
  t.x0 = rt.x0;
  t.dx = rt.dx;
  t.pdf.resize(rt.values.size());
  for (std::size_t j = 0; j < rt.values.size(); ++j)
    t.pdf[j] = std::norm(rt.values[j]);
  t.cdf.resize(t.pdf.size());
  double acc = 0.0;
  t.cdf[0] = 0.0;
  for (std::size_t j = 1; j < t.pdf.size(); ++j) {
    acc += 0.5 * (t.pdf[j - 1] + t.pdf[j]) * t.dx;
    t.cdf[j] = acc;
  }
  for (auto& v : t.cdf) v /= acc;
  return t;
}

double inverse_cdf(const PdfTable& t, double u) {
  auto it = std::lower_bound(t.cdf.begin(), t.cdf.end(), u);
  if (it == t.cdf.begin()) return t.x0;
  if (it == t.cdf.end()) return t.x0 + (t.cdf.size() - 1) * t.dx;
  const std::size_t j = static_cast<std::size_t>(it - t.cdf.begin());
  const double c0 = t.cdf[j - 1], c1 = t.cdf[j];
  const double frac = (c1 > c0) ? (u - c0) / (c1 - c0) : 0.0;
  return t.x0 + (j - 1 + frac) * t.dx;
}

}  // namespace

std::vector<double> oracle_pdf(const PureState& state, double theta,
                               const std::vector<double>& xs, double eta) {
  if (!(eta > 0.0) || eta > 1.0)
    throw std::invalid_argument("oracle_pdf: eta must be in (0, 1]");
  std::vector<double> out(xs.size());
  if (eta >= 1.0) {
    for (std::size_t i = 0; i < xs.size(); ++i)
      out[i] = std::norm(state.psi_rotated(theta, xs[i]));
    return out;
  }
  auto rt = state.rotated_table(theta);
  const double inv_var = 1.0 / (1.0 - eta);
  const double norm = std::sqrt(inv_var / kPi) * rt.dx;
  const double sq_eta = std::sqrt(eta);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < rt.values.size(); ++j) {
      const double q = rt.x0 + j * rt.dx;
      const double d = xs[i] - sq_eta * q;
      acc += std::norm(rt.values[j]) * std::exp(-d * d * inv_var);
    }
    out[i] = acc * norm;
  }
  return out;
}

std::vector<double> oracle_pdf(const PureStateSpec& spec, double theta,
                               const std::vector<double>& xs, double eta) {
  return oracle_pdf(PureState(spec), theta, xs, eta);
}

std::function<double(double)> oracle_cdf(const PureState& state, double theta,
                                         double eta) {
  // Fine grid covering the smeared support.
  const double sigma = std::sqrt((1.0 - eta) / 2.0);
  const double r = state.rotated_extent(theta) + 6.0 * sigma + 2.0;
  const int n = 1 << 14;
  const double dx = 2.0 * r / (n - 1);
  std::vector<double> xs(n);
  for (int j = 0; j < n; ++j) xs[j] = -r + j * dx;
  auto pdf = oracle_pdf(state, theta, xs, eta);
  auto cdf = std::make_shared<std::vector<double>>(n, 0.0);
  double acc = 0.0;
  for (int j = 1; j < n; ++j) {
    acc += 0.5 * (pdf[j - 1] + pdf[j]) * dx;
    (*cdf)[j] = acc;
  }
  const double total = acc;
  return [cdf, total, r, dx, n](double x) {
    if (x <= -r) return 0.0;
    if (x >= r) return 1.0;
    const double pos = (x + r) / dx;
    const int j = std::min(n - 2, static_cast<int>(pos));
    const double f = pos - j;
    return ((1.0 - f) * (*cdf)[j] + f * (*cdf)[j + 1]) / total;
  };
}

QuadratureDataset sample_dataset(const PureStateSpec& spec, long n,
                                 PhasePolicy policy, double eta,
                                 unsigned long long seed) {
  if (n < 1) throw std::invalid_argument("sample_dataset: n >= 1 required");
  if (!(eta > 0.0) || eta > 1.0)
    throw std::invalid_argument("sample_dataset: eta must be in (0, 1]");
  PureState state(spec);
  QuadratureDataset ds;
  ds.efficiency = eta;
  ds.provenance_spec = spec;
  ds.seed = static_cast<long long>(seed);
  ds.policy = policy;
  ds.samples.resize(n);

  std::map<double, PdfTable> cache;
  const double sigma = std::sqrt((1.0 - eta) / 2.0);
  const double sq_eta = std::sqrt(eta);

  for (long i = 0; i < n; ++i) {
    SampleRng rng(seed, static_cast<std::uint64_t>(i));
    double theta;
    if (policy.kind == PhasePolicy::Kind::Uniform) {
      theta = kPi * rng.uniform();
    } else {
      theta = kPi * static_cast<double>(i % policy.comb_size) / policy.comb_size;
      rng.uniform();  // keep the draw layout identical across policies
    }
    auto it = cache.find(theta);
    if (it == cache.end()) {
      if (policy.kind == PhasePolicy::Kind::Uniform && !cache.empty())
        cache.clear();  // uniform phases never repeat; avoid unbounded growth
      it = cache.emplace(theta, lossless_pdf_table(state, theta)).first;
    }
    const double q = inverse_cdf(it->second, rng.uniform());
    const double noise = eta < 1.0 ? sigma * rng.gaussian() : 0.0;
    ds.samples[i] = {theta, sq_eta * q + noise};
  }
  return ds;
}

namespace {
std::string sidecar_path(const std::string& csv_path) {
  auto pos = csv_path.find_last_of('.');
  const std::string stem =
      (pos == std::string::npos) ? csv_path : csv_path.substr(0, pos);
  return stem + ".json";
}
}  // namespace

void write_dataset(const QuadratureDataset& ds, const std::string& csv_path) {
  std::ofstream csv(csv_path);
  if (!csv) throw std::runtime_error("cannot open " + csv_path);
  csv << "theta,x\n";
  csv.precision(17);
  for (const auto& s : ds.samples) csv << s.theta << ',' << s.value << '\n';

  nlohmann::json meta;
  meta["eta"] = ds.efficiency;
  meta["seed"] = ds.seed;
  meta["n"] = ds.samples.size();
  meta["phase_policy"] = ds.policy.to_string();
  if (ds.provenance_spec) meta["spec"] = ds.provenance_spec->to_json();
  std::ofstream side(sidecar_path(csv_path));
  if (!side) throw std::runtime_error("cannot open " + sidecar_path(csv_path));
  side << meta.dump(2) << '\n';
}

QuadratureDataset read_dataset(const std::string& csv_path) {
  std::ifstream csv(csv_path);
  if (!csv) throw std::runtime_error("cannot open " + csv_path);
  std::string line;
  if (!std::getline(csv, line) || line.rfind("theta,x", 0) != 0)
    throw std::runtime_error("dataset CSV missing `theta,x` header");

  QuadratureDataset ds;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string a, b;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b))
      throw std::runtime_error("malformed dataset row: " + line);
    QuadratureSample s{std::stod(a), std::stod(b)};
    if (!(s.theta >= 0.0) || s.theta >= kPi)
      throw std::out_of_range("dataset theta out of [0, pi): " + a);
    if (!std::isfinite(s.value))
      throw std::out_of_range("dataset quadrature not finite: " + b);
    ds.samples.push_back(s);
  }
  if (ds.samples.empty()) throw std::runtime_error("dataset has no samples");

  std::ifstream side(sidecar_path(csv_path));
  if (!side)
    throw std::runtime_error("dataset metadata missing: " +
                             sidecar_path(csv_path));
  nlohmann::json meta = nlohmann::json::parse(side);
  ds.efficiency = meta.at("eta").get<double>();
  if (!(ds.efficiency > 0.0) || ds.efficiency > 1.0)
    throw std::out_of_range("dataset eta out of (0, 1]");
  if (meta.contains("seed")) ds.seed = meta["seed"].get<long long>();
  if (meta.contains("phase_policy"))
    ds.policy = PhasePolicy::parse(meta["phase_policy"].get<std::string>());
  if (meta.contains("spec"))
    ds.provenance_spec = PureStateSpec::from_json(meta["spec"]);
  return ds;
}

KsResult ks_test(std::vector<double> values,
                 const std::function<double(double)>& cdf) {
  if (values.empty()) throw std::invalid_argument("ks_test: no samples");
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  double d = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double f = cdf(values[i]);
    d = std::max(d, std::abs(f - static_cast<double>(i) / n));
    d = std::max(d, std::abs(static_cast<double>(i + 1) / n - f));
  }
  const double lambda = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k)
    p += 2.0 * (k % 2 == 1 ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
  return {d, std::clamp(p, 0.0, 1.0)};
}

}  // namespace cvtomo
