#include "cvtomo/nn.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>

namespace cvtomo {

std::string activation_name(Activation a) {
  return a == Activation::Tanh ? "tanh" : "sin";
}

Activation activation_parse(const std::string& s) {
  if (s == "tanh") return Activation::Tanh;
  if (s == "sin") return Activation::Sin;
  throw std::invalid_argument("unknown activation: " + s);
}

std::size_t MLPParams::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l)
    n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
  return n;
}

std::vector<double> MLPParams::flatten() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (std::size_t l = 0; l < weights.size(); ++l) {
    out.insert(out.end(), weights[l].data(),
               weights[l].data() + weights[l].size());
    out.insert(out.end(), biases[l].data(),
               biases[l].data() + biases[l].size());
  }
  return out;
}

void MLPParams::unflatten(const std::vector<double>& flat) {
  if (flat.size() != parameter_count())
    throw std::invalid_argument("unflatten: size mismatch");
  const double* p = flat.data();
  for (std::size_t l = 0; l < weights.size(); ++l) {
    std::copy(p, p + weights[l].size(), weights[l].data());
    p += weights[l].size();
    std::copy(p, p + biases[l].size(), biases[l].data());
    p += biases[l].size();
  }
}

nlohmann::json ArchSpec::to_json() const {
  nlohmann::json acts = nlohmann::json::array();
  for (auto a : activations) acts.push_back(activation_name(a));
  return {{"hidden", hidden},
          {"activations", acts},
          {"first_layer_scale", first_layer_scale}};
}

ArchSpec ArchSpec::from_json(const nlohmann::json& j) {
  ArchSpec a;
  a.hidden = j.at("hidden").get<std::vector<int>>();
  a.activations.clear();
  for (const auto& s : j.at("activations"))
    a.activations.push_back(activation_parse(s.get<std::string>()));
  if (a.activations.size() != a.hidden.size())
    throw std::invalid_argument("arch: one activation per hidden layer");
  for (int h : a.hidden)
    if (h < 1) throw std::invalid_argument("arch: hidden sizes must be >= 1");
  a.first_layer_scale = j.value("first_layer_scale", 0.0);
  return a;
}

MLPParams init_mlp(const ArchSpec& arch, const Grid& grid,
                   std::uint64_t seed) {
  if (arch.hidden.empty() || arch.activations.size() != arch.hidden.size())
    throw std::invalid_argument("init_mlp: bad architecture");
  MLPParams p;
  p.layer_sizes.push_back(2);
  for (int h : arch.hidden) p.layer_sizes.push_back(h);
  p.layer_sizes.push_back(2);
  p.activations = arch.activations;

  const double lo = grid.min(), hi = grid.max();
  p.in_center = 0.5 * (lo + hi);
  p.in_scale = (hi > lo) ? 2.0 / (hi - lo) : 1.0;

  std::mt19937_64 rng(seed ^ 0x6e6e2d696e697400ULL);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const std::size_t nl = p.layer_sizes.size() - 1;
  for (std::size_t l = 0; l < nl; ++l) {
    const int fan_in = p.layer_sizes[l], fan_out = p.layer_sizes[l + 1];
    const bool hidden = l < arch.hidden.size();
    const bool sine = hidden && p.activations[l] == Activation::Sin;
    double s;
    if (l == 0 && sine)
      s = arch.first_layer_scale > 0 ? arch.first_layer_scale : 30.0;
    else if (l == 0 && arch.first_layer_scale > 0)
      s = arch.first_layer_scale;
    else if (sine)
      s = std::sqrt(6.0 / fan_in);
    else
      s = std::sqrt(1.0 / fan_in);
    RMat w(fan_out, fan_in);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = s * unit(rng);
    RVec b = RVec::Zero(fan_out);
    if (sine)
      for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = kPi * unit(rng);
    p.weights.push_back(std::move(w));
    p.biases.push_back(std::move(b));
  }
  return p;
}

namespace {

inline void apply_activation(Activation a, const RMat& z, RMat& out) {
  if (a == Activation::Tanh)
    out = z.array().tanh().matrix();
  else
    out = z.array().sin().matrix();
}

// Forward over a batch of input columns; when ws != nullptr the
// pre-activations and activations of every hidden layer are kept for the
// backward pass.
struct Workspace {
  std::vector<RMat> zs, as;
};

void forward_batch(const MLPParams& p, const RMat& input, RMat& out,
                   Workspace* ws) {
  const std::size_t nl = p.weights.size();
  RMat cur = input;
  if (ws) {
    ws->zs.resize(nl - 1);
    ws->as.resize(nl - 1);
  }
  for (std::size_t l = 0; l + 1 < nl; ++l) {
    RMat z = (p.weights[l] * cur).colwise() + p.biases[l];
    RMat a;
    apply_activation(p.activations[l], z, a);
    if (ws) {
      ws->zs[l] = std::move(z);
      ws->as[l] = a;
    }
    cur = std::move(a);
  }
  out = (p.weights[nl - 1] * cur).colwise() + p.biases[nl - 1];
}

constexpr std::size_t kChunk = 8192;

// Fills `input` (2 x m) with scaled (x_j, x_k) pairs for flat pair indices
// [begin, begin + m), column-major over (j, k).
void fill_pairs(const MLPParams& p, const Grid& grid, std::size_t begin,
                std::size_t m, RMat& input) {
  const std::size_t n = grid.size();
  input.resize(2, static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t flat = begin + i;
    const std::size_t j = flat % n, k = flat / n;
    input(0, i) = (grid.points[j] - p.in_center) * p.in_scale;
    input(1, i) = (grid.points[k] - p.in_center) * p.in_scale;
  }
}

}  // namespace

Cmplx forward(const MLPParams& params, double x, double x_prime) {
  RMat input(2, 1), out;
  input(0, 0) = (x - params.in_center) * params.in_scale;
  input(1, 0) = (x_prime - params.in_center) * params.in_scale;
  forward_batch(params, input, out, nullptr);
  return {out(0, 0), out(1, 0)};
}

CMat build_amplitude(const MLPParams& params, const Grid& grid) {
  const std::size_t n = grid.size();
  CMat a(n, n);
  RMat input, out;
  for (std::size_t begin = 0; begin < n * n; begin += kChunk) {
    const std::size_t m = std::min(kChunk, n * n - begin);
    fill_pairs(params, grid, begin, m, input);
    forward_batch(params, input, out, nullptr);
    for (std::size_t i = 0; i < m; ++i)
      a.data()[begin + i] = Cmplx(out(0, i), out(1, i));
  }
  return a;
}

CMat build_density(const MLPParams& params, const Grid& grid) {
  const CMat a = build_amplitude(params, grid);
  const double t = a.squaredNorm();
  if (!(t > 0.0)) throw std::runtime_error("build_density: Tr(A^dag A) = 0");
  return (a.adjoint() * a) / t;
}

double loss_and_gradient(const MLPParams& params,
                         const LikelihoodEngine& engine,
                         std::vector<double>& grad,
                         const std::vector<std::uint8_t>* subset) {
  const Grid& grid = engine.grids().position;
  const std::size_t n = grid.size();

  const CMat a = build_amplitude(params, grid);
  const double t = a.squaredNorm();
  if (!(t > 0.0)) throw std::runtime_error("loss_and_gradient: zero network");
  const CMat rho = (a.adjoint() * a) / t;

  CMat rho_hat;
  const double L = engine.value_and_adjoint(rho, rho_hat, subset);
  if (!std::isfinite(L))
    throw std::runtime_error("loss_and_gradient: non-finite likelihood");

  // rho = B / t with B = A^dag A:
  //   B_hat = rho_hat / t, t_hat = -(1/t) sum Re(conj(rho_hat) o rho),
  //   A_hat = A (B_hat + B_hat^dag) + 2 t_hat A.
  const CMat b_hat = rho_hat / t;
  const double t_hat =
      -rho_hat.conjugate().cwiseProduct(rho).sum().real() / t;
  CMat a_hat = a * (b_hat + b_hat.adjoint());
  a_hat += (2.0 * t_hat) * a;

  // Backprop through the network, re-running the forward pass per chunk so
  // activations for at most one chunk are ever held.
  const std::size_t nl = params.weights.size();
  std::vector<RMat> gw(nl);
  std::vector<RVec> gb(nl);
  for (std::size_t l = 0; l < nl; ++l) {
    gw[l] = RMat::Zero(params.weights[l].rows(), params.weights[l].cols());
    gb[l] = RVec::Zero(params.biases[l].size());
  }

  RMat input, out, dz, da;
  Workspace ws;
  for (std::size_t begin = 0; begin < n * n; begin += kChunk) {
    const std::size_t m = std::min(kChunk, n * n - begin);
    fill_pairs(params, grid, begin, m, input);
    forward_batch(params, input, out, &ws);

    dz.resize(2, static_cast<Eigen::Index>(m));
    for (std::size_t i = 0; i < m; ++i) {
      const Cmplx ah = a_hat.data()[begin + i];
      dz(0, i) = ah.real();
      dz(1, i) = ah.imag();
    }
    for (std::size_t l = nl; l-- > 0;) {
      const RMat& prev = (l == 0) ? input : ws.as[l - 1];
      gw[l].noalias() += dz * prev.transpose();
      gb[l] += dz.rowwise().sum();
      if (l == 0) break;
      da.noalias() = params.weights[l].transpose() * dz;
      if (params.activations[l - 1] == Activation::Tanh)
        dz = da.cwiseProduct(
            (1.0 - ws.as[l - 1].array().square()).matrix());
      else
        dz = da.cwiseProduct(ws.zs[l - 1].array().cos().matrix());
    }
  }

  grad.clear();
  grad.reserve(params.parameter_count());
  for (std::size_t l = 0; l < nl; ++l) {
    grad.insert(grad.end(), gw[l].data(), gw[l].data() + gw[l].size());
    grad.insert(grad.end(), gb[l].data(), gb[l].data() + gb[l].size());
  }
  return L;
}

nlohmann::json TrainConfig::to_json() const {
  return {{"max_iterations", max_iterations},
          {"step_size", step_size},
          {"step_decay", step_decay},
          {"minibatch", minibatch},
          {"convergence_window", convergence_window},
          {"tolerance", tolerance},
          {"grad_clip", grad_clip},
          {"seed", seed}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.max_iterations = j.value("max_iterations", c.max_iterations);
  c.step_size = j.value("step_size", c.step_size);
  c.step_decay = j.value("step_decay", c.step_decay);
  c.minibatch = j.value("minibatch", c.minibatch);
  c.convergence_window = j.value("convergence_window", c.convergence_window);
  c.tolerance = j.value("tolerance", c.tolerance);
  c.grad_clip = j.value("grad_clip", c.grad_clip);
  c.seed = j.value("seed", c.seed);
  if (c.max_iterations < 1 || c.convergence_window < 1 ||
      !(c.step_size > 0.0) || !(c.tolerance > 0.0))
    throw std::invalid_argument("invalid training config");
  return c;
}

nlohmann::json TrainReport::to_json() const {
  return {{"loss", loss},          {"wall_time_s", wall_time_s},
          {"final_loss", final_loss}, {"iterations", iterations},
          {"converged", converged},   {"diverged", diverged}};
}

std::pair<TrainedModel, TrainReport> train(MLPParams params,
                                           const QuadratureDataset& dataset,
                                           const ReconstructionGrids& grids,
                                           const TrainConfig& config) {
  const auto t0 = std::chrono::steady_clock::now();
  LikelihoodEngine engine(dataset, grids);

  const std::size_t np = params.parameter_count();
  std::vector<double> flat = params.flatten();
  std::vector<double> m(np, 0.0), v(np, 0.0), grad;
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  std::mt19937_64 batch_rng(config.seed ^ 0x62617463682d726eULL);
  std::vector<std::uint8_t> mask;
  std::vector<std::size_t> order(engine.sample_count());
  std::iota(order.begin(), order.end(), 0);
  const bool minibatch =
      config.minibatch > 0 &&
      static_cast<std::size_t>(config.minibatch) < engine.sample_count();

  TrainReport report;
  double step = config.step_size;
  int rising = 0;
  for (int it = 0; it < config.max_iterations; ++it) {
    const std::vector<std::uint8_t>* subset = nullptr;
    if (minibatch) {
      std::shuffle(order.begin(), order.end(), batch_rng);
      mask.assign(engine.sample_count(), 0);
      for (int i = 0; i < config.minibatch; ++i) mask[order[i]] = 1;
      subset = &mask;
    }

    const double L = loss_and_gradient(params, engine, grad, subset);
    report.loss.push_back(L);

    if (!report.loss.empty() && report.loss.size() > 1 &&
        L > report.loss[report.loss.size() - 2])
      ++rising;
    else
      rising = 0;
    if (rising >= config.convergence_window) {
      report.diverged = true;
      break;
    }
    if (static_cast<int>(report.loss.size()) > config.convergence_window) {
      const auto end_prior =
          report.loss.end() - config.convergence_window;
      const double best_prior =
          *std::min_element(report.loss.begin(), end_prior);
      const double best_recent =
          *std::min_element(end_prior, report.loss.end());
      if (best_prior - best_recent < config.tolerance) {
        report.converged = true;
        break;
      }
    }

    if (config.grad_clip > 0.0) {
      double norm2 = 0.0;
      for (double g : grad) norm2 += g * g;
      const double norm = std::sqrt(norm2);
      if (norm > config.grad_clip) {
        const double scale = config.grad_clip / norm;
        for (double& g : grad) g *= scale;
      }
    }

    const double bc1 = 1.0 - std::pow(beta1, it + 1);
    const double bc2 = 1.0 - std::pow(beta2, it + 1);
    for (std::size_t i = 0; i < np; ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
      flat[i] -= step * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
    }
    params.unflatten(flat);
    step *= config.step_decay;
  }

  report.iterations = static_cast<int>(report.loss.size());
  report.final_loss = report.loss.empty() ? 0.0 : report.loss.back();
  report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  TrainedModel model;
  model.params = std::move(params);
  model.grid = grids.position;
  model.norm_trace = build_amplitude(model.params, model.grid).squaredNorm();
  return {std::move(model), std::move(report)};
}

// --- checkpoints --------------------------------------------------------------

namespace {
constexpr char kMagic[8] = {'C', 'V', 'T', 'O', 'M', 'O', '0', '1'};
}

void TrainedModel::save(const std::string& path) const {
  nlohmann::json header;
  header["format"] = 1;
  header["layer_sizes"] = params.layer_sizes;
  nlohmann::json acts = nlohmann::json::array();
  for (auto a : params.activations) acts.push_back(activation_name(a));
  header["activations"] = acts;
  header["in_center"] = params.in_center;
  header["in_scale"] = params.in_scale;
  header["grid"] = grid.to_json();
  header["norm_trace"] = norm_trace;
  const std::string hs = header.dump();

  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  f.write(kMagic, sizeof(kMagic));
  const std::uint64_t len = hs.size();
  f.write(reinterpret_cast<const char*>(&len), sizeof(len));
  f.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  const auto flat = params.flatten();
  f.write(reinterpret_cast<const char*>(flat.data()),
          static_cast<std::streamsize>(flat.size() * sizeof(double)));
  if (!f) throw std::runtime_error("write failed: " + path);
}

TrainedModel TrainedModel::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  char magic[8];
  f.read(magic, sizeof(magic));
  if (!f || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("not a model checkpoint: " + path);
  std::uint64_t len = 0;
  f.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string hs(len, '\0');
  f.read(hs.data(), static_cast<std::streamsize>(len));
  if (!f) throw std::runtime_error("truncated checkpoint: " + path);
  const nlohmann::json header = nlohmann::json::parse(hs);

  TrainedModel model;
  model.grid = Grid::from_json(header.at("grid"));
  model.norm_trace = header.at("norm_trace").get<double>();
  MLPParams& p = model.params;
  p.layer_sizes = header.at("layer_sizes").get<std::vector<int>>();
  for (const auto& s : header.at("activations"))
    p.activations.push_back(activation_parse(s.get<std::string>()));
  p.in_center = header.at("in_center").get<double>();
  p.in_scale = header.at("in_scale").get<double>();
  for (std::size_t l = 0; l + 1 < p.layer_sizes.size(); ++l) {
    p.weights.emplace_back(RMat::Zero(p.layer_sizes[l + 1], p.layer_sizes[l]));
    p.biases.emplace_back(RVec::Zero(p.layer_sizes[l + 1]));
  }
  std::vector<double> flat(p.parameter_count());
  f.read(reinterpret_cast<char*>(flat.data()),
         static_cast<std::streamsize>(flat.size() * sizeof(double)));
  if (!f) throw std::runtime_error("truncated checkpoint: " + path);
  p.unflatten(flat);
  return model;
}

// --- queries -------------------------------------------------------------------

std::vector<Cmplx> query_density(
    const TrainedModel& model,
    const std::vector<std::pair<double, double>>& pairs) {
  // rho(x, x') = sum_m conj(A(x_m, x)) A(x_m, x') / t over the training grid
  // rows; this contraction is Hermitian in (x, x') by construction.
  const Grid& g = model.grid;
  const std::size_t n = g.size();
  std::vector<double> coords;
  std::vector<std::pair<std::size_t, std::size_t>> idx(pairs.size());
  {
    std::map<double, std::size_t> seen;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      for (int side = 0; side < 2; ++side) {
        const double x = side == 0 ? pairs[i].first : pairs[i].second;
        auto it = seen.find(x);
        if (it == seen.end()) {
          it = seen.emplace(x, coords.size()).first;
          coords.push_back(x);
        }
        (side == 0 ? idx[i].first : idx[i].second) = it->second;
      }
    }
  }

  // Columns of A at the queried coordinates: C(m, c) = A(x_m, coord_c).
  CMat c(n, coords.size());
  RMat input, out;
  const std::size_t total = n * coords.size();
  for (std::size_t begin = 0; begin < total; begin += 8192) {
    const std::size_t m = std::min<std::size_t>(8192, total - begin);
    input.resize(2, static_cast<Eigen::Index>(m));
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t flat = begin + i;
      const std::size_t row = flat % n, col = flat / n;
      input(0, i) =
          (g.points[row] - model.params.in_center) * model.params.in_scale;
      input(1, i) =
          (coords[col] - model.params.in_center) * model.params.in_scale;
    }
    forward_batch(model.params, input, out, nullptr);
    for (std::size_t i = 0; i < m; ++i)
      c.data()[begin + i] = Cmplx(out(0, i), out(1, i));
  }

  std::vector<Cmplx> result(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i)
    result[i] = c.col(idx[i].first).dot(c.col(idx[i].second)) /
                model.norm_trace;
  return result;
}

CMat query_density_matrix(const TrainedModel& model, const Grid& fine,
                          bool renormalize) {
  std::vector<std::pair<double, double>> pairs;
  const std::size_t n = fine.size();
  pairs.reserve(n * n);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t j = 0; j < n; ++j)
      pairs.emplace_back(fine.points[j], fine.points[k]);
  const auto vals = query_density(model, pairs);
  CMat rho(n, n);
  std::copy(vals.begin(), vals.end(), rho.data());
  // queried values carry the training-grid step; rescale so the plain trace
  // is again ~1 on the refinement grid
  rho *= fine.delta / model.grid.delta;
  if (renormalize) {
    const double tr = rho.trace().real();
    if (!(tr > 0.0)) throw std::runtime_error("query: nonpositive trace");
    rho /= tr;
  }
  return rho;
}

}  // namespace cvtomo
