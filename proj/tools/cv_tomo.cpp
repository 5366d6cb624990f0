#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "cvtomo/analysis.hpp"
#include "cvtomo/io.hpp"
#include "cvtomo/maxlik.hpp"

using namespace cvtomo;
namespace fs = std::filesystem;

namespace {

constexpr int kExitInvalid = 2;   // bad input / missing files / schema errors
constexpr int kExitDiverged = 3;  // training or iteration blew up

struct InvalidInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};

nlohmann::json load_config(const std::string& path) {
  if (!fs::exists(path)) throw InvalidInput("config not found: " + path);
  nlohmann::json j;
  try {
    j = load_json(path);
  } catch (const std::exception& e) {
    throw InvalidInput(path + ": " + e.what());
  }
  if (j.contains("format") && j.at("format").get<int>() != 1)
    throw InvalidInput(path + ": unsupported format version");
  return j;
}

void ensure_dir(const std::string& out) {
  if (!out.empty()) fs::create_directories(out);
}

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

QuadratureDataset load_dataset(const std::string& path) {
  if (!fs::exists(path)) throw InvalidInput("dataset not found: " + path);
  try {
    return read_dataset(path);
  } catch (const std::exception& e) {
    throw InvalidInput(path + ": " + e.what());
  }
}

ReconstructionGrids load_grids(const std::string& path) {
  const nlohmann::json j = load_config(path);
  try {
    if (j.contains("grids")) return ReconstructionGrids::from_json(j.at("grids"));
    return ReconstructionGrids::from_json(j);
  } catch (const std::exception& e) {
    throw InvalidInput(path + ": " + e.what());
  }
}

void write_fock_csv(const FockDensity& rho, const std::string& path,
                    const nlohmann::json& sidecar) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  f.precision(17);
  f << "m,n,re,im\n";
  for (Eigen::Index n = 0; n < rho.entries.cols(); ++n)
    for (Eigen::Index m = 0; m < rho.entries.rows(); ++m)
      f << m << ',' << n << ',' << rho.entries(m, n).real() << ','
        << rho.entries(m, n).imag() << '\n';
  const auto pos = path.find_last_of('.');
  save_json(sidecar,
            (pos == std::string::npos ? path : path.substr(0, pos)) + ".json");
}

FockDensity read_fock_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InvalidInput("cannot open " + path);
  std::string line;
  if (!std::getline(f, line) || line.rfind("m,n,re,im", 0) != 0)
    throw InvalidInput(path + ": missing `m,n,re,im` header");
  std::vector<std::tuple<int, int, Cmplx>> entries;
  int top = -1;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string a, b, c, d;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') ||
        !std::getline(ss, c, ',') || !std::getline(ss, d))
      throw InvalidInput(path + ": malformed row: " + line);
    const int m = std::stoi(a), n = std::stoi(b);
    top = std::max({top, m, n});
    entries.emplace_back(m, n, Cmplx(std::stod(c), std::stod(d)));
  }
  if (top < 0) throw InvalidInput(path + ": empty matrix");
  FockDensity rho;
  rho.cutoff = top;
  rho.entries = CMat::Zero(top + 1, top + 1);
  for (const auto& [m, n, v] : entries) rho.entries(m, n) = v;
  return rho;
}

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> v(n);
  for (int j = 0; j < n; ++j) v[j] = lo + (hi - lo) * j / (n - 1);
  return v;
}

// Momentum grid satisfying the period rules when only a position grid is
// known: P_max from the position step, deltaP from the position extent.
Grid derived_momentum_grid(const Grid& position) {
  const double p_max = 1.0 / position.delta / 1.5;
  const double dp = 1.0 / position.abs_max() / 1.5;
  const std::size_t n =
      std::max<std::size_t>(2, std::size_t(std::ceil(2.0 * p_max / dp)) + 1);
  return make_grid({{-p_max, p_max}}, n);
}

double held_out_nll(const CMat& rho_x, const Grid& pos,
                    const QuadratureDataset& ds) {
  const auto grids = ReconstructionGrids::make(pos, derived_momentum_grid(pos));
  const LikelihoodEngine engine(ds, grids);
  return engine.value(rho_x);
}

std::uint64_t cell_seed(std::uint64_t base, double alpha, long n, int rep) {
  std::ostringstream key;
  key << "sweep;base=" << base << ";alpha=" << alpha << ";n=" << n
      << ";rep=" << rep;
  return fnv1a(key.str());
}

// --- subcommands -------------------------------------------------------------

struct SimulateArgs {
  std::string spec_path, out = "data.csv", phases = "uniform";
  long n = 10000;
  double eta = 1.0;
  long long seed = 1;
};

int cmd_simulate(const SimulateArgs& a) {
  const nlohmann::json spec_json = load_config(a.spec_path);
  PureStateSpec spec;
  try {
    spec = PureStateSpec::from_json(spec_json.contains("spec")
                                        ? spec_json.at("spec")
                                        : spec_json);
  } catch (const std::exception& e) {
    throw InvalidInput(a.spec_path + ": " + e.what());
  }
  if (a.eta <= 0.0 || a.eta > 1.0) throw InvalidInput("eta must be in (0, 1]");
  if (a.n < 1) throw InvalidInput("n must be positive");
  const PhasePolicy policy = PhasePolicy::parse(a.phases);
  const auto ds = sample_dataset(spec, a.n, policy, a.eta,
                                 static_cast<unsigned long long>(a.seed));
  std::string out = a.out;
  if (!out.empty() && out.back() == '/') {
    ensure_dir(out);
    out = join(out, "data.csv");
  }
  write_dataset(ds, out);
  std::cout << "wrote " << ds.samples.size() << " samples to " << out << "\n";
  return 0;
}

struct InferGridArgs {
  std::string data_path, out = "grids.json";
  double window = 0.05, quantile = 0.999, margin = 4.5;
};

int cmd_infer_grid(const InferGridArgs& a) {
  const auto ds = load_dataset(a.data_path);
  RegionSuggestion sug;
  try {
    sug = infer_regions(ds, a.window, a.quantile, a.margin);
  } catch (const std::exception& e) {
    throw InvalidInput(std::string("infer-grid: ") + e.what());
  }
  const nlohmann::json config = {{"data", a.data_path},
                                 {"window", a.window},
                                 {"quantile", a.quantile},
                                 {"margin", a.margin}};
  const nlohmann::json out = {
      {"format", 1},
      {"suggestion", sug.to_json()},
      {"grids",
       {{"position", sug.position_grid().to_json()},
        {"momentum", sug.momentum_grid().to_json()}}},
      {"provenance", provenance_json(config, ds.seed)}};
  save_json(out, a.out);
  std::cout << "wrote " << a.out << " (" << sug.position_intervals.size()
            << " position interval(s), " << sug.position_grid().size()
            << " + " << sug.momentum_grid().size() << " points)\n";
  return 0;
}

struct ReconstructArgs {
  std::string data_path, grids_path, arch_path, train_path, out = "model";
  long long seed = -1;  // -1 = take from train config
  double eta = -1.0;    // -1 = take from dataset
};

int cmd_reconstruct(const ReconstructArgs& a) {
  auto ds = load_dataset(a.data_path);
  const auto grids = load_grids(a.grids_path);
  ArchSpec arch;
  if (!a.arch_path.empty()) {
    try {
      arch = ArchSpec::from_json(load_config(a.arch_path));
    } catch (const std::exception& e) {
      throw InvalidInput(a.arch_path + ": " + e.what());
    }
  }
  TrainConfig train;
  if (!a.train_path.empty()) {
    try {
      train = TrainConfig::from_json(load_config(a.train_path));
    } catch (const std::exception& e) {
      throw InvalidInput(a.train_path + ": " + e.what());
    }
  }
  if (a.seed >= 0) train.seed = static_cast<std::uint64_t>(a.seed);
  if (a.eta > 0.0) ds.efficiency = a.eta;

  ensure_dir(a.out);
  const auto t0 = std::chrono::steady_clock::now();
  auto [model, report] =
      cvtomo::train(init_mlp(arch, grids.position, train.seed), ds, grids,
                    train);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  const nlohmann::json config = {{"data", a.data_path},
                                 {"grids", grids.to_json()},
                                 {"arch", arch.to_json()},
                                 {"train", train.to_json()}};
  const auto prov = provenance_json(config, static_cast<long long>(train.seed));

  model.save(join(a.out, "model.bin"));
  const CMat rho = build_density(model.params, model.grid);
  write_matrix_csv(rho, model.grid, join(a.out, "rho.csv"), prov);
  nlohmann::json rep = report.to_json();
  rep["wall_time_total_s"] = wall;
  rep["provenance"] = prov;
  save_json(rep, join(a.out, "report.json"));
  std::cout << "final NLL " << report.final_loss << " after "
            << report.iterations << " iterations ("
            << (report.converged ? "converged" : "max iterations") << ")\n";
  if (report.diverged) {
    std::cerr << "error: training diverged\n";
    return kExitDiverged;
  }
  return 0;
}

struct BaselineArgs {
  std::string data_path, out = "rho_fock.csv";
  int cutoff = 30, iters = 500;
  double quantize = 1e-3;
};

int cmd_baseline(const BaselineArgs& a) {
  const auto ds = load_dataset(a.data_path);
  if (a.cutoff < 0) throw InvalidInput("cutoff must be >= 0");
  MaxLikOptions opts;
  opts.iterations = a.iters;
  opts.quantize = a.quantize;
  const auto res = maxlik_reconstruct(ds, a.cutoff, opts);
  const nlohmann::json config = {{"data", a.data_path},
                                 {"cutoff", a.cutoff},
                                 {"iterations", a.iters}};
  write_fock_csv(res.rho, a.out,
                 {{"cutoff", res.rho.cutoff},
                  {"nll_final", res.nll.back()},
                  {"iterations", res.nll.size()},
                  {"provenance", provenance_json(config, ds.seed)}});
  std::cout << "final NLL " << res.nll.back() << ", wrote " << a.out << "\n";
  return 0;
}

struct WignerArgs {
  std::string rho_path, model_path, out = "wigner.csv";
  double x_min = 0.0, x_max = 0.0, p_min = -5.0, p_max = 5.0;
  int nx = 0, np = 201;
};

int cmd_wigner(const WignerArgs& a) {
  if (a.rho_path.empty() == a.model_path.empty())
    throw InvalidInput("exactly one of --rho / --model is required");
  WignerGrid w;
  nlohmann::json config;
  long long seed = -1;
  if (!a.rho_path.empty()) {
    auto [rho, grid] = read_matrix_csv(a.rho_path);
    double lo = a.x_min, hi = a.x_max;
    int nx = a.nx;
    if (lo == 0.0 && hi == 0.0) {
      lo = grid.min();
      hi = grid.max();
    }
    if (nx == 0) nx = static_cast<int>(grid.size());
    w = wigner(rho, grid, linspace(lo, hi, nx), linspace(a.p_min, a.p_max, a.np));
    config = {{"rho", a.rho_path}};
  } else {
    const TrainedModel model = TrainedModel::load(a.model_path);
    double lo = a.x_min, hi = a.x_max;
    int nx = a.nx;
    if (lo == 0.0 && hi == 0.0) {
      lo = model.grid.min();
      hi = model.grid.max();
    }
    if (nx == 0) nx = static_cast<int>(model.grid.size());
    w = wigner(model, linspace(lo, hi, nx), linspace(a.p_min, a.p_max, a.np));
    config = {{"model", a.model_path}};
  }
  write_wigner_csv(w, a.out, provenance_json(config, seed));
  std::cout << "wrote " << a.out << "\n";
  return 0;
}

struct FidelityArgs {
  std::string a_path, b_path, out;
};

int cmd_fidelity(const FidelityArgs& a) {
  auto [ra, ga] = read_matrix_csv(a.a_path);
  auto [rb, gb] = read_matrix_csv(a.b_path);
  if (ga.size() != gb.size())
    throw InvalidInput("fidelity: grids have different sizes");
  for (std::size_t j = 0; j < ga.size(); ++j)
    if (std::abs(ga.points[j] - gb.points[j]) > 1e-9)
      throw InvalidInput("fidelity: grids differ");
  const nlohmann::json report = {
      {"fidelity", fidelity(ra, rb)},
      {"purity_a", purity(ra)},
      {"purity_b", purity(rb)},
      {"provenance",
       provenance_json({{"a", a.a_path}, {"b", a.b_path}}, -1)}};
  std::cout << report.dump(2) << "\n";
  if (!a.out.empty()) save_json(report, a.out);
  return 0;
}

struct CompareArgs {
  std::string data_path, nn_path, fock_path, out;
};

int cmd_compare(const CompareArgs& a) {
  const auto ds = load_dataset(a.data_path);
  auto [nn_rho, grid] = read_matrix_csv(a.nn_path);
  const FockDensity fock = read_fock_csv(a.fock_path);
  CMat fock_pos;
  try {
    fock_pos = fock_to_position(fock, grid);
  } catch (const std::exception& e) {
    throw InvalidInput(std::string("compare: ") + e.what());
  }
  const double mutual = fidelity(nn_rho, fock_pos);
  const double nll_nn = held_out_nll(nn_rho, grid, ds);
  const double nll_fock = held_out_nll(fock_pos, grid, ds);
  const nlohmann::json report = {
      {"mutual_fidelity", mutual},
      {"nll_nn", nll_nn},
      {"nll_maxlik", nll_fock},
      {"purity_nn", purity(nn_rho)},
      {"purity_maxlik", purity(fock_pos)},
      {"n_samples", ds.samples.size()},
      {"provenance",
       provenance_json({{"data", a.data_path},
                        {"nn", a.nn_path},
                        {"fock", a.fock_path}},
                       ds.seed)}};
  std::cout << report.dump(2) << "\n";
  if (!a.out.empty()) save_json(report, a.out);
  return 0;
}

struct SweepArgs {
  std::string config_path, out = "sweep.csv";
  int threads = 1;
};

struct SweepCell {
  double alpha;
  long n;
  int rep;
  std::uint64_t seed;
  double fidelity = std::nan("");
  double wall_time_s = std::nan("");
  std::string error;
};

void run_sweep_cell(SweepCell& cell, double parity, double eta,
                    const PhasePolicy& policy, const ArchSpec& arch,
                    TrainConfig train, double window, double quantile,
                    double margin) {
  const auto t0 = std::chrono::steady_clock::now();
  const PureStateSpec spec = PureStateSpec::two_cat({cell.alpha, 0.0}, parity);
  const auto ds = sample_dataset(spec, cell.n, policy, eta, cell.seed);
  RegionSuggestion sug;
  try {
    sug = infer_regions(ds, window, quantile, margin);
  } catch (const std::exception&) {
    // data-driven inference needs enough axis samples; fall back to the
    // analytic region for this amplitude
    const double peak = cell.alpha * std::sqrt(2.0);
    sug.position_intervals = peak - margin - 2.0 < -(peak + margin + 2.0) + 1.0
                                 ? std::vector<std::pair<double, double>>{
                                       {-(peak + margin + 2.0),
                                        peak + margin + 2.0}}
                                 : std::vector<std::pair<double, double>>{
                                       {-(peak + margin + 2.0),
                                        -(peak - margin - 2.0)},
                                       {peak - margin - 2.0,
                                        peak + margin + 2.0}};
    sug.momentum_interval = {-4.0 - margin * 0.5, 4.0 + margin * 0.5};
    sug.x_max = peak + margin + 2.0;
    sug.p_max = sug.momentum_interval.second;
    sug.delta_x = 1.0 / sug.p_max / 1.5;
    sug.delta_p = 1.0 / sug.x_max / 1.5;
  }
  const auto grids =
      ReconstructionGrids::make(sug.position_grid(), sug.momentum_grid());
  train.seed = cell.seed;
  const auto [model, report] =
      cvtomo::train(init_mlp(arch, grids.position, cell.seed), ds, grids, train);
  if (report.diverged) {
    cell.error = "diverged";
    return;
  }
  const CMat rho = build_density(model.params, grids.position);
  const CMat truth = density_on_grid(spec, grids.position);
  cell.fidelity = fidelity(rho, truth);
  cell.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
}

int cmd_sweep(const SweepArgs& a) {
  const nlohmann::json cfg = load_config(a.config_path);
  std::vector<double> alphas = cfg.at("alphas").get<std::vector<double>>();
  std::vector<long> ns = cfg.at("ns").get<std::vector<long>>();
  const int reps = cfg.value("repetitions", 5);
  if (reps < 1) throw InvalidInput("repetitions must be >= 1");
  const double eta = cfg.value("eta", 1.0);
  const double parity = cfg.value("parity", -1.0);
  const std::uint64_t base_seed = cfg.value("base_seed", 1ull);
  const PhasePolicy policy =
      PhasePolicy::parse(cfg.value("phases", std::string("comb:16")));
  ArchSpec arch;
  if (cfg.contains("arch")) arch = ArchSpec::from_json(cfg.at("arch"));
  TrainConfig train;
  if (cfg.contains("train")) train = TrainConfig::from_json(cfg.at("train"));
  const double window = cfg.value("window", 0.1);
  const double quantile = cfg.value("quantile", 0.995);
  const double margin = cfg.value("margin", 4.5);

  std::vector<SweepCell> cells;
  for (double alpha : alphas)
    for (long n : ns)
      for (int rep = 0; rep < reps; ++rep)
        cells.push_back(
            {alpha, n, rep, cell_seed(base_seed, alpha, n, rep)});

  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      auto& c = cells[i];
      try {
        run_sweep_cell(c, parity, eta, policy, arch, train, window, quantile,
                       margin);
      } catch (const std::exception& e) {
        c.error = e.what();
      }
      std::lock_guard<std::mutex> lock(log_mutex);
      std::cout << "alpha=" << c.alpha << " n=" << c.n << " rep=" << c.rep
                << (c.error.empty()
                        ? " F=" + std::to_string(c.fidelity)
                        : " error: " + c.error)
                << "\n";
    }
  };
  std::vector<std::thread> pool;
  const int nthreads = std::max(1, a.threads);
  for (int t = 0; t < nthreads - 1; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::ofstream f(a.out);
  if (!f) throw std::runtime_error("cannot open " + a.out);
  f.precision(17);
  f << "alpha,n,repetition,seed,fidelity,wall_time\n";
  for (const auto& c : cells)
    f << c.alpha << ',' << c.n << ',' << c.rep << ',' << c.seed << ','
      << c.fidelity << ',' << c.wall_time_s << '\n';

  // median fidelity per (alpha, n) cell
  nlohmann::json medians = nlohmann::json::array();
  for (double alpha : alphas) {
    for (long n : ns) {
      std::vector<double> fs;
      for (const auto& c : cells)
        if (c.alpha == alpha && c.n == n && std::isfinite(c.fidelity))
          fs.push_back(c.fidelity);
      double med = std::nan("");
      if (!fs.empty()) {
        std::sort(fs.begin(), fs.end());
        med = fs.size() % 2 ? fs[fs.size() / 2]
                            : 0.5 * (fs[fs.size() / 2 - 1] + fs[fs.size() / 2]);
      }
      medians.push_back({{"alpha", alpha},
                         {"n", n},
                         {"median_fidelity", med},
                         {"valid_cells", fs.size()}});
    }
  }
  nlohmann::json side = {{"medians", medians},
                         {"provenance",
                          provenance_json(cfg, static_cast<long long>(
                                                   base_seed))}};
  const auto pos = a.out.find_last_of('.');
  save_json(side, (pos == std::string::npos ? a.out : a.out.substr(0, pos)) +
                      ".json");
  std::cout << side.at("medians").dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"continuous-variable homodyne tomography toolkit"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "draw quadrature samples");
  c_sim->add_option("--spec", sim.spec_path, "state spec JSON")->required();
  c_sim->add_option("--n", sim.n, "sample count");
  c_sim->add_option("--eta", sim.eta, "detection efficiency");
  c_sim->add_option("--phases", sim.phases, "uniform or comb:M");
  c_sim->add_option("--seed", sim.seed, "RNG seed");
  c_sim->add_option("--out", sim.out, "output CSV (or directory/)");

  InferGridArgs inf;
  auto* c_inf = app.add_subcommand("infer-grid", "suggest reconstruction grids");
  c_inf->add_option("--data", inf.data_path, "dataset CSV")->required();
  c_inf->add_option("--window", inf.window, "phase window (rad)");
  c_inf->add_option("--quantile", inf.quantile, "central mass per cluster");
  c_inf->add_option("--margin", inf.margin, "padding per cluster");
  c_inf->add_option("--out", inf.out, "output JSON");

  ReconstructArgs rec;
  auto* c_rec = app.add_subcommand("reconstruct", "train the NN reconstruction");
  c_rec->add_option("--data", rec.data_path, "dataset CSV")->required();
  c_rec->add_option("--grids", rec.grids_path, "grids JSON")->required();
  c_rec->add_option("--arch", rec.arch_path, "architecture JSON");
  c_rec->add_option("--train", rec.train_path, "training config JSON");
  c_rec->add_option("--seed", rec.seed, "override training seed");
  c_rec->add_option("--eta", rec.eta, "override dataset efficiency");
  c_rec->add_option("--out", rec.out, "output directory");

  BaselineArgs base;
  auto* c_base = app.add_subcommand("baseline", "Fock-basis MaxLik baseline");
  c_base->add_option("--data", base.data_path, "dataset CSV")->required();
  c_base->add_option("--cutoff", base.cutoff, "Fock cutoff");
  c_base->add_option("--iters", base.iters, "iterations");
  c_base->add_option("--quantize", base.quantize, "(theta, X) cache step");
  c_base->add_option("--out", base.out, "output CSV");

  WignerArgs wig;
  auto* c_wig = app.add_subcommand("wigner", "evaluate the Wigner function");
  c_wig->add_option("--rho", wig.rho_path, "density matrix CSV");
  c_wig->add_option("--model", wig.model_path, "model checkpoint");
  c_wig->add_option("--x-min", wig.x_min, "x range start");
  c_wig->add_option("--x-max", wig.x_max, "x range end");
  c_wig->add_option("--nx", wig.nx, "x point count");
  c_wig->add_option("--p-min", wig.p_min, "p range start");
  c_wig->add_option("--p-max", wig.p_max, "p range end");
  c_wig->add_option("--np", wig.np, "p point count");
  c_wig->add_option("--out", wig.out, "output CSV");

  FidelityArgs fid;
  auto* c_fid = app.add_subcommand("fidelity", "Uhlmann fidelity of two dumps");
  c_fid->add_option("--a", fid.a_path, "first density matrix CSV")->required();
  c_fid->add_option("--b", fid.b_path, "second density matrix CSV")->required();
  c_fid->add_option("--out", fid.out, "report JSON");

  CompareArgs cmp;
  auto* c_cmp = app.add_subcommand("compare", "NN vs MaxLik comparison");
  c_cmp->add_option("--data", cmp.data_path, "held-out dataset CSV")->required();
  c_cmp->add_option("--nn", cmp.nn_path, "NN density matrix CSV")->required();
  c_cmp->add_option("--fock", cmp.fock_path, "Fock density CSV")->required();
  c_cmp->add_option("--out", cmp.out, "report JSON");

  SweepArgs swp;
  auto* c_swp = app.add_subcommand("sweep", "fidelity-vs-(alpha, N) sweep");
  c_swp->add_option("--config", swp.config_path, "sweep config JSON")
      ->required();
  c_swp->add_option("--threads", swp.threads, "worker pool width");
  c_swp->add_option("--out", swp.out, "output CSV");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*c_sim) return cmd_simulate(sim);
    if (*c_inf) return cmd_infer_grid(inf);
    if (*c_rec) return cmd_reconstruct(rec);
    if (*c_base) return cmd_baseline(base);
    if (*c_wig) return cmd_wigner(wig);
    if (*c_fid) return cmd_fidelity(fid);
    if (*c_cmp) return cmd_compare(cmp);
    if (*c_swp) return cmd_sweep(swp);
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDiverged;
  }
  return 0;
}
