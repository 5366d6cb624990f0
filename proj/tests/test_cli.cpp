#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "cvtomo/analysis.hpp"
#include "cvtomo/io.hpp"

using namespace cvtomo;
namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd =
      std::string(CV_TOMO_BIN) + " " + args + " >cli_stdout.txt 2>cli_stderr.txt";
  const int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

struct TempDir {
  fs::path old;
  explicit TempDir(const std::string& name) : old(fs::current_path()) {
    fs::remove_all(name);
    fs::create_directories(name);
    fs::current_path(name);
  }
  ~TempDir() {
    fs::path here = fs::current_path();
    fs::current_path(old);
    fs::remove_all(here);
  }
};

void write_spec(const std::string& path, const PureStateSpec& spec) {
  save_json({{"format", 1}, {"spec", spec.to_json()}}, path);
}

}  // namespace

TEST_CASE("simulate is reproducible and respects n") {
  TempDir tmp("cli_simulate");
  write_spec("spec.json", PureStateSpec::fock(0));
  REQUIRE(run("simulate --spec spec.json --n 500 --seed 9 --out a.csv") == 0);
  REQUIRE(run("simulate --spec spec.json --n 500 --seed 9 --out b.csv") == 0);
  CHECK(slurp("a.csv") == slurp("b.csv"));
  const auto ds = read_dataset("a.csv");
  CHECK(ds.samples.size() == 500);
  CHECK(ds.seed == 9);
}

TEST_CASE("simulate rejects bad input") {
  TempDir tmp("cli_simulate_bad");
  write_spec("spec.json", PureStateSpec::fock(0));
  CHECK(run("simulate --spec spec.json --eta 1.5 --out a.csv") == 2);
  CHECK(run("simulate --spec missing.json --out a.csv") == 2);
  CHECK(run("simulate --spec spec.json --n 0 --out a.csv") == 2);
  CHECK(!fs::exists("a.csv"));
}

TEST_CASE("reconstruct fails cleanly on a missing grids file") {
  TempDir tmp("cli_missing_grids");
  write_spec("spec.json", PureStateSpec::fock(0));
  REQUIRE(run("simulate --spec spec.json --n 200 --seed 1 --out data.csv") == 0);
  CHECK(run("reconstruct --data data.csv --grids nope.json --out model/") == 2);
  CHECK(!fs::exists("model/rho.csv"));
  CHECK(!fs::exists("model/model.bin"));
}

TEST_CASE("single-photon pipeline end to end") {
  TempDir tmp("cli_pipeline");
  write_spec("spec.json", PureStateSpec::fock(1));
  REQUIRE(run("simulate --spec spec.json --n 8000 --phases comb:6 --seed 7 "
              "--out data.csv") == 0);
  REQUIRE(run("infer-grid --data data.csv --window 0.1 --quantile 0.995 "
              "--margin 1.0 --out grids.json") == 0);
  save_json({{"format", 1},
             {"max_iterations", 500},
             {"step_size", 5e-3},
             {"step_decay", 0.998},
             {"seed", 3}},
            "train.json");
  save_json({{"format", 1},
             {"hidden", {24, 24}},
             {"activations", {"tanh", "tanh"}}},
            "arch.json");
  REQUIRE(run("reconstruct --data data.csv --grids grids.json --arch arch.json "
              "--train train.json --out model/") == 0);
  REQUIRE(fs::exists("model/model.bin"));
  REQUIRE(fs::exists("model/rho.csv"));
  REQUIRE(fs::exists("model/report.json"));
  const auto report = load_json("model/report.json");
  CHECK(report.at("provenance").contains("seed"));

  auto [rho, grid] = read_matrix_csv("model/rho.csv");
  const CMat truth = density_on_grid(PureStateSpec::fock(1), grid);
  CHECK(fidelity(rho, truth) >= 0.99);

  // determinism: rerunning with the same seed gives a bit-identical dump
  REQUIRE(run("reconstruct --data data.csv --grids grids.json --arch arch.json "
              "--train train.json --out model2/") == 0);
  CHECK(slurp("model/rho.csv") == slurp("model2/rho.csv"));

  REQUIRE(run("baseline --data data.csv --cutoff 8 --iters 200 "
              "--out rho_fock.csv") == 0);
  REQUIRE(run("compare --data data.csv --nn model/rho.csv --fock rho_fock.csv "
              "--out compare.json") == 0);
  const auto cmp = load_json("compare.json");
  CHECK(cmp.at("mutual_fidelity").get<double>() >= 0.99);
  CHECK(cmp.at("nll_nn").get<double>() > 0.0);
  CHECK(cmp.at("nll_maxlik").get<double>() > 0.0);

  REQUIRE(run("wigner --rho model/rho.csv --np 31 --out wigner.csv") == 0);
  std::ifstream wf("wigner.csv");
  std::string header;
  std::getline(wf, header);
  CHECK(header == "x,p,w");
  REQUIRE(run("wigner --model model/model.bin --nx 11 --np 11 "
              "--out wigner_model.csv") == 0);
  CHECK(fs::exists("wigner_model.csv"));

  REQUIRE(run("fidelity --a model/rho.csv --b model/rho.csv "
              "--out selffid.json") == 0);
  const auto fid = load_json("selffid.json");
  CHECK(fid.at("fidelity").get<double>() ==
        doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("compare rejects mismatched grids") {
  TempDir tmp("cli_compare_bad");
  write_spec("spec.json", PureStateSpec::fock(0));
  REQUIRE(run("simulate --spec spec.json --n 300 --seed 2 --out data.csv") == 0);
  // a grid this small cannot carry the vacuum; fock_to_position must refuse
  const Grid tiny = make_grid({{-0.4, 0.4}}, 9);
  CMat fake = CMat::Zero(9, 9);
  fake(4, 4) = 1.0;
  write_matrix_csv(fake, tiny, "nn.csv", {});
  std::ofstream f("fock.csv");
  f << "m,n,re,im\n0,0,1.0,0.0\n";
  f.close();
  CHECK(run("compare --data data.csv --nn nn.csv --fock fock.csv") == 2);
}

TEST_CASE("sweep emits one row per cell plus medians") {
  TempDir tmp("cli_sweep");
  save_json({{"format", 1},
             {"alphas", {1.0, 2.0}},
             {"ns", {1500}},
             {"repetitions", 2},
             {"base_seed", 11},
             {"phases", "comb:8"},
             {"margin", 1.5},
             {"arch",
              {{"hidden", {16, 16}}, {"activations", {"tanh", "tanh"}}}},
             {"train",
              {{"max_iterations", 80}, {"step_size", 5e-3}, {"seed", 0}}}},
            "sweep.json");
  REQUIRE(run("sweep --config sweep.json --threads 2 --out results.csv") == 0);
  std::ifstream f("results.csv");
  std::string line;
  std::getline(f, line);
  CHECK(line == "alpha,n,repetition,seed,fidelity,wall_time");
  int rows = 0;
  while (std::getline(f, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 4);
  // medians sidecar shares the CSV stem
  const auto side = load_json("results.json");
  REQUIRE(side.contains("medians"));
  CHECK(side.at("medians").size() == 2);
  for (const auto& m : side.at("medians"))
    CHECK(m.at("valid_cells").get<int>() == 2);
}
