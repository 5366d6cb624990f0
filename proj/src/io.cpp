#include "cvtomo/io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cvtomo {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

nlohmann::json provenance_json(const nlohmann::json& config, long long seed) {
  return {{"version", kVersion},
          {"seed", seed},
          {"config_hash", fnv1a(config.dump())}};
}

nlohmann::json load_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  return nlohmann::json::parse(f);
}

void save_json(const nlohmann::json& j, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  f << j.dump(2) << '\n';
}

namespace {
std::string sidecar_path(const std::string& path) {
  const auto pos = path.find_last_of('.');
  return (pos == std::string::npos ? path : path.substr(0, pos)) + ".json";
}
}  // namespace

void write_matrix_csv(const CMat& m, const Grid& grid, const std::string& path,
                      const nlohmann::json& provenance) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  f.precision(17);
  f << "i,j,re,im\n";
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      f << i << ',' << j << ',' << m(i, j).real() << ',' << m(i, j).imag()
        << '\n';
  nlohmann::json side = {{"grid", grid.to_json()},
                         {"rows", m.rows()},
                         {"cols", m.cols()},
                         {"provenance", provenance}};
  save_json(side, sidecar_path(path));
}

std::pair<CMat, Grid> read_matrix_csv(const std::string& path) {
  const nlohmann::json side = load_json(sidecar_path(path));
  Grid grid = Grid::from_json(side.at("grid"));
  const Eigen::Index rows = side.at("rows").get<Eigen::Index>();
  const Eigen::Index cols = side.at("cols").get<Eigen::Index>();

  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(f, line) || line.rfind("i,j,re,im", 0) != 0)
    throw std::runtime_error("matrix CSV missing `i,j,re,im` header");
  CMat m = CMat::Zero(rows, cols);
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string a, b, c, d;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') ||
        !std::getline(ss, c, ',') || !std::getline(ss, d))
      throw std::runtime_error("malformed matrix row: " + line);
    const Eigen::Index i = std::stoll(a), j = std::stoll(b);
    if (i < 0 || i >= rows || j < 0 || j >= cols)
      throw std::out_of_range("matrix index out of range: " + line);
    m(i, j) = Cmplx(std::stod(c), std::stod(d));
  }
  return {std::move(m), std::move(grid)};
}

void write_wigner_csv(const WignerGrid& w, const std::string& path,
                      const nlohmann::json& provenance) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  f.precision(17);
  f << "x,p,w\n";
  for (std::size_t xi = 0; xi < w.xs.size(); ++xi) {
    if (!w.valid[xi]) continue;
    for (std::size_t pi = 0; pi < w.ps.size(); ++pi)
      f << w.xs[xi] << ',' << w.ps[pi] << ',' << w.values(xi, pi) << '\n';
  }
  nlohmann::json side = {{"n_x", w.xs.size()},
                         {"n_p", w.ps.size()},
                         {"provenance", provenance}};
  save_json(side, sidecar_path(path));
}

}  // namespace cvtomo
