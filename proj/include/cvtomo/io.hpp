#ifndef CVTOMO_IO_HPP
#define CVTOMO_IO_HPP

#include <string>

#include "cvtomo/analysis.hpp"

namespace cvtomo {

inline constexpr const char* kVersion = "1.0.0";

std::uint64_t fnv1a(const std::string& s);

/// Standard provenance block embedded in every artifact sidecar:
/// {"version", "seed", "config_hash"} with the hash taken over the full
/// run configuration JSON.
nlohmann::json provenance_json(const nlohmann::json& config, long long seed);

nlohmann::json load_json(const std::string& path);
void save_json(const nlohmann::json& j, const std::string& path);

/// Matrix dump: CSV rows (i, j, re, im) plus a JSON sidecar (same stem,
/// .json) holding the grid and provenance.
void write_matrix_csv(const CMat& m, const Grid& grid, const std::string& path,
                      const nlohmann::json& provenance);
std::pair<CMat, Grid> read_matrix_csv(const std::string& path);

/// Wigner dump: CSV rows (x, p, w), invalid rows omitted, plus JSON sidecar.
void write_wigner_csv(const WignerGrid& w, const std::string& path,
                      const nlohmann::json& provenance);

}  // namespace cvtomo

#endif
