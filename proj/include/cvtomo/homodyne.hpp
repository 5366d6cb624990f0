#ifndef CVTOMO_HOMODYNE_HPP
#define CVTOMO_HOMODYNE_HPP

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cvtomo/states.hpp"

namespace cvtomo {

struct QuadratureSample {
  double theta;  // local-oscillator phase, [0, pi)
  double value;  // measured quadrature
};

/// Phase selection for simulated measurements. X_{theta+pi} = -X_theta, so
/// phases are restricted to [0, pi).
struct PhasePolicy {
  enum class Kind { Uniform, Comb };
  Kind kind = Kind::Uniform;
  int comb_size = 0;

  static PhasePolicy uniform() { return {Kind::Uniform, 0}; }
  static PhasePolicy comb(int m);

  std::string to_string() const;
  static PhasePolicy parse(const std::string& s);
};

struct QuadratureDataset {
  std::vector<QuadratureSample> samples;
  double efficiency = 1.0;  // eta in (0, 1]
  std::optional<PureStateSpec> provenance_spec;
  long long seed = -1;
  PhasePolicy policy;
};

/// Probability density of measuring X_theta at phase theta with detection
/// efficiency eta; eta = 1 gives |<X_theta,theta|psi>|^2, eta < 1 the
/// Gaussian-smeared (beam-splitter loss) density.
std::vector<double> oracle_pdf(const PureState& state, double theta,
                               const std::vector<double>& xs, double eta);
std::vector<double> oracle_pdf(const PureStateSpec& spec, double theta,
                               const std::vector<double>& xs, double eta);

/// Cumulative distribution of the oracle pdf at one phase, as a callable
/// (built on a fine internal grid).
std::function<double(double)> oracle_cdf(const PureState& state, double theta,
                                         double eta);

/// Draws n quadrature samples: theta per policy, lossless Q by inverse-CDF
/// sampling of |psi_theta|^2, then X = sqrt(eta) Q + N(0, (1-eta)/2).
/// Per-sample randomness is counter-based, so results depend only on
/// (seed, index).
QuadratureDataset sample_dataset(const PureStateSpec& spec, long n,
                                 PhasePolicy policy, double eta,
                                 unsigned long long seed);

/// CSV with header `theta,x` plus a JSON sidecar (same path, .json extension)
/// holding eta, seed, n, policy and the generating spec.
void write_dataset(const QuadratureDataset& ds, const std::string& csv_path);
QuadratureDataset read_dataset(const std::string& csv_path);

struct KsResult {
  double statistic;
  double p_value;
};

/// One-sample two-sided Kolmogorov-Smirnov test against a reference CDF.
KsResult ks_test(std::vector<double> values,
                 const std::function<double(double)>& cdf);

}  // namespace cvtomo

#endif
