#ifndef CVTOMO_STATES_HPP
#define CVTOMO_STATES_HPP

#include <memory>
#include <string>
#include <vector>

#include "cvtomo/grid.hpp"

namespace cvtomo {

/// Oscillator eigenfunction psi_n(x), evaluated with the stable two-term
/// recurrence (no explicit 2^n n! factor). Finite for n <= 2000, |x| <= 80.
double fock_wavefunction(int n, double x);

enum class StateKind { Fock, Superposition, Coherent, Cat, Gkp };

struct FockTerm {
  int n;
  Cmplx coeff;
};

struct CatComponent {
  Cmplx alpha;
  Cmplx coeff;
};

struct Transform {
  enum class Kind { Displace, Squeeze };
  Kind kind;
  Cmplx beta{};   // displacement amplitude
  double r = 0.0; // squeeze parameter, natural units (r > 0 squeezes position)
};

/// Natural-unit squeeze parameter from a dB figure, r = ln(10^(dB/20)).
inline double squeeze_db_to_r(double db) { return db * std::log(10.0) / 20.0; }

/// Symbolic description of an analytic pure test state plus an ordered list
/// of displacement/squeeze transforms applied on top.
struct PureStateSpec {
  StateKind kind = StateKind::Fock;
  int n = 0;                            // Fock
  std::vector<FockTerm> terms;          // Superposition
  Cmplx alpha{};                        // Coherent
  std::vector<CatComponent> components; // Cat
  double gkp_delta = 0.25;
  double gkp_k = 0.25;
  int gkp_smax = 8;
  std::vector<Transform> transforms;

  nlohmann::json to_json() const;
  static PureStateSpec from_json(const nlohmann::json& j);

  static PureStateSpec fock(int n);
  static PureStateSpec coherent(Cmplx alpha);
  static PureStateSpec superposition(std::vector<FockTerm> terms);
  static PureStateSpec cat(std::vector<CatComponent> components);
  /// |alpha> + parity * |-alpha>
  static PureStateSpec two_cat(Cmplx alpha, double parity);
  static PureStateSpec gkp(double delta, double k, int s_max);
};

struct WavefunctionOnGrid {
  Grid grid;
  std::vector<Cmplx> values;
  /// sum |values|^2 * delta
  double norm2() const;
};

/// Analytic pure state with its normalization constant cached.
/// Evaluation is pure and thread-safe after construction.
class PureState {
 public:
  explicit PureState(const PureStateSpec& spec);

  const PureStateSpec& spec() const { return spec_; }

  /// Normalized position wavefunction.
  Cmplx psi(double x) const;

  /// Rotated-frame wavefunction <X_theta, theta | state> at a single point,
  /// by direct quadrature of the overlap kernel (position-basis kernel for
  /// |sin theta| >= 1/sqrt(2), momentum-basis kernel otherwise).
  Cmplx psi_rotated(double theta, double x_theta) const;

  /// Rotated wavefunction on a uniform internal grid via FFT; fast path used
  /// by the sampler. Returns grid origin, step and values.
  struct RotatedTable {
    double x0 = 0.0;
    double dx = 0.0;
    std::vector<Cmplx> values;
    double value_norm2() const;
  };
  RotatedTable rotated_table(double theta) const;

  /// Conservative |psi| support radius in position space.
  double pos_extent() const { return pos_extent_; }
  /// Conservative |psi~| support radius in momentum space.
  double mom_extent() const { return mom_extent_; }
  /// Support radius of the theta-rotated wavefunction.
  double rotated_extent(double theta) const;

 private:
  Cmplx psi_raw(double x) const;
  /// Momentum wavefunction from a cached fine-grid FFT table (cubic interp).
  Cmplx psi_momentum(double p) const;
  void build_momentum_table() const;

  PureStateSpec spec_;
  double norm_ = 1.0;
  double pos_extent_ = 0.0;
  double mom_extent_ = 0.0;

  mutable std::shared_ptr<const RotatedTable> mom_table_;  // built on demand
};

/// <X_theta,theta|state> sampled on out_grid. Throws if the grid captures
/// less than 0.999 of the probability.
WavefunctionOnGrid rotated_wavefunction(const PureStateSpec& spec,
                                        double theta, const Grid& out_grid);
WavefunctionOnGrid rotated_wavefunction(const PureState& state, double theta,
                                        const Grid& out_grid);

/// Ground-truth rho = |psi><psi| discretized on the grid; entries carry the
/// grid step so that the plain matrix trace is 1.
CMat density_on_grid(const PureStateSpec& spec, const Grid& grid);
CMat density_on_grid(const PureState& state, const Grid& grid);

/// Normalized-state amplitude at a point (convenience; builds the state).
Cmplx wavefunction(const PureStateSpec& spec, double x);

}  // namespace cvtomo

#endif
