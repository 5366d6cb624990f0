#ifndef CVTOMO_NN_HPP
#define CVTOMO_NN_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cvtomo/likelihood.hpp"

namespace cvtomo {

enum class Activation { Tanh, Sin };

std::string activation_name(Activation a);
Activation activation_parse(const std::string& s);

/// Feed-forward network (X, X') -> (Re A, Im A). Inputs are affinely mapped
/// to [-1, 1] (per the training grid extent) before the first layer; the
/// output layer is linear.
struct MLPParams {
  std::vector<int> layer_sizes;          // {2, h_1, ..., h_L, 2}
  std::vector<Activation> activations;   // one per hidden layer
  std::vector<RMat> weights;             // out x in, per layer
  std::vector<RVec> biases;
  double in_center = 0.0;
  double in_scale = 1.0;  // u = (x - in_center) * in_scale

  std::size_t parameter_count() const;
  std::vector<double> flatten() const;
  void unflatten(const std::vector<double>& flat);
};

/// Architecture description as carried in config files and checkpoints.
struct ArchSpec {
  std::vector<int> hidden = {100, 100, 100};
  std::vector<Activation> activations = {Activation::Tanh, Activation::Tanh,
                                         Activation::Tanh};
  double first_layer_scale = 0.0;  // 0 = automatic (see init_mlp)

  nlohmann::json to_json() const;
  static ArchSpec from_json(const nlohmann::json& j);
};

/// Seeded uniform fan-in-scaled initialization. The input map is derived
/// from the grid extent. sin layers use the wider +-sqrt(6/fan_in) range;
/// the first layer of a sin stack is scaled by first_layer_scale (default
/// 30) so that oscillation frequencies up to that order are representable.
MLPParams init_mlp(const ArchSpec& arch, const Grid& grid,
                   std::uint64_t seed);

Cmplx forward(const MLPParams& params, double x, double x_prime);

/// A[j][k] = network(x_j, x_k) over the grid.
CMat build_amplitude(const MLPParams& params, const Grid& grid);

/// rho = A^dag A / Tr(A^dag A): Hermitian, PSD, trace-1 by construction.
CMat build_density(const MLPParams& params, const Grid& grid);

struct TrainConfig {
  int max_iterations = 2000;
  double step_size = 1e-3;
  double step_decay = 1.0;      // per-iteration multiplicative decay
  int minibatch = 0;            // 0 = full batch
  int convergence_window = 200;
  double tolerance = 1e-4;      // min improvement of best L over the window
  double grad_clip = 0.0;       // global-norm clip; 0 = off
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct TrainReport {
  std::vector<double> loss;  // per iteration
  double wall_time_s = 0.0;
  double final_loss = 0.0;
  int iterations = 0;
  bool converged = false;
  bool diverged = false;

  nlohmann::json to_json() const;
};

/// L = engine NLL of build_density(params); grad in flattened-parameter
/// order. Exact reverse-mode derivative of the full composite map.
double loss_and_gradient(const MLPParams& params, const LikelihoodEngine& engine,
                         std::vector<double>& grad,
                         const std::vector<std::uint8_t>* subset = nullptr);

/// Trained network plus the grid and the frozen normalization constant
/// Tr(A^dag A) used by off-grid queries.
struct TrainedModel {
  MLPParams params;
  Grid grid;
  double norm_trace = 0.0;

  void save(const std::string& path) const;
  static TrainedModel load(const std::string& path);
};

std::pair<TrainedModel, TrainReport> train(MLPParams params,
                                           const QuadratureDataset& dataset,
                                           const ReconstructionGrids& grids,
                                           const TrainConfig& config);

/// rho(x, x') at arbitrary pairs: sum over training-grid rows of
/// conj(A(x_m, x)) A(x_m, x') / norm_trace, Hermitized by averaging the
/// (x, x') and conjugated (x', x) queries. Coincides with build_density at
/// training nodes.
std::vector<Cmplx> query_density(const TrainedModel& model,
                                 const std::vector<std::pair<double, double>>& pairs);

/// Dense density matrix on a refinement grid; optionally renormalized to
/// plain trace 1.
CMat query_density_matrix(const TrainedModel& model, const Grid& fine,
                          bool renormalize);

}  // namespace cvtomo

#endif
