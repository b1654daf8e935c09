#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "alma/constraint.hpp"
#include "alma/distance.hpp"
#include "alma/model.hpp"
#include "alma/optimizer.hpp"
#include "alma/penalty.hpp"
#include "alma/tensor.hpp"

namespace alma {

/// Hyperparameters of the fused augmented-Lagrangian attack.
struct AlmaConfig {
  std::size_t iterations = 1000;
  double epsilon = 0.1;   // distance increase targeted by the first step
  double alpha = 0.9;     // EMA coefficient on the multiplier
  double gamma = 1.2;     // rho growth factor
  double tau = 0.95;      // required constraint improvement over check_period
  std::size_t check_period = 10;
  double mu_init = 1.0;
  double rho_init = 1.0;
  double mu_min = 1e-6;
  double mu_max = 1e12;
  PenaltySpec penalty{PenaltyKind::P2};
  DistanceSpec distance{};
  ConstraintSpec constraint{};
  OptimizerConstants optimizer{};
  double final_lr_fraction = 0.01;
  bool record_trace = false;

  /// Defaults for a distance and iteration budget (epsilon per distance, alpha per budget).
  static AlmaConfig defaults(DistanceKind kind, std::size_t iterations);

  /// Throws InvalidArgument on out-of-range settings.
  void validate() const;
};

double default_epsilon(DistanceKind kind);
/// 0.5 below 1000 iterations, 0.9 from 1000 on.
double default_alpha(std::size_t iterations);

struct StepSizeSearch {
  double eta = 0.0;
  double achieved_distance = 0.0;
  bool saturated = false;  // projection prevents reaching epsilon
};

/// Finds eta with D(clip(x - eta g), x) == epsilon (relative tolerance 1e-3):
/// geometric bracketing by factors of 10, then at most 30 bisection steps.
/// Throws ZeroGradient when g is identically zero.
StepSizeSearch step_size_for_direction(const Tensor& x, const Tensor& direction, const DistanceSpec& distance,
                                       double epsilon);

/// Same search along the constraint gradient at x; spends one forward and one backward.
StepSizeSearch init_step_size(const Model& model, const Tensor& x, std::size_t label, const ConstraintSpec& constraint,
                              const DistanceSpec& distance, double epsilon, PropagationCounter& counter);

/// Constant until the first adversarial iterate i0, then exponential decay
/// reaching eta0 * final_fraction at the last iteration.
double lr_at(std::size_t i, double eta0, std::size_t iterations, double final_fraction,
             std::optional<std::size_t> found_iteration);

struct IterationRecord {
  double constraint = 0.0;  // d(i)
  double mu = 0.0;          // multiplier after the EMA update
  double rho = 0.0;
  double lr = 0.0;
  double distance = 0.0;    // D(x_tilde(i), x)
  double loss = 0.0;
};

struct AttackResult {
  bool success = false;
  std::optional<Tensor> adversarial;
  std::optional<double> distance;
  PropagationCounter counters;        // main loop only
  PropagationCounter init_counters;   // step-size initialisation
  std::optional<std::size_t> found_iteration;
  double initial_lr = 0.0;
  bool init_saturated = false;
  std::vector<IterationRecord> trace;  // filled when record_trace is set
};

/// Runs exactly config.iterations iterations and returns the adversarial
/// iterate with the smallest distance. `label` is the true label, or the
/// target when config.constraint.targeted is set.
AttackResult alma_attack(const Model& model, const Tensor& x, std::size_t label, const AlmaConfig& config);

}  // namespace alma
