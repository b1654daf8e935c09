#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "alma/errors.hpp"
#include "alma/penalty.hpp"
#include "alma/solver.hpp"

namespace alma {

// ---- generic augmented Lagrangian on smooth problems -------------------------

/// minimize objective(x) subject to constraint(x) < 0.
struct SmoothProblem {
  std::string name;
  std::size_t dimension = 0;
  std::function<double(const std::vector<double>&)> objective;
  std::function<std::vector<double>(const std::vector<double>&)> objective_grad;
  std::function<double(const std::vector<double>&)> constraint;
  std::function<std::vector<double>(const std::vector<double>&)> constraint_grad;
  std::vector<double> start;
  std::optional<std::vector<double>> solution;
  std::optional<double> multiplier;  // Lagrange multiplier at the solution, when known
};

/// min ||x||^2 s.t. 1 - x_0 < 0. Solution e_0, multiplier 2.
SmoothProblem halfspace_projection_problem(std::size_t dimension = 3);
/// min (x-2)^2 s.t. x - 1 < 0. Solution 1, multiplier 2.
SmoothProblem active_bound_problem();
/// min (x-0.5)^2 s.t. x - 1 < 0. Solution 0.5, constraint inactive.
SmoothProblem inactive_bound_problem();

struct AlmOptions {
  std::size_t outer_iters = 50;
  std::size_t inner_iters = 10000;
  double inner_tolerance = 1e-10;  // on the gradient norm of the inner objective
  double rho_factor = 10.0;        // in [2, 100]
  double tau_outer = 0.5;          // rho grows when h(x+) > tau_outer h(x)
  double outer_tolerance = 1e-9;   // stop once |max(h(x), -mu/rho)| falls below this
  double mu_init = 1.0;
  double rho_init = 1.0;
  double mu_min = 1e-6;
  double mu_max = 1e12;
};

struct AlmOuterRecord {
  std::vector<double> x;
  double objective = 0.0;
  double constraint = 0.0;
  double mu = 0.0;
  double rho = 0.0;
  std::size_t inner_steps = 0;
};

struct AlmResult {
  std::vector<double> x;
  double mu = 0.0;
  double rho = 0.0;
  std::vector<AlmOuterRecord> trace;
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::vector<AlmOuterRecord> trace)
      : Error(what), trace_(std::move(trace)) {}
  const std::vector<AlmOuterRecord>& trace() const { return trace_; }

 private:
  std::vector<AlmOuterRecord> trace_;
};

/// Classic outer/inner augmented Lagrangian loop. The inner solver is gradient
/// descent with step halving; after each inner solve mu <- P'(h(x), rho, mu)
/// (clamped to [mu_min, mu_max]) and rho is multiplied when h stalls. Stops
/// early when the complementarity measure max(h, -mu/rho) is below outer_tolerance.
AlmResult generic_alm(const SmoothProblem& problem, PenaltySpec penalty, const AlmOptions& options = {});

// ---- C&W-style penalty attack ------------------------------------------------

struct PenaltyAttackOptions {
  std::size_t search_steps = 9;
  std::size_t inner_iters = 1000;
  double c_init = 1.0;
  double lr = 0.01;
  DistanceSpec distance{};
  ConstraintSpec constraint{};
  OptimizerConstants optimizer{};
};

/// Minimises D(x_tilde, x) + c * max(d(x_tilde), 0) for a sequence of weights c:
/// x10 while no round succeeds, bisection between the last failing and
/// succeeding weight afterwards. Every round restarts from x with fresh
/// optimizer state and always runs inner_iters steps, so the propagation count
/// is exactly search_steps * inner_iters forwards and backwards.
AttackResult penalty_attack(const Model& model, const Tensor& x, std::size_t label,
                            const PenaltyAttackOptions& options = {});

// ---- budget attacks turned into minimal-perturbation attacks -----------------

using BudgetAttack = std::function<std::optional<Tensor>(double budget)>;

struct BisectionResult {
  Tensor adversarial;
  double budget = 0.0;
  double lo = 0.0;  // final bracket
  double hi = 0.0;
  std::size_t attack_calls = 0;
};

/// Bisection on the budget until hi - lo < precision. Returns nullopt when the
/// attack fails at the initial `hi`.
std::optional<BisectionResult> minimal_via_binary_search(const BudgetAttack& budget_attack, double lo, double hi,
                                                         double precision);

struct PgdOptions {
  std::size_t steps = 100;
  double step_fraction = 0.1;  // step length as a fraction of the budget
  ConstraintSpec constraint{};
};

/// Projected gradient descent on the constraint inside an L2 ball intersected
/// with the unit box. Returns the first iterate that satisfies the constraint.
std::optional<Tensor> pgd_l2_budget_attack(const Model& model, const Tensor& x, std::size_t label, double budget,
                                           const PgdOptions& options, PropagationCounter& counter);

}  // namespace alma
