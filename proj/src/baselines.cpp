#include "alma/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace alma {

namespace {

double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

bool finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

SmoothProblem halfspace_projection_problem(std::size_t dimension) {
  if (dimension == 0) throw InvalidArgument("halfspace problem: dimension must be positive");
  SmoothProblem p;
  p.name = "halfspace";
  p.dimension = dimension;
  p.objective = [](const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return s;
  };
  p.objective_grad = [](const std::vector<double>& x) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) g[i] = 2.0 * x[i];
    return g;
  };
  p.constraint = [](const std::vector<double>& x) { return 1.0 - x[0]; };
  p.constraint_grad = [](const std::vector<double>& x) {
    std::vector<double> g(x.size(), 0.0);
    g[0] = -1.0;
    return g;
  };
  p.start.assign(dimension, 0.0);
  for (std::size_t i = 1; i < dimension; ++i) p.start[i] = (i % 2 == 0 ? -0.5 : 0.5) / static_cast<double>(i);
  p.solution = std::vector<double>(dimension, 0.0);
  (*p.solution)[0] = 1.0;
  p.multiplier = 2.0;
  return p;
}

namespace {

SmoothProblem scalar_bound_problem(std::string name, double center) {
  SmoothProblem p;
  p.name = std::move(name);
  p.dimension = 1;
  p.objective = [center](const std::vector<double>& x) { return (x[0] - center) * (x[0] - center); };
  p.objective_grad = [center](const std::vector<double>& x) { return std::vector<double>{2.0 * (x[0] - center)}; };
  p.constraint = [](const std::vector<double>& x) { return x[0] - 1.0; };
  p.constraint_grad = [](const std::vector<double>&) { return std::vector<double>{1.0}; };
  p.start = {0.0};
  return p;
}

}  // namespace

SmoothProblem active_bound_problem() {
  SmoothProblem p = scalar_bound_problem("active-bound", 2.0);
  p.solution = std::vector<double>{1.0};
  p.multiplier = 2.0;
  return p;
}

SmoothProblem inactive_bound_problem() {
  SmoothProblem p = scalar_bound_problem("inactive-bound", 0.5);
  p.solution = std::vector<double>{0.5};
  return p;
}

AlmResult generic_alm(const SmoothProblem& problem, PenaltySpec penalty, const AlmOptions& options) {
  if (!problem.objective || !problem.objective_grad || !problem.constraint || !problem.constraint_grad) {
    throw InvalidArgument("generic alm: problem is missing a function");
  }
  if (problem.start.size() != problem.dimension) throw InvalidArgument("generic alm: start has the wrong dimension");
  if (!(options.rho_factor >= 2.0 && options.rho_factor <= 100.0)) {
    throw InvalidArgument("generic alm: rho factor must lie in [2, 100]");
  }
  if (!(options.mu_min > 0.0 && options.mu_min <= options.mu_init && options.mu_init <= options.mu_max)) {
    throw InvalidArgument("generic alm: need 0 < mu_min <= mu_init <= mu_max");
  }

  AlmResult result;
  std::vector<double> x = problem.start;
  double mu = options.mu_init;
  double rho = options.rho_init;
  double h = problem.constraint(x);

  auto diverged = [&](const std::string& why) {
    return DivergenceError("generic alm on " + problem.name + ": " + why, result.trace);
  };

  for (std::size_t outer = 0; outer < options.outer_iters; ++outer) {
    auto G = [&](const std::vector<double>& v) { return problem.objective(v) + penalty_value(penalty, problem.constraint(v), rho, mu); };
    auto grad_G = [&](const std::vector<double>& v) {
      std::vector<double> g = problem.objective_grad(v);
      const std::vector<double> gh = problem.constraint_grad(v);
      const double w = penalty_derivative(penalty, problem.constraint(v), rho, mu);
      for (std::size_t k = 0; k < g.size(); ++k) g[k] += w * gh[k];
      return g;
    };

    double value = G(x);
    double step = 1.0;
    std::size_t inner = 0;
    for (; inner < options.inner_iters; ++inner) {
      const std::vector<double> g = grad_G(x);
      if (!finite(g) || !std::isfinite(value)) throw diverged("non-finite inner objective");
      const double gnorm = norm(g);
      if (gnorm <= options.inner_tolerance) break;

      // Armijo backtracking; the accepted step seeds the next search at twice its size.
      step = std::min(step * 2.0, 1e6);
      std::vector<double> trial(x.size());
      double trial_value = 0.0;
      for (;;) {
        for (std::size_t k = 0; k < x.size(); ++k) trial[k] = x[k] - step * g[k];
        trial_value = G(trial);
        // Strict decrease keeps steps honest once Armijo slack drops below an ulp of G.
        if (trial_value <= value - 1e-4 * step * gnorm * gnorm && trial_value < value) break;
        step *= 0.5;
        if (step < 1e-20) break;
      }
      if (step < 1e-20) break;
      x = std::move(trial);
      value = trial_value;
    }
    if (!finite(x) || norm(x) > 1e12) throw diverged("iterate escaped to infinity");

    const double h_next = problem.constraint(x);
    const double complementarity = std::max(h_next, -mu / rho);
    mu = std::clamp(penalty_derivative(penalty, h_next, rho, mu), options.mu_min, options.mu_max);
    if (h_next > options.tau_outer * h) rho *= options.rho_factor;
    h = h_next;
    result.trace.push_back({x, problem.objective(x), h, mu, rho, inner});
    if (!std::isfinite(rho)) throw diverged("penalty parameter overflowed");
    if (std::abs(complementarity) <= options.outer_tolerance) break;
  }
  result.x = std::move(x);
  result.mu = mu;
  result.rho = rho;
  return result;
}

AttackResult penalty_attack(const Model& model, const Tensor& x, std::size_t label,
                            const PenaltyAttackOptions& options) {
  if (x.shape() != model.input_shape()) {
    throw ShapeError("attack input: expected " + shape_to_string(model.input_shape()) + ", got " +
                     shape_to_string(x.shape()));
  }
  for (double v : x.values()) {
    if (!(v >= 0.0 && v <= 1.0)) throw RangeError("attack input must lie in [0,1]");
  }
  const std::size_t K = model.num_classes();
  if (label >= K) throw InvalidArgument("attack: label out of range");
  if (options.search_steps == 0 || options.inner_iters == 0) {
    throw InvalidArgument("penalty attack: search steps and iterations must be positive");
  }
  if (!(options.c_init > 0.0) || !(options.lr > 0.0)) {
    throw InvalidArgument("penalty attack: c_init and lr must be positive");
  }

  AttackResult result;
  result.initial_lr = options.lr;
  double c = options.c_init;
  double lower = 0.0;
  double upper = std::numeric_limits<double>::infinity();
  std::size_t iteration = 0;

  for (std::size_t round = 0; round < options.search_steps; ++round) {
    Tensor x_tilde = x;
    RmsPropMomentum optimizer(x.size(), options.optimizer);
    bool round_success = false;
    for (std::size_t i = 0; i < options.inner_iters; ++i, ++iteration) {
      double d = 0.0;
      const auto fb = forward_backward(
          model, x_tilde,
          [&](const Tensor& z) {
            Tensor upstream(Shape{K});
            try {
              auto ce = evaluate_constraint(options.constraint, z, label);
              d = ce.value;
              upstream = std::move(ce.grad_logits);
            } catch (const DegenerateLogits&) {
              d = 1.0;
            }
            const double weight = d > 0.0 ? c : 0.0;
            for (auto& v : upstream.values()) v *= weight;
            return upstream;
          },
          result.counters);

      const DistanceEval dist = distance_value_grad(options.distance, x_tilde, x);
      if (d < 0.0) {
        round_success = true;
        if (!result.found_iteration) result.found_iteration = iteration;
        if (!result.distance || dist.value < *result.distance) {
          result.distance = dist.value;
          result.adversarial = x_tilde;
        }
      }
      Tensor grad = dist.grad;
      for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += fb.input_grad[k];
      const Tensor update = optimizer.step(grad, options.lr);
      for (std::size_t k = 0; k < x_tilde.size(); ++k) x_tilde[k] = std::clamp(x_tilde[k] - update[k], 0.0, 1.0);
    }

    if (round_success) {
      upper = std::min(upper, c);
    } else {
      lower = std::max(lower, c);
    }
    c = std::isfinite(upper) ? 0.5 * (lower + upper) : c * 10.0;
  }
  result.success = result.adversarial.has_value();
  return result;
}

std::optional<BisectionResult> minimal_via_binary_search(const BudgetAttack& budget_attack, double lo, double hi,
                                                         double precision) {
  if (!(precision > 0.0)) throw InvalidArgument("bisection: precision must be positive");
  if (!(lo >= 0.0 && lo < hi) || !std::isfinite(hi)) throw InvalidArgument("bisection: need 0 <= lo < hi < inf");

  BisectionResult out{Tensor(Shape{1}), hi, lo, hi, 1};
  auto first = budget_attack(hi);
  if (!first) return std::nullopt;
  out.adversarial = std::move(*first);
  while (out.hi - out.lo >= precision) {
    const double mid = 0.5 * (out.lo + out.hi);
    ++out.attack_calls;
    if (auto adv = budget_attack(mid)) {
      out.hi = mid;
      out.adversarial = std::move(*adv);
    } else {
      out.lo = mid;
    }
  }
  out.budget = out.hi;
  return out;
}

std::optional<Tensor> pgd_l2_budget_attack(const Model& model, const Tensor& x, std::size_t label, double budget,
                                           const PgdOptions& options, PropagationCounter& counter) {
  if (x.shape() != model.input_shape()) throw ShapeError("pgd: input shape does not match the model");
  if (!(budget >= 0.0)) throw InvalidArgument("pgd: budget must be non-negative");
  const std::size_t K = model.num_classes();
  const double step = options.step_fraction * budget;
  Tensor x_tilde = x;

  for (std::size_t i = 0; i <= options.steps; ++i) {
    double d = 0.0;
    const auto fb = forward_backward(
        model, x_tilde,
        [&](const Tensor& z) {
          try {
            auto ce = evaluate_constraint(options.constraint, z, label);
            d = ce.value;
            return std::move(ce.grad_logits);
          } catch (const DegenerateLogits&) {
            d = 1.0;
            return Tensor(Shape{K});
          }
        },
        counter);
    if (d < 0.0) return x_tilde;
    if (i == options.steps) break;

    const double gnorm = l2_norm(fb.input_grad.values());
    if (gnorm == 0.0) break;
    for (std::size_t k = 0; k < x_tilde.size(); ++k) x_tilde[k] -= step * fb.input_grad[k] / gnorm;

    double dn = 0.0;
    for (std::size_t k = 0; k < x_tilde.size(); ++k) dn += (x_tilde[k] - x[k]) * (x_tilde[k] - x[k]);
    dn = std::sqrt(dn);
    const double scale = dn > budget ? budget / dn : 1.0;
    for (std::size_t k = 0; k < x_tilde.size(); ++k) {
      x_tilde[k] = std::clamp(x[k] + scale * (x_tilde[k] - x[k]), 0.0, 1.0);
    }
  }
  return std::nullopt;
}

}  // namespace alma
