#include "alma/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "alma/errors.hpp"

namespace alma {

double default_epsilon(DistanceKind kind) {
  switch (kind) {
    case DistanceKind::L1: return 0.5;
    case DistanceKind::L2: return 0.1;
    case DistanceKind::Ciede2000: return 0.05;
    case DistanceKind::Ssim: return 3e-5;
  }
  return 0.1;
}

double default_alpha(std::size_t iterations) { return iterations >= 1000 ? 0.9 : 0.5; }

AlmaConfig AlmaConfig::defaults(DistanceKind kind, std::size_t iterations) {
  AlmaConfig c;
  c.iterations = iterations;
  c.distance.kind = kind;
  c.epsilon = default_epsilon(kind);
  c.alpha = default_alpha(iterations);
  return c;
}

void AlmaConfig::validate() const {
  auto fail = [](const std::string& msg) { throw InvalidArgument("alma config: " + msg); };
  if (iterations == 0) fail("iterations must be positive");
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) fail("epsilon must be positive");
  if (!(alpha >= 0.0 && alpha < 1.0)) fail("alpha must lie in [0,1)");
  if (!(gamma > 1.0)) fail("gamma must exceed 1");
  if (!(tau >= 0.0 && tau <= 1.0)) fail("tau must lie in [0,1]");
  if (check_period == 0) fail("check period must be positive");
  if (!(mu_min > 0.0 && mu_min <= mu_init && mu_init <= mu_max && std::isfinite(mu_max))) {
    fail("need 0 < mu_min <= mu_init <= mu_max < inf");
  }
  if (!(rho_init > 0.0) || !std::isfinite(rho_init)) fail("rho_init must be positive");
  if (!(final_lr_fraction > 0.0)) fail("final lr fraction must be positive");
  if (!(optimizer.momentum >= 0.0 && optimizer.momentum < 1.0)) fail("momentum must lie in [0,1)");
  if (!(optimizer.square_decay >= 0.0 && optimizer.square_decay < 1.0)) fail("square decay must lie in [0,1)");
  if (!(optimizer.epsilon >= 0.0)) fail("optimizer epsilon must be non-negative");
}

namespace {

Tensor step_along(const Tensor& x, const Tensor& direction, double eta) {
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::clamp(x[i] - eta * direction[i], 0.0, 1.0);
  return out;
}

void require_unit_box(const Tensor& x) {
  for (double v : x.values()) {
    if (!(v >= 0.0 && v <= 1.0)) throw RangeError("attack input must lie in [0,1]");
  }
}

}  // namespace

StepSizeSearch step_size_for_direction(const Tensor& x, const Tensor& direction, const DistanceSpec& distance,
                                       double epsilon) {
  require_same_shape(x, direction, "step size search");
  if (!(epsilon > 0.0)) throw InvalidArgument("step size search: epsilon must be positive");

  // Beyond eta_sat every coordinate sits on the box boundary and D stops changing.
  double eta_sat = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double g = direction[i];
    if (g > 0.0) eta_sat = std::max(eta_sat, x[i] / g);
    if (g < 0.0) eta_sat = std::max(eta_sat, (1.0 - x[i]) / -g);
  }
  if (std::all_of(direction.values().begin(), direction.values().end(), [](double g) { return g == 0.0; })) {
    throw ZeroGradient("step size search: gradient is identically zero");
  }
  auto phi = [&](double eta) { return distance_value(distance, step_along(x, direction, eta), x); };

  const double max_reach = phi(eta_sat);
  if (max_reach < epsilon) return {eta_sat, max_reach, true};

  double lo = 0.0;
  double hi = 1.0;
  if (phi(hi) >= epsilon) {
    lo = 0.1;
    while (phi(lo) >= epsilon) {
      hi = lo;
      lo /= 10.0;
      if (lo < 1e-300) {
        lo = 0.0;
        break;
      }
    }
  } else {
    lo = 1.0;
    hi = 10.0;
    while (phi(hi) < epsilon) {
      lo = hi;
      hi *= 10.0;
    }
  }

  StepSizeSearch best{hi, phi(hi), false};
  for (int step = 0; step < 30; ++step) {
    const double mid = 0.5 * (lo + hi);
    const double v = phi(mid);
    if (std::abs(v - epsilon) < std::abs(best.achieved_distance - epsilon)) best = {mid, v, false};
    if (std::abs(v - epsilon) <= 1e-4 * epsilon) break;
    if (v < epsilon) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return best;
}

StepSizeSearch init_step_size(const Model& model, const Tensor& x, std::size_t label, const ConstraintSpec& constraint,
                              const DistanceSpec& distance, double epsilon, PropagationCounter& counter) {
  auto fb = forward_backward(
      model, x, [&](const Tensor& z) { return evaluate_constraint(constraint, z, label).grad_logits; }, counter);
  return step_size_for_direction(x, fb.input_grad, distance, epsilon);
}

double lr_at(std::size_t i, double eta0, std::size_t iterations, double final_fraction,
             std::optional<std::size_t> found_iteration) {
  if (!found_iteration || i <= *found_iteration || *found_iteration + 1 >= iterations) return eta0;
  const double span = static_cast<double>(iterations - 1 - *found_iteration);
  const double progress = static_cast<double>(i - *found_iteration) / span;
  return eta0 * std::pow(final_fraction, progress);
}

AttackResult alma_attack(const Model& model, const Tensor& x, std::size_t label, const AlmaConfig& config) {
  config.validate();
  if (x.shape() != model.input_shape()) {
    throw ShapeError("attack input: expected " + shape_to_string(model.input_shape()) + ", got " +
                     shape_to_string(x.shape()));
  }
  require_unit_box(x);
  const std::size_t K = model.num_classes();
  if (label >= K) throw InvalidArgument("attack: label out of range");

  AttackResult result;
  const auto init = init_step_size(model, x, label, config.constraint, config.distance, config.epsilon,
                                   result.init_counters);
  result.initial_lr = init.eta;
  result.init_saturated = init.saturated;

  const std::size_t N = config.iterations;
  const std::size_t M = config.check_period;
  Tensor x_tilde = x;
  RmsPropMomentum optimizer(x.size(), config.optimizer);
  double mu = config.mu_init;
  double rho = config.rho_init;
  bool never_adversarial = true;  // d(j) > 0 for every j so far
  std::vector<double> history;
  history.reserve(N);
  if (config.record_trace) result.trace.reserve(N);

  for (std::size_t i = 0; i < N; ++i) {
    double d = 0.0;
    double mu_next = mu;
    const auto fb = forward_backward(
        model, x_tilde,
        [&](const Tensor& z) {
          Tensor upstream(Shape{K});
          try {
            auto c = evaluate_constraint(config.constraint, z, label);
            d = c.value;
            upstream = std::move(c.grad_logits);
          } catch (const DegenerateLogits&) {
            d = 1.0;
          }
          const double mu_hat = penalty_derivative(config.penalty, d, rho, mu);
          mu_next = std::clamp(config.alpha * mu + (1.0 - config.alpha) * mu_hat, config.mu_min, config.mu_max);
          const double weight = penalty_derivative(config.penalty, d, rho, mu_next);
          for (auto& v : upstream.values()) v *= weight;
          return upstream;
        },
        result.counters);
    mu = mu_next;
    history.push_back(d);

    const DistanceEval dist = distance_value_grad(config.distance, x_tilde, x);
    if (d < 0.0) {
      if (!result.found_iteration) result.found_iteration = i;
      if (!result.distance || dist.value < *result.distance) {
        result.distance = dist.value;
        result.adversarial = x_tilde;
      }
    }
    if (!(d > 0.0)) never_adversarial = false;

    Tensor grad = dist.grad;
    for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += fb.input_grad[k];
    const double lr = lr_at(i, init.eta, N, config.final_lr_fraction, result.found_iteration);
    if (config.record_trace) {
      result.trace.push_back({d, mu, rho, lr, dist.value, dist.value + penalty_value(config.penalty, d, rho, mu)});
    }
    const Tensor update = optimizer.step(grad, lr);
    for (std::size_t k = 0; k < x_tilde.size(); ++k) x_tilde[k] = std::clamp(x_tilde[k] - update[k], 0.0, 1.0);

    if ((i + 1) % M == 0 && i >= M && never_adversarial && d > config.tau * history[i - M]) rho *= config.gamma;
  }
  result.success = result.adversarial.has_value();
  return result;
}

}  // namespace alma
