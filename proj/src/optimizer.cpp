#include "alma/optimizer.hpp"

#include <cmath>

#include "alma/errors.hpp"

namespace alma {

RmsPropMomentum::RmsPropMomentum(std::size_t size, OptimizerConstants constants)
    : c_(constants), square_avg_(size, 1.0), momentum_(size, 0.0) {}

Tensor RmsPropMomentum::step(const Tensor& grad, double lr) {
  if (grad.size() != square_avg_.size()) throw ShapeError("optimizer: gradient size changed between steps");
  Tensor update(grad.shape());
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const double g = grad[i];
    square_avg_[i] = c_.square_decay * square_avg_[i] + (1.0 - c_.square_decay) * g * g;
    momentum_[i] = c_.momentum * momentum_[i] + g / std::sqrt(square_avg_[i] + c_.epsilon);
    update[i] = lr * momentum_[i];
  }
  return update;
}

}  // namespace alma
