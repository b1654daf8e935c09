#pragma once

#include <cstddef>
#include <vector>

#include "alma/tensor.hpp"

namespace alma {

struct OptimizerConstants {
  double momentum = 0.9;        // beta1
  double square_decay = 0.99;   // beta2
  double epsilon = 1e-8;
};

/// RMSProp with heavy-ball momentum. The squared-gradient average starts at one
/// rather than zero, so the first step is bounded by roughly lr per coordinate.
///
///   s <- beta2 s + (1 - beta2) g^2
///   m <- beta1 m + g / sqrt(s + eps)
///   update = lr m
class RmsPropMomentum {
 public:
  RmsPropMomentum(std::size_t size, OptimizerConstants constants);

  /// Advances the accumulators and returns the update to subtract.
  Tensor step(const Tensor& grad, double lr);

  const std::vector<double>& square_avg() const { return square_avg_; }
  const std::vector<double>& momentum_buffer() const { return momentum_; }

 private:
  OptimizerConstants c_;
  std::vector<double> square_avg_;
  std::vector<double> momentum_;
};

}  // namespace alma
