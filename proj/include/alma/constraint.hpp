#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "alma/tensor.hpp"

namespace alma {

/// Constraint value and its gradient w.r.t. the logits.
struct ConstraintEval {
  double value = 0.0;
  Tensor grad_logits;
};

/// Indices of z sorted by decreasing value; ties keep the lower index first.
std::vector<std::size_t> descending_order(const Tensor& z);

/// argmax with lowest-index tie-breaking.
std::size_t predicted_label(const Tensor& z);

/// Largest logit other than `excluded` (lowest index on ties).
std::size_t runner_up(const Tensor& z, std::size_t excluded);

/// (z_y - max_{i!=y} z_i) / (z_pi1 - z_pi3). Negative iff z is not classified as y.
/// Throws DegenerateLogits when z_pi1 == z_pi3.
ConstraintEval dlr_plus(const Tensor& z, std::size_t label);

/// (max_{i!=t} z_i - z_t) / (z_pi1 - (z_pi3 + z_pi4) / 2). Negative iff z is classified as t.
/// Needs K >= 4.
ConstraintEval tdlr_plus(const Tensor& z, std::size_t target);

enum class TargetRule { Fixed, SecondMostLikely };

/// Untargeted (dlr+) or targeted (tdlr+) misclassification constraint.
struct ConstraintSpec {
  bool targeted = false;
  TargetRule rule = TargetRule::SecondMostLikely;
  std::size_t fixed_target = 0;
};

/// Accepts "fixed:<k>" or "second".
ConstraintSpec parse_target_rule(std::string_view text);
std::string describe(const ConstraintSpec& spec);

/// Label handed to the constraint: the true label when untargeted, the target otherwise.
std::size_t resolve_target(const ConstraintSpec& spec, const Tensor& clean_logits, std::size_t true_label);

ConstraintEval evaluate_constraint(const ConstraintSpec& spec, const Tensor& z, std::size_t label_or_target);

}  // namespace alma
