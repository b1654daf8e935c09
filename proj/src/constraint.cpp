#include "alma/constraint.hpp"

#include <algorithm>
#include <charconv>
#include <numeric>

#include "alma/errors.hpp"

namespace alma {

std::vector<std::size_t> descending_order(const Tensor& z) {
  std::vector<std::size_t> idx(z.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return z[a] > z[b]; });
  return idx;
}

std::size_t predicted_label(const Tensor& z) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < z.size(); ++i)
    if (z[i] > z[best]) best = i;
  return best;
}

std::size_t runner_up(const Tensor& z, std::size_t excluded) {
  std::size_t best = excluded == 0 ? 1 : 0;
  for (std::size_t i = 0; i < z.size(); ++i)
    if (i != excluded && z[i] > z[best]) best = i;
  return best;
}

ConstraintEval dlr_plus(const Tensor& z, std::size_t label) {
  const std::size_t K = z.size();
  if (z.rank() != 1 || K < 3) throw ShapeError("dlr+: needs a logit vector with K >= 3");
  if (label >= K) throw InvalidArgument("dlr+: label " + std::to_string(label) + " out of range");
  const auto pi = descending_order(z);
  const std::size_t other = runner_up(z, label);
  const double num = z[label] - z[other];
  const double den = z[pi[0]] - z[pi[2]];
  if (!(den > 0.0)) throw DegenerateLogits("dlr+: top and third logits are tied");

  ConstraintEval out{num / den, Tensor(Shape{K})};
  auto& g = out.grad_logits;
  g[label] += 1.0 / den;
  g[other] -= 1.0 / den;
  const double q = out.value / den;
  g[pi[0]] -= q;
  g[pi[2]] += q;
  return out;
}

ConstraintEval tdlr_plus(const Tensor& z, std::size_t target) {
  const std::size_t K = z.size();
  if (z.rank() != 1 || K < 4) throw ShapeError("tdlr+: targeted mode needs a logit vector with K >= 4");
  if (target >= K) throw InvalidArgument("tdlr+: target " + std::to_string(target) + " out of range");
  const auto pi = descending_order(z);
  const std::size_t other = runner_up(z, target);
  const double num = z[other] - z[target];
  const double den = z[pi[0]] - 0.5 * (z[pi[2]] + z[pi[3]]);
  if (!(den > 0.0)) throw DegenerateLogits("tdlr+: denominator vanishes");

  ConstraintEval out{num / den, Tensor(Shape{K})};
  auto& g = out.grad_logits;
  g[other] += 1.0 / den;
  g[target] -= 1.0 / den;
  const double q = out.value / den;
  g[pi[0]] -= q;
  g[pi[2]] += 0.5 * q;
  g[pi[3]] += 0.5 * q;
  return out;
}

ConstraintSpec parse_target_rule(std::string_view text) {
  ConstraintSpec spec;
  spec.targeted = true;
  if (text == "second") {
    spec.rule = TargetRule::SecondMostLikely;
    return spec;
  }
  if (text.starts_with("fixed:")) {
    auto digits = text.substr(6);
    std::size_t k = 0;
    auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), k);
    if (ec == std::errc() && p == digits.data() + digits.size() && !digits.empty()) {
      spec.rule = TargetRule::Fixed;
      spec.fixed_target = k;
      return spec;
    }
  }
  throw InvalidArgument("bad target rule '" + std::string(text) + "' (expected fixed:<k> or second)");
}

std::string describe(const ConstraintSpec& spec) {
  if (!spec.targeted) return "dlr+";
  if (spec.rule == TargetRule::Fixed) return "tdlr+ fixed:" + std::to_string(spec.fixed_target);
  return "tdlr+ second";
}

std::size_t resolve_target(const ConstraintSpec& spec, const Tensor& clean_logits, std::size_t true_label) {
  if (!spec.targeted) return true_label;
  if (spec.rule == TargetRule::Fixed) {
    if (spec.fixed_target >= clean_logits.size()) throw InvalidArgument("fixed target out of range");
    return spec.fixed_target;
  }
  return descending_order(clean_logits)[1];
}

ConstraintEval evaluate_constraint(const ConstraintSpec& spec, const Tensor& z, std::size_t label_or_target) {
  return spec.targeted ? tdlr_plus(z, label_or_target) : dlr_plus(z, label_or_target);
}

}  // namespace alma
