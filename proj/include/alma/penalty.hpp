#pragma once

#include <string>
#include <string_view>

namespace alma {

/// Penalty-Lagrangian families for a single inequality constraint y < 0.
///
/// All four satisfy P'(y) >= 0, P'(0) = mu, P' -> inf for y > 0 and
/// P' -> 0 for y < 0 as rho grows (mu kept within positive bounds).
enum class PenaltyKind { Phr, P1, P2, P3 };

struct PenaltySpec {
  PenaltyKind kind = PenaltyKind::P2;
};

/// Accepts "phr", "p1", "p2", "p3".
PenaltySpec parse_penalty(std::string_view name);
std::string to_string(PenaltyKind kind);

/// P(y, rho, mu). Throws InvalidArgument for non-finite y or non-positive rho/mu.
double penalty_value(PenaltySpec spec, double y, double rho, double mu);

/// dP/dy in closed form.
double penalty_derivative(PenaltySpec spec, double y, double rho, double mu);

}  // namespace alma
