#include "alma/penalty.hpp"

#include <cmath>

#include "alma/errors.hpp"

namespace alma {

namespace {

void check_args(double y, double rho, double mu) {
  if (!std::isfinite(y)) throw InvalidArgument("penalty: constraint value must be finite");
  if (!std::isfinite(rho) || rho <= 0.0) throw InvalidArgument("penalty: rho must be finite and positive");
  if (!std::isfinite(mu) || mu <= 0.0) throw InvalidArgument("penalty: mu must be finite and positive");
}

// Shared y < 0 branch of P2 and P3.
double rational_value(double y, double rho, double mu) { return mu * y / (1.0 - rho * y); }

double rational_derivative(double y, double rho, double mu) {
  const double q = 1.0 - rho * y;
  return mu / (q * q);
}

}  // namespace

PenaltySpec parse_penalty(std::string_view name) {
  if (name == "phr") return {PenaltyKind::Phr};
  if (name == "p1") return {PenaltyKind::P1};
  if (name == "p2") return {PenaltyKind::P2};
  if (name == "p3") return {PenaltyKind::P3};
  throw InvalidArgument("unknown penalty '" + std::string(name) + "' (expected phr|p1|p2|p3)");
}

std::string to_string(PenaltyKind kind) {
  switch (kind) {
    case PenaltyKind::Phr: return "phr";
    case PenaltyKind::P1: return "p1";
    case PenaltyKind::P2: return "p2";
    case PenaltyKind::P3: return "p3";
  }
  return "?";
}

double penalty_value(PenaltySpec spec, double y, double rho, double mu) {
  check_args(y, rho, mu);
  switch (spec.kind) {
    case PenaltyKind::Phr: {
      const double t = std::max(0.0, mu + rho * y);
      return (t * t - mu * mu) / (2.0 * rho);
    }
    case PenaltyKind::P1:
      if (y >= 0.0) return mu * y + 0.5 * rho * y * y + rho * rho * y * y * y;
      if (y >= -mu / rho) return mu * y + 0.5 * rho * y * y;
      return -mu * mu / (2.0 * rho);
    case PenaltyKind::P2:
      if (y >= 0.0) return mu * y + mu * rho * y * y + rho * rho * y * y * y / 6.0;
      return rational_value(y, rho, mu);
    case PenaltyKind::P3:
      if (y >= 0.0) return mu * y + mu * rho * y * y;
      return rational_value(y, rho, mu);
  }
  throw InvalidArgument("penalty: unknown kind");
}

double penalty_derivative(PenaltySpec spec, double y, double rho, double mu) {
  check_args(y, rho, mu);
  switch (spec.kind) {
    case PenaltyKind::Phr:
      return std::max(0.0, mu + rho * y);
    case PenaltyKind::P1:
      if (y >= 0.0) return mu + rho * y + 3.0 * rho * rho * y * y;
      if (y >= -mu / rho) return std::max(0.0, mu + rho * y);
      return 0.0;
    case PenaltyKind::P2:
      if (y >= 0.0) return mu + 2.0 * mu * rho * y + 0.5 * rho * rho * y * y;
      return rational_derivative(y, rho, mu);
    case PenaltyKind::P3:
      if (y >= 0.0) return mu + 2.0 * mu * rho * y;
      return rational_derivative(y, rho, mu);
  }
  throw InvalidArgument("penalty: unknown kind");
}

}  // namespace alma
