#include "alma/autodiff.hpp"

#include <cmath>

#include "alma/errors.hpp"

namespace alma::ad {

double Var::value() const { return tape_->value(*this); }

Var Tape::variable(double value) { return record(value); }

Var Tape::record(double value) {
  nodes_.push_back({value, {0, 0}, {0.0, 0.0}, 0});
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::record(double value, Var a, double da) {
  nodes_.push_back({value, {a.index_, 0}, {da, 0.0}, 1});
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::record(double value, Var a, double da, Var b, double db) {
  nodes_.push_back({value, {a.index_, b.index_}, {da, db}, 2});
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

std::vector<double> Tape::gradient(Var output) const {
  if (output.tape_ != this) throw InvalidArgument("tape: output variable belongs to another tape");
  std::vector<double> adj(nodes_.size(), 0.0);
  adj[output.index_] = 1.0;
  for (std::size_t k = output.index_ + 1; k-- > 0;) {
    const double a = adj[k];
    if (a == 0.0) continue;
    const Node& n = nodes_[k];
    for (int j = 0; j < n.arity; ++j) adj[n.parent[j]] += a * n.partial[j];
  }
  return adj;
}

namespace {
Tape& tape_of(Var a) { return *a.tape(); }
}  // namespace

Var operator+(Var a, Var b) { return tape_of(a).record(a.value() + b.value(), a, 1.0, b, 1.0); }
Var operator-(Var a, Var b) { return tape_of(a).record(a.value() - b.value(), a, 1.0, b, -1.0); }
Var operator*(Var a, Var b) {
  return tape_of(a).record(a.value() * b.value(), a, b.value(), b, a.value());
}
Var operator/(Var a, Var b) {
  const double bv = b.value();
  const double q = a.value() / bv;
  return tape_of(a).record(q, a, 1.0 / bv, b, -q / bv);
}
Var operator-(Var a) { return tape_of(a).record(-a.value(), a, -1.0); }
Var operator+(Var a, double b) { return tape_of(a).record(a.value() + b, a, 1.0); }
Var operator+(double a, Var b) { return b + a; }
Var operator-(Var a, double b) { return tape_of(a).record(a.value() - b, a, 1.0); }
Var operator-(double a, Var b) { return tape_of(b).record(a - b.value(), b, -1.0); }
Var operator*(Var a, double b) { return tape_of(a).record(a.value() * b, a, b); }
Var operator*(double a, Var b) { return b * a; }
Var operator/(Var a, double b) { return tape_of(a).record(a.value() / b, a, 1.0 / b); }
Var operator/(double a, Var b) {
  const double bv = b.value();
  return tape_of(b).record(a / bv, b, -a / (bv * bv));
}

Var sqrt(Var a) {
  const double r = std::sqrt(a.value());
  return tape_of(a).record(r, a, r > 0.0 ? 0.5 / r : 0.0);
}

Var cbrt(Var a) {
  const double r = std::cbrt(a.value());
  return tape_of(a).record(r, a, r != 0.0 ? 1.0 / (3.0 * r * r) : 0.0);
}

Var square(Var a) {
  const double v = a.value();
  return tape_of(a).record(v * v, a, 2.0 * v);
}

Var pow(Var a, double p) {
  const double v = a.value();
  const double r = std::pow(v, p);
  const double d = (v == 0.0 && p < 1.0) ? 0.0 : p * std::pow(v, p - 1.0);
  return tape_of(a).record(r, a, d);
}

Var exp(Var a) {
  const double r = std::exp(a.value());
  return tape_of(a).record(r, a, r);
}

Var sin(Var a) { return tape_of(a).record(std::sin(a.value()), a, std::cos(a.value())); }
Var cos(Var a) { return tape_of(a).record(std::cos(a.value()), a, -std::sin(a.value())); }

Var atan2(Var y, Var x) {
  const double yv = y.value();
  const double xv = x.value();
  const double r2 = xv * xv + yv * yv;
  if (r2 == 0.0) return tape_of(y).record(0.0, y, 0.0, x, 0.0);
  return tape_of(y).record(std::atan2(yv, xv), y, xv / r2, x, -yv / r2);
}

}  // namespace alma::ad
