#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace alma::ad {

class Tape;

/// Handle to a scalar node recorded on a Tape.
class Var {
 public:
  Var() = default;

  double value() const;
  std::uint32_t index() const { return index_; }
  Tape* tape() const { return tape_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::uint32_t index) : tape_(tape), index_(index) {}

  Tape* tape_ = nullptr;
  std::uint32_t index_ = 0;
};

/// Linear Wengert list. Each node stores at most two parents and the local
/// partial derivatives w.r.t. them; backward() sweeps once in reverse.
class Tape {
 public:
  Var variable(double value);
  Var constant(double value) { return variable(value); }

  /// Records a node with explicit local partials.
  Var record(double value);
  Var record(double value, Var a, double da);
  Var record(double value, Var a, double da, Var b, double db);

  double value(Var v) const { return nodes_[v.index_].value; }

  /// Adjoints of every node w.r.t. `output`.
  std::vector<double> gradient(Var output) const;

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  struct Node {
    double value;
    std::uint32_t parent[2];
    double partial[2];
    std::uint8_t arity;
  };
  std::vector<Node> nodes_;
};

Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);
Var operator/(Var a, Var b);
Var operator-(Var a);
Var operator+(Var a, double b);
Var operator+(double a, Var b);
Var operator-(Var a, double b);
Var operator-(double a, Var b);
Var operator*(Var a, double b);
Var operator*(double a, Var b);
Var operator/(Var a, double b);
Var operator/(double a, Var b);

/// sqrt with derivative 0 at the origin (removable singularity convention).
Var sqrt(Var a);
Var cbrt(Var a);
Var square(Var a);
Var pow(Var a, double p);
Var exp(Var a);
Var sin(Var a);
Var cos(Var a);
Var atan2(Var y, Var x);

}  // namespace alma::ad
