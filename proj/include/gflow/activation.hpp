#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gflow {

// Which result a run with this activation is covered by.
enum class Coverage { theorem2, corollary1_relu, corollary2_sigmoid };

std::string_view to_string(Coverage c);
Coverage coverage_from_string(std::string_view s);

// Polynomial in the local variable u = (x - center) / scale, coefficients in
// ascending powers of u. Built-in activations use center 0, scale 1.
struct Polynomial {
  std::vector<double> coeffs;
  double center = 0.0;
  double scale = 1.0;

  double eval(double x) const;
  double deriv(double x) const;
  bool is_zero() const;
};

// Continuous scalar activation. Either a piecewise polynomial (breakpoints plus
// one polynomial per interval) or the exact logistic sigmoid, which bypasses
// the piece machinery.
//
// A point sitting exactly on a breakpoint belongs to the piece on its right,
// so deriv() there is the right-hand derivative.
//
// Immutable after construction.
class Activation {
 public:
  // Validates ordering, piece count, continuity (1e-12) and non-zero pieces.
  static Activation piecewise(std::string label, std::vector<double> breakpoints,
                              std::vector<Polynomial> pieces,
                              Coverage coverage = Coverage::theorem2,
                              bool allow_zero_piece = false);
  static Activation exact_sigmoid();

  double eval(double x) const;
  double deriv(double x) const;

  // Index of the piece containing x (always 0 for sigmoid).
  int piece_index(double x) const;

  const std::string& label() const { return label_; }
  const std::vector<double>& breakpoints() const { return breakpoints_; }
  const std::vector<Polynomial>& pieces() const { return pieces_; }
  Coverage coverage() const { return coverage_; }
  bool is_polynomial() const { return !sigmoid_; }

  // Negative-side slope for the leaky-ReLU family (0 for relu); used by the
  // Kaiming gain. Negative when the activation is not in that family.
  double leaky_slope() const { return leaky_slope_; }

 private:
  Activation() = default;
  friend Activation builtin(std::string_view name, std::span<const double> params);

  std::string label_;
  std::vector<double> breakpoints_;
  std::vector<Polynomial> pieces_;
  Coverage coverage_ = Coverage::theorem2;
  bool sigmoid_ = false;
  double leaky_slope_ = -1.0;
};

double sigmoid(double x);

// Named activations: leaky_relu(alpha), prelu(alpha), relu, sigmoid, identity,
// abs_shift(c). alpha defaults to 0.01 and c to 0 when params is empty.
Activation builtin(std::string_view name, std::span<const double> params = {});

// Chebyshev-Lobatto interpolant of sigmoid of the given degree on [-cap, cap],
// held constant outside. The tail constants are the interpolant's own end
// values, which equal sigmoid(+-cap) up to roundoff.
Activation approximate_sigmoid(int degree, double cap = 6.0);

// max |a(x) - b(x)| over grid_points uniformly spaced points of [lo, hi].
double sup_error(const Activation& a, const Activation& b, double lo, double hi,
                 int grid_points);

// Kaiming gain: sqrt(2 / (1 + alpha^2)) for the leaky-ReLU family, 1 otherwise.
double kaiming_gain(const Activation& act);

}  // namespace gflow
