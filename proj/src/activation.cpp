#include "gflow/activation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace gflow {

namespace {

constexpr double kContinuityTol = 1e-12;

void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) throw std::domain_error(std::string(what) + ": non-finite argument");
}

Polynomial monomial(std::vector<double> coeffs) { return Polynomial{std::move(coeffs), 0.0, 1.0}; }

}  // namespace

std::string_view to_string(Coverage c) {
  switch (c) {
    case Coverage::theorem2: return "theorem2";
    case Coverage::corollary1_relu: return "corollary1_relu";
    case Coverage::corollary2_sigmoid: return "corollary2_sigmoid";
  }
  return "?";
}

Coverage coverage_from_string(std::string_view s) {
  if (s == "theorem2") return Coverage::theorem2;
  if (s == "corollary1_relu") return Coverage::corollary1_relu;
  if (s == "corollary2_sigmoid") return Coverage::corollary2_sigmoid;
  throw std::invalid_argument("unknown coverage tag: " + std::string(s));
}

double Polynomial::eval(double x) const {
  const double u = (x - center) / scale;
  double acc = 0.0;
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * u + *it;
  return acc;
}

double Polynomial::deriv(double x) const {
  if (coeffs.size() < 2) return 0.0;
  const double u = (x - center) / scale;
  double acc = 0.0;
  for (std::size_t k = coeffs.size() - 1; k >= 1; --k) acc = acc * u + static_cast<double>(k) * coeffs[k];
  return acc / scale;
}

bool Polynomial::is_zero() const {
  return std::all_of(coeffs.begin(), coeffs.end(), [](double c) { return c == 0.0; });
}

Activation Activation::piecewise(std::string label, std::vector<double> breakpoints,
                                 std::vector<Polynomial> pieces, Coverage coverage,
                                 bool allow_zero_piece) {
  if (pieces.size() != breakpoints.size() + 1)
    throw std::invalid_argument("activation '" + label + "': need breakpoints + 1 pieces");
  for (std::size_t i = 0; i < breakpoints.size(); ++i) {
    if (!std::isfinite(breakpoints[i]))
      throw std::invalid_argument("activation '" + label + "': non-finite breakpoint");
    if (i > 0 && !(breakpoints[i] > breakpoints[i - 1]))
      throw std::invalid_argument("activation '" + label + "': breakpoints not strictly increasing");
  }
  for (const auto& p : pieces) {
    if (p.coeffs.empty() || p.is_zero()) {
      if (!allow_zero_piece)
        throw std::invalid_argument("activation '" + label + "': identically zero piece");
    }
    if (!(p.scale > 0.0)) throw std::invalid_argument("activation '" + label + "': bad piece scale");
  }
  for (std::size_t i = 0; i < breakpoints.size(); ++i) {
    const double b = breakpoints[i];
    const double gap = std::abs(pieces[i].eval(b) - pieces[i + 1].eval(b));
    if (!(gap < kContinuityTol))
      throw std::invalid_argument("activation '" + label + "': discontinuous at breakpoint " +
                                  std::to_string(b));
  }
  Activation a;
  a.label_ = std::move(label);
  a.breakpoints_ = std::move(breakpoints);
  a.pieces_ = std::move(pieces);
  a.coverage_ = coverage;
  return a;
}

Activation Activation::exact_sigmoid() {
  Activation a;
  a.label_ = "sigmoid";
  a.sigmoid_ = true;
  a.coverage_ = Coverage::corollary2_sigmoid;
  return a;
}

int Activation::piece_index(double x) const {
  if (sigmoid_) return 0;
  return static_cast<int>(std::upper_bound(breakpoints_.begin(), breakpoints_.end(), x) -
                          breakpoints_.begin());
}

double Activation::eval(double x) const {
  require_finite(x, "activation eval");
  if (sigmoid_) return sigmoid(x);
  return pieces_[static_cast<std::size_t>(piece_index(x))].eval(x);
}

double Activation::deriv(double x) const {
  require_finite(x, "activation deriv");
  if (sigmoid_) {
    const double s = sigmoid(x);
    return s * (1.0 - s);
  }
  return pieces_[static_cast<std::size_t>(piece_index(x))].deriv(x);
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Activation builtin(std::string_view name, std::span<const double> params) {
  auto param = [&](double fallback) { return params.empty() ? fallback : params[0]; };
  if (name == "leaky_relu" || name == "prelu") {
    const double alpha = param(0.01);
    if (!(alpha > 0.0) || !std::isfinite(alpha))
      throw std::invalid_argument(std::string(name) + ": slope must be positive");
    auto a = Activation::piecewise(std::string(name), {0.0},
                                   {monomial({0.0, alpha}), monomial({0.0, 1.0})});
    a.leaky_slope_ = alpha;
    return a;
  }
  if (name == "relu") {
    auto a = Activation::piecewise("relu", {0.0}, {monomial({0.0}), monomial({0.0, 1.0})},
                                   Coverage::corollary1_relu, /*allow_zero_piece=*/true);
    a.leaky_slope_ = 0.0;
    return a;
  }
  if (name == "sigmoid") return Activation::exact_sigmoid();
  if (name == "identity") return Activation::piecewise("identity", {}, {monomial({0.0, 1.0})});
  if (name == "abs_shift") {
    const double c = param(0.0);
    if (!std::isfinite(c)) throw std::invalid_argument("abs_shift: non-finite shift");
    return Activation::piecewise("abs_shift", {c}, {monomial({c, -1.0}), monomial({-c, 1.0})});
  }
  throw std::invalid_argument("unknown activation: " + std::string(name));
}

Activation approximate_sigmoid(int degree, double cap) {
  if (degree < 1) throw std::invalid_argument("approximate_sigmoid: degree must be >= 1");
  if (!(cap > 0.0) || !std::isfinite(cap))
    throw std::invalid_argument("approximate_sigmoid: cap must be positive");

  const int n = degree;
  // Chebyshev coefficients of the Lobatto interpolant via the discrete cosine
  // sum over x_k = cos(pi k / n), endpoints weighted by 1/2.
  std::vector<double> f(static_cast<std::size_t>(n + 1));
  for (int k = 0; k <= n; ++k) f[k] = sigmoid(cap * std::cos(std::numbers::pi * k / n));
  std::vector<double> cheb(static_cast<std::size_t>(n + 1));
  for (int j = 0; j <= n; ++j) {
    double s = 0.0;
    for (int k = 0; k <= n; ++k) {
      const double w = (k == 0 || k == n) ? 0.5 : 1.0;
      s += w * f[k] * std::cos(std::numbers::pi * j * k / n);
    }
    cheb[j] = 2.0 * s / n;
  }
  cheb[0] *= 0.5;
  cheb[n] *= 0.5;

  // Chebyshev to monomial basis in u = x / cap via T_{k+1} = 2u T_k - T_{k-1}.
  std::vector<double> mono(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<double> t_prev(static_cast<std::size_t>(n + 1), 0.0), t_cur(t_prev);
  t_prev[0] = 1.0;
  mono[0] += cheb[0];
  if (n >= 1) {
    t_cur[1] = 1.0;
    mono[1] += cheb[1];
  }
  for (int k = 1; k < n; ++k) {
    std::vector<double> t_next(static_cast<std::size_t>(n + 1), 0.0);
    for (int i = 0; i <= k; ++i) t_next[i + 1] += 2.0 * t_cur[i];
    for (int i = 0; i <= k - 1; ++i) t_next[i] -= t_prev[i];
    for (int i = 0; i <= k + 1; ++i) mono[i] += cheb[k + 1] * t_next[i];
    t_prev = std::move(t_cur);
    t_cur = std::move(t_next);
  }

  Polynomial core{std::move(mono), 0.0, cap};
  const double lo = core.eval(-cap);
  const double hi = core.eval(cap);
  return Activation::piecewise("approx_sigmoid_" + std::to_string(degree), {-cap, cap},
                               {monomial({lo}), std::move(core), monomial({hi})},
                               Coverage::corollary2_sigmoid);
}

double sup_error(const Activation& a, const Activation& b, double lo, double hi, int grid_points) {
  if (!(lo < hi)) throw std::invalid_argument("sup_error: empty interval");
  if (grid_points < 2) throw std::invalid_argument("sup_error: need at least 2 grid points");
  double worst = 0.0;
  const double step = (hi - lo) / (grid_points - 1);
  for (int i = 0; i < grid_points; ++i) {
    const double x = (i == grid_points - 1) ? hi : lo + step * i;
    worst = std::max(worst, std::abs(a.eval(x) - b.eval(x)));
  }
  return worst;
}

double kaiming_gain(const Activation& act) {
  const double alpha = act.leaky_slope();
  if (alpha < 0.0) return 1.0;
  return std::sqrt(2.0 / (1.0 + alpha * alpha));
}

}  // namespace gflow
