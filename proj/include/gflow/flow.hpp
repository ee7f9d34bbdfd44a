#pragma once

#include "gflow/data.hpp"
#include "gflow/network.hpp"

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gflow {

class FlowError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Scheme { euler, rk4, rk45 };

std::string_view to_string(Scheme s);
Scheme scheme_from_string(std::string_view s);
int scheme_order(Scheme s);

struct FlowConfig {
  Scheme scheme = Scheme::rk4;
  double step = 1e-3;        // fixed step, or initial step for rk45
  double horizon = 0.1;      // T
  double log_stride = 1e-3;  // time between logged states
  double abs_tol = 1e-10;    // rk45 only
  double rel_tol = 1e-8;     // rk45 only
  bool kink_refine = false;
  bool track_events = true;
  bool record_lambda = true;
  bool keep_thetas = true;

  void validate() const;
};

// An activated pre-activation moved to a different activation piece.
struct PieceEvent {
  double time = 0.0;
  std::size_t layer = 0;    // 1-based index of the layer producing the unit
  std::size_t unit = 0;     // flat index within that layer's output
  std::size_t example = 0;
};

struct TrajectoryLog {
  std::vector<double> times;
  std::vector<ParamVector> thetas;  // empty unless keep_thetas
  std::vector<double> losses;
  std::vector<double> residual_norms;
  std::vector<double> lambda_mins;
  std::vector<double> grad_norm_sq;
  std::vector<double> grad_sq_integral;  // integrator stage-weighted quadrature
  std::vector<double> displacement_sq;   // ||theta(t) - theta(0)||^2
  std::vector<PieceEvent> events;
  bool aborted = false;
  std::string abort_reason;
  Scheme scheme = Scheme::rk4;
  double step = 0.0;
  std::size_t steps_taken = 0;

  std::size_t size() const { return times.size(); }
};

// d theta / dt = -grad L(theta) on [0, T].
TrajectoryLog integrate(const Network& net, const ParamVector& theta0, const Dataset& data, const FlowConfig& cfg);

// d theta / dt = +grad L(theta) for duration cfg.horizon, returning the final
// state. A zero horizon returns theta_end unchanged.
ParamVector integrate_reverse(const Network& net, const ParamVector& theta_end, const Dataset& data,
                              const FlowConfig& cfg);

struct BlowupReport {
  std::vector<double> lhs;  // ||theta(s) - theta(0)||^2
  std::vector<double> rhs;  // s * int_0^s ||grad L||^2
  bool pass = true;
  std::size_t worst_index = 0;
  double worst_excess = 0.0;  // max of lhs - rhs
};

BlowupReport blowup_bound_check(const TrajectoryLog& log);

struct MonotonicityReport {
  bool pass = true;
  std::size_t worst_index = 0;
  double worst_violation = 0.0;  // max of losses[i+1] - losses[i], <= 0 when strictly decreasing
};

// losses[i+1] <= losses[i] (1 + 1e-9) + losses[0] h^p, p = scheme order.
MonotonicityReport loss_monotonicity_check(const TrajectoryLog& log);

// Columns t,loss,residual_norm,lambda_min,grad_norm_sq,cumulative_integral.
std::string format_trajectory_csv(const TrajectoryLog& log);
TrajectoryLog parse_trajectory_csv(const std::string& text);

// One comma-separated parameter vector per logged time.
std::string format_thetas(const TrajectoryLog& log);
std::vector<ParamVector> parse_thetas(const std::string& text);

}  // namespace gflow
