#include "gflow/flow.hpp"

#include "gflow/kernels.hpp"
#include "gflow/spectral.hpp"
#include "gflow/util.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace gflow {

std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::euler: return "euler";
    case Scheme::rk4: return "rk4";
    case Scheme::rk45: return "rk45";
  }
  return "?";
}

Scheme scheme_from_string(std::string_view s) {
  if (s == "euler") return Scheme::euler;
  if (s == "rk4") return Scheme::rk4;
  if (s == "rk45" || s == "rk45-adaptive") return Scheme::rk45;
  throw std::invalid_argument("unknown integration scheme: " + std::string(s));
}

int scheme_order(Scheme s) {
  switch (s) {
    case Scheme::euler: return 1;
    case Scheme::rk4: return 4;
    case Scheme::rk45: return 5;
  }
  return 1;
}

void FlowConfig::validate() const {
  if (!(step > 0.0) || !std::isfinite(step)) throw std::invalid_argument("flow: step must be positive");
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw std::invalid_argument("flow: horizon T must be positive");
  if (step > horizon * (1.0 + 1e-12)) throw std::invalid_argument("flow: step exceeds the horizon");
  if (!(log_stride > 0.0)) throw std::invalid_argument("flow: log_stride must be positive");
  if (scheme != Scheme::rk45 && log_stride < step * (1.0 - 1e-9))
    throw std::invalid_argument("flow: log_stride is shorter than the step");
  if (!(abs_tol > 0.0) || !(rel_tol > 0.0)) throw std::invalid_argument("flow: tolerances must be positive");
}

namespace {

using kernels::Exec;

// A grid node: the integrator must land exactly on it.
struct Node {
  double time;
  double dt;  // length of the interval ending here (fixed-step schemes)
  bool log;
};

std::vector<Node> build_nodes(const FlowConfig& cfg) {
  std::vector<Node> nodes;
  const double T = cfg.horizon;
  if (cfg.scheme == Scheme::rk45) {
    const double ratio = T / cfg.log_stride;
    auto count = static_cast<std::size_t>(std::llround(ratio));
    if (std::abs(ratio - static_cast<double>(count)) > 1e-9 * ratio) count = static_cast<std::size_t>(std::ceil(ratio));
    count = std::max<std::size_t>(count, 1);
    for (std::size_t k = 1; k <= count; ++k) {
      const double t = k == count ? T : static_cast<double>(k) * cfg.log_stride;
      nodes.push_back({t, 0.0, true});
    }
    return nodes;
  }
  const double h = cfg.step;
  const double ratio = T / h;
  auto steps = static_cast<std::size_t>(std::llround(ratio));
  const bool exact = std::abs(ratio - static_cast<double>(steps)) <= 1e-9 * ratio;
  if (!exact) steps = static_cast<std::size_t>(std::ceil(ratio));
  steps = std::max<std::size_t>(steps, 1);
  const auto every = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(cfg.log_stride / h)));
  for (std::size_t k = 1; k <= steps; ++k) {
    const bool last = k == steps;
    const double t = last ? T : static_cast<double>(k) * h;
    const double dt = (last && !exact) ? T - static_cast<double>(k - 1) * h : h;
    nodes.push_back({t, dt, last || k % every == 0});
  }
  return nodes;
}

class Engine {
 public:
  Engine(const Network& net, const Dataset& data, const FlowConfig& cfg, double direction)
      : net_(net), data_(data), cfg_(cfg), direction_(direction) {
    for (std::size_t i = 0; i + 1 < net.depth(); ++i) {
      layer_offsets_.push_back(hidden_);
      hidden_ += net.layers()[i].flat_out();
    }
  }

  TrajectoryLog run(const ParamVector& theta0) {
    TrajectoryLog log;
    log.scheme = cfg_.scheme;
    log.step = cfg_.step;
    theta0_ = theta0;
    theta_ = theta0;
    try {
      grad_ = gradient(theta_);
      gsq_ = grad_.squaredNorm();
      if (cfg_.track_events) pattern_ = kernels::piece_patterns(net_, theta_, data_, Exec::parallel);
      record(log, 0.0);
      double t = 0.0;
      adaptive_h_ = cfg_.step;
      for (const Node& node : build_nodes(cfg_)) {
        if (cfg_.scheme == Scheme::rk45)
          advance_adaptive(log, t, node.time);
        else
          advance_fixed(log, t, node.dt);
        t = node.time;
        if (node.log) record(log, t);
      }
    } catch (const NumericError& e) {
      log.aborted = true;
      log.abort_reason = e.what();
    }
    return log;
  }

  const ParamVector& state() const { return theta_; }

 private:
  ParamVector gradient(const ParamVector& theta) {
    if (!theta.allFinite()) throw NumericError("non-finite parameter vector");
    ParamVector g = kernels::loss_gradient(net_, theta, data_, Exec::parallel);
    if (!g.allFinite()) throw NumericError("non-finite loss gradient");
    return g;
  }

  // Velocity of the flow: -grad for forward time, +grad for reverse.
  ParamVector velocity(const ParamVector& theta) { return direction_ * gradient(theta); }

  // One step plus its quadrature of ||grad L||^2 over the step, using the
  // scheme's own stage weights so that ||dtheta||^2 <= dt * quad holds exactly.
  ParamVector fixed_step(const ParamVector& theta, const ParamVector& g0, double dt, double& quad) {
    if (cfg_.scheme == Scheme::euler) {
      quad = dt * g0.squaredNorm();
      if (direction_ < 0) return theta - dt * g0;
      return theta + dt * g0;
    }
    const ParamVector k1 = direction_ * g0;
    const ParamVector k2 = velocity(theta + (0.5 * dt) * k1);
    const ParamVector k3 = velocity(theta + (0.5 * dt) * k2);
    const ParamVector k4 = velocity(theta + dt * k3);
    quad = (dt / 6.0) * (k1.squaredNorm() + 2.0 * k2.squaredNorm() + 2.0 * k3.squaredNorm() + k4.squaredNorm());
    return theta + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }

  void accept(TrajectoryLog& log, ParamVector next, double t_after, double quad) {
    ParamVector g = gradient(next);
    const double gsq = g.squaredNorm();
    integral_ += quad;
    if (cfg_.track_events) {
      std::vector<int> pattern = kernels::piece_patterns(net_, next, data_, Exec::parallel);
      record_events(log, pattern, t_after);
      pattern_ = std::move(pattern);
    }
    theta_ = std::move(next);
    grad_ = std::move(g);
    gsq_ = gsq;
    ++log.steps_taken;
  }

  void advance_fixed(TrajectoryLog& log, double t, double dt) {
    double remaining = dt;
    double now = t;
    while (remaining > 0.0) {
      double quad = 0.0;
      ParamVector next = fixed_step(theta_, grad_, remaining, quad);
      double taken = remaining;
      if (cfg_.track_events && cfg_.kink_refine) {
        if (kernels::piece_patterns(net_, next, data_, Exec::parallel) != pattern_) {
          double lo = 0.0, hi = remaining;
          while (hi - lo > 1e-9) {
            const double mid = 0.5 * (lo + hi);
            double unused = 0.0;
            if (kernels::piece_patterns(net_, fixed_step(theta_, grad_, mid, unused), data_, Exec::parallel) ==
                pattern_)
              lo = mid;
            else
              hi = mid;
          }
          if (hi < remaining) {
            taken = hi;
            next = fixed_step(theta_, grad_, taken, quad);
          }
        }
      }
      remaining = (taken == remaining) ? 0.0 : remaining - taken;
      now += taken;
      accept(log, std::move(next), remaining == 0.0 ? t + dt : now, quad);
    }
  }

  // Dormand-Prince 5(4) with the usual step-size controller.
  void advance_adaptive(TrajectoryLog& log, double t, double target) {
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                            a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                            b6 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                            e6 = 22.0 / 525, e7 = -1.0 / 40;
    double now = t;
    while (now < target) {
      const double h = std::min(adaptive_h_, target - now);
      if (h < 1e-15) throw FlowError("rk45: step size underflow at t = " + format_double(now));
      const ParamVector& y = theta_;
      const ParamVector k1 = direction_ * grad_;
      const ParamVector k2 = velocity(y + h * (a21 * k1));
      const ParamVector k3 = velocity(y + h * (a31 * k1 + a32 * k2));
      const ParamVector k4 = velocity(y + h * (a41 * k1 + a42 * k2 + a43 * k3));
      const ParamVector k5 = velocity(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
      const ParamVector k6 = velocity(y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
      ParamVector next = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
      const ParamVector k7 = velocity(next);
      const ParamVector err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
      const Eigen::ArrayXd scale = cfg_.abs_tol + cfg_.rel_tol * y.cwiseAbs().cwiseMax(next.cwiseAbs()).array();
      const double norm = std::sqrt((err.array() / scale).square().mean());
      const double factor = norm == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(norm, -0.2), 0.2, 5.0);
      if (norm <= 1.0) {
        const bool last = h == target - now;
        now = last ? target : now + h;
        const double quad = h * (b1 * k1.squaredNorm() + b3 * k3.squaredNorm() + b4 * k4.squaredNorm() +
                                 b5 * k5.squaredNorm() + b6 * k6.squaredNorm());
        accept(log, std::move(next), now, quad);
        if (!last) adaptive_h_ = h * factor;
        else adaptive_h_ = std::max(adaptive_h_, h * factor);
      } else {
        adaptive_h_ = h * factor;
      }
    }
  }

  void record_events(TrajectoryLog& log, const std::vector<int>& pattern, double t) {
    if (hidden_ == 0) return;
    for (std::size_t idx = 0; idx < pattern.size(); ++idx) {
      if (pattern[idx] == pattern_[idx]) continue;
      const std::size_t example = idx / hidden_;
      const std::size_t within = idx % hidden_;
      const auto it = std::upper_bound(layer_offsets_.begin(), layer_offsets_.end(), within) - 1;
      const auto layer = static_cast<std::size_t>(it - layer_offsets_.begin());
      log.events.push_back({t, layer + 1, within - *it, example});
    }
  }

  void record(TrajectoryLog& log, double t) {
    const double l = kernels::loss(net_, theta_, data_, Exec::parallel);
    const double r = residual(net_, theta_, data_).norm();
    double lambda = std::numeric_limits<double>::quiet_NaN();
    if (cfg_.record_lambda) lambda = min_eigenvalue(ntk_gram(net_, theta_, data_));
    log.times.push_back(t);
    log.losses.push_back(l);
    log.residual_norms.push_back(r);
    log.lambda_mins.push_back(lambda);
    log.grad_norm_sq.push_back(gsq_);
    log.grad_sq_integral.push_back(integral_);
    log.displacement_sq.push_back((theta_ - theta0_).squaredNorm());
    if (cfg_.keep_thetas) log.thetas.push_back(theta_);
  }

  const Network& net_;
  const Dataset& data_;
  const FlowConfig& cfg_;
  double direction_;
  ParamVector theta0_, theta_, grad_;
  double gsq_ = 0.0;
  double integral_ = 0.0;
  double adaptive_h_ = 0.0;
  std::vector<int> pattern_;
  std::vector<std::size_t> layer_offsets_;
  std::size_t hidden_ = 0;
};

}  // namespace

TrajectoryLog integrate(const Network& net, const ParamVector& theta0, const Dataset& data, const FlowConfig& cfg) {
  cfg.validate();
  net.check_dataset(data);
  net.check_params(theta0);
  if (!theta0.allFinite()) throw std::invalid_argument("integrate: non-finite initial parameters");
  Engine engine(net, data, cfg, -1.0);
  return engine.run(theta0);
}

ParamVector integrate_reverse(const Network& net, const ParamVector& theta_end, const Dataset& data,
                              const FlowConfig& cfg) {
  if (cfg.horizon == 0.0) return theta_end;
  FlowConfig rev = cfg;
  rev.track_events = false;
  rev.record_lambda = false;
  rev.keep_thetas = false;
  rev.log_stride = rev.horizon;
  rev.validate();
  net.check_dataset(data);
  net.check_params(theta_end);
  Engine engine(net, data, rev, +1.0);
  const TrajectoryLog log = engine.run(theta_end);
  if (log.aborted) throw NumericError("reverse flow aborted: " + log.abort_reason);
  return engine.state();
}

BlowupReport blowup_bound_check(const TrajectoryLog& log) {
  if (log.size() < 2) throw std::invalid_argument("blowup_bound_check: need at least two logged states");
  BlowupReport rep;
  rep.worst_excess = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < log.size(); ++i) {
    const double lhs = log.displacement_sq[i];
    const double rhs = log.times[i] * log.grad_sq_integral[i];
    rep.lhs.push_back(lhs);
    rep.rhs.push_back(rhs);
    if (lhs - rhs > rep.worst_excess) {
      rep.worst_excess = lhs - rhs;
      rep.worst_index = i;
    }
    if (!(lhs <= rhs * (1.0 + 1e-6) + 1e-12)) rep.pass = false;
  }
  return rep;
}

MonotonicityReport loss_monotonicity_check(const TrajectoryLog& log) {
  if (log.size() < 2) throw std::invalid_argument("loss_monotonicity_check: need at least two logged states");
  MonotonicityReport rep;
  rep.worst_violation = -std::numeric_limits<double>::infinity();
  const double slack = log.losses[0] * std::pow(log.step, scheme_order(log.scheme));
  for (std::size_t i = 0; i + 1 < log.size(); ++i) {
    const double rise = log.losses[i + 1] - log.losses[i];
    if (rise > rep.worst_violation) {
      rep.worst_violation = rise;
      rep.worst_index = i;
    }
    if (!(log.losses[i + 1] <= log.losses[i] * (1.0 + 1e-9) + slack)) rep.pass = false;
  }
  return rep;
}

std::string format_trajectory_csv(const TrajectoryLog& log) {
  std::string out = "t,loss,residual_norm,lambda_min,grad_norm_sq,cumulative_integral\n";
  for (std::size_t i = 0; i < log.size(); ++i) {
    out += format_double(log.times[i]) + "," + format_double(log.losses[i]) + "," +
           format_double(log.residual_norms[i]) + "," + format_double(log.lambda_mins[i]) + "," +
           format_double(log.grad_norm_sq[i]) + "," + format_double(log.grad_sq_integral[i]) + "\n";
  }
  return out;
}

TrajectoryLog parse_trajectory_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("t,loss,residual_norm,lambda_min", 0) != 0)
    throw std::invalid_argument("trajectory csv: missing header");
  TrajectoryLog log;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> v;
    std::istringstream cells(line);
    std::string cell;
    try {
      while (std::getline(cells, cell, ',')) v.push_back(cell == "nan" || cell == "-nan" ? std::nan("") : parse_double(cell));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("trajectory csv line " + std::to_string(row) + ": " + e.what());
    }
    if (v.size() != 6) throw std::invalid_argument("trajectory csv line " + std::to_string(row) + ": expected 6 columns");
    log.times.push_back(v[0]);
    log.losses.push_back(v[1]);
    log.residual_norms.push_back(v[2]);
    log.lambda_mins.push_back(v[3]);
    log.grad_norm_sq.push_back(v[4]);
    log.grad_sq_integral.push_back(v[5]);
  }
  return log;
}

std::string format_thetas(const TrajectoryLog& log) {
  std::string out;
  for (const auto& th : log.thetas) {
    for (Eigen::Index i = 0; i < th.size(); ++i) {
      if (i > 0) out += ',';
      out += format_double(th(i));
    }
    out += '\n';
  }
  return out;
}

std::vector<ParamVector> parse_thetas(const std::string& text) {
  std::vector<ParamVector> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> v;
    std::istringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) v.push_back(parse_double(cell));
    out.push_back(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
  }
  return out;
}

}  // namespace gflow
