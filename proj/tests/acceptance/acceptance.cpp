// Acceptance suite. Prints one PASS/FAIL line per criterion and exits nonzero
// if any selected criterion fails.
//
//   acceptance            all criteria
//   acceptance --only 4   a single criterion
#include "gflow/activation.hpp"
#include "gflow/certify.hpp"
#include "gflow/data.hpp"
#include "gflow/flow.hpp"
#include "gflow/network.hpp"
#include "gflow/spectral.hpp"
#include "gflow/util.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace gflow;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

// ---- shared setups ---------------------------------------------------------

// theta * x on the single example (x = 2, y = 6).
struct Scalar {
  Network net = Network::build({LayerSpec{LayerKind::dense, 1, 1, false, nullptr}}, builtin("identity"));
  Dataset data{Eigen::MatrixXd::Constant(1, 1, 2.0), Eigen::MatrixXd::Constant(1, 1, 6.0), nullptr};
  ParamVector theta0 = ParamVector::Constant(1, 1.0);
};

double scalar_exact(double t) { return 3.0 - 2.0 * std::exp(-4.0 * t); }

TrajectoryLog scalar_run(double h, double stride, Scheme scheme = Scheme::rk4) {
  Scalar s;
  FlowConfig cfg;
  cfg.scheme = scheme;
  cfg.step = h;
  cfg.horizon = 2.0;
  cfg.log_stride = stride;
  return integrate(s.net, s.theta0, s.data, cfg);
}

// 50 points in the unit ball of R^20 with 5 outputs.
const Dataset& desk_data() {
  static const Dataset d = gen_synthetic(50, 20, 5, 1.0, 1.0, 0);
  return d;
}

Network desk_net(const std::vector<std::size_t>& hidden, const std::string& act = "leaky_relu") {
  std::vector<std::size_t> widths{20};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(5);
  return Network::build(dense_chain(widths), builtin(act));
}

FlowConfig desk_flow() {
  FlowConfig cfg;
  cfg.scheme = Scheme::rk4;
  cfg.step = 1e-4;
  cfg.horizon = 0.1;
  cfg.log_stride = 1e-3;
  return cfg;
}

struct DeskRun {
  Network net;
  ParamVector theta0;
  TrajectoryLog log;
  ConvergenceCertificate cert;
};

DeskRun desk_run(const std::vector<std::size_t>& hidden, const std::string& act = "leaky_relu",
                 std::uint64_t seed = 0) {
  Network net = desk_net(hidden, act);
  ParamVector theta0 = init_params(net, seed);
  TrajectoryLog log = integrate(net, theta0, desk_data(), desk_flow());
  ConvergenceCertificate cert = certificate(log, 1e-3, net.activation().coverage());
  return {std::move(net), std::move(theta0), std::move(log), std::move(cert)};
}

// ---- criteria --------------------------------------------------------------

Verdict closed_form() {
  const auto t0 = Clock::now();
  const TrajectoryLog log = scalar_run(1e-3, 1e-3);
  double worst_theta = 0.0, worst_equality = 0.0;
  for (std::size_t i = 0; i < log.size(); ++i) {
    worst_theta = std::max(worst_theta, std::abs(log.thetas[i](0) - scalar_exact(log.times[i])));
  }
  const auto cert = certificate(log, 1e-3);
  for (const auto& c : cert.checks) worst_equality = std::max(worst_equality, std::abs(c.residual / c.envelope - 1.0));
  const double secs = seconds_since(t0);
  const bool pass = worst_theta <= 1e-8 && cert.status == CertStatus::certified &&
                    std::abs(cert.lambda0 - 4.0) <= 1e-9 && worst_equality <= 1e-7 && secs < 1.0;
  return {pass, "max|theta - (3 - 2e^-4t)| = " + fmt(worst_theta) + ", status " + std::string(to_string(cert.status)) +
                    ", lambda0 = " + format_double(cert.lambda0) + ", max|residual/envelope - 1| = " +
                    fmt(worst_equality) + ", " + fmt(secs) + " s"};
}

// Central differences of the loss, one coordinate at a time.
ParamVector fd_gradient(const Network& net, const ParamVector& theta, const Dataset& data, double h) {
  ParamVector g(theta.size());
  ParamVector probe = theta;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double step = h * std::max(1.0, std::abs(theta(i)));
    probe(i) = theta(i) + step;
    const double up = loss(net, probe, data);
    probe(i) = theta(i) - step;
    const double down = loss(net, probe, data);
    probe(i) = theta(i);
    g(i) = (up - down) / (2.0 * step);
  }
  return g;
}

// Smallest |pre-activation| over every activated unit and example, measured
// against the nearest breakpoint.
double breakpoint_margin(const Network& net, const ParamVector& theta, const Dataset& data) {
  const auto& bps = net.activation().breakpoints();
  if (bps.empty()) return INFINITY;
  double margin = INFINITY;
  for (std::size_t j = 0; j < data.size(); ++j) {
    Network::Tape tape;
    net.forward(theta, data.inputs.col(static_cast<Eigen::Index>(j)), tape);
    for (std::size_t l = 0; l + 1 < tape.pre.size(); ++l)
      for (double z : tape.pre[l])
        for (double b : bps) margin = std::min(margin, std::abs(z - b));
  }
  return margin;
}

Verdict gradient_fd() {
  const auto t0 = Clock::now();
  struct Arch {
    std::string name;
    std::function<Network(const Dataset&)> net;
    std::function<Dataset(std::uint64_t)> data;
  };
  auto dense_data = [](std::size_t M) {
    return [M](std::uint64_t s) { return gen_synthetic(6, 4, M, 1.0, 1.0, 100 + s); };
  };
  auto gcn_data = [](std::uint64_t s) {
    Dataset pts = gen_synthetic(7, 3, 2, 1.0, 1.0, 200 + s);
    auto g = std::make_shared<const Graph>(knn_graph(pts.inputs, 2));
    return as_graph_example(pts, g);
  };
  std::vector<Arch> archs{
      {"dense2", [](const Dataset&) { return Network::build(dense_chain({4, 6, 3}), builtin("leaky_relu", std::vector{0.2})); },
       dense_data(3)},
      {"dense3", [](const Dataset&) { return Network::build(dense_chain({4, 6, 5, 3}), builtin("leaky_relu", std::vector{0.2})); },
       dense_data(3)},
      {"residual3", [](const Dataset&) { return Network::build(residual_chain(4, 3), builtin("leaky_relu", std::vector{0.2})); },
       dense_data(4)},
      {"gcn2", [](const Dataset& d) { return Network::build(gcn_chain({3, 5, 2}, d.graph), builtin("leaky_relu", std::vector{0.2})); },
       gcn_data},
      {"sigmoid", [](const Dataset&) { return Network::build(dense_chain({4, 6, 3}), builtin("sigmoid")); }, dense_data(3)},
  };

  bool pass = true;
  std::string detail;
  for (const auto& arch : archs) {
    double worst = 0.0;
    int accepted = 0;
    for (std::uint64_t s = 0; accepted < 20 && s < 1000; ++s) {
      const Dataset data = arch.data(s);
      const Network net = arch.net(data);
      Rng rng(7000 + s);
      ParamVector theta = init_params(net, s);
      for (Eigen::Index i = 0; i < theta.size(); ++i) theta(i) += 0.3 * rng.normal();
      if (breakpoint_margin(net, theta, data) < 1e-3) continue;
      ++accepted;
      const ParamVector g = loss_gradient(net, theta, data);
      const ParamVector fd = fd_gradient(net, theta, data, 1e-5);
      worst = std::max(worst, (g - fd).norm() / std::max(fd.norm(), 1e-300));
    }
    pass = pass && accepted == 20 && worst <= 1e-5;
    detail += arch.name + " " + fmt(worst) + (accepted == 20 ? "" : " (too few points)") + ", ";
  }
  const double secs = seconds_since(t0);
  pass = pass && secs < 30.0;
  return {pass, "max relative error per architecture: " + detail + fmt(secs) + " s"};
}

Verdict rank_dichotomy() {
  const auto t0 = Clock::now();
  // [N, h, 3] with bias has P = h (N + 4) + 3.
  struct Shape {
    std::size_t P, N, h;
    bool over;
  };
  const std::vector<Shape> shapes{{30, 5, 3, false}, {50, 43, 1, false}, {59, 4, 7, false},
                                  {61, 25, 2, true},  {80, 7, 7, true},   {120, 5, 13, true}};
  bool pass = true;
  std::string detail;
  for (const auto& s : shapes) {
    const Network net = Network::build(dense_chain({s.N, s.h, 3}), builtin("leaky_relu"));
    if (net.param_count() != s.P) return {false, "shape bookkeeping broke for P = " + std::to_string(s.P)};
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const Dataset data = gen_synthetic(20, s.N, 3, 1.0, 1.0, seed);
      const ParamVector theta = init_params(net, seed);
      const Eigen::MatrixXd g = ntk_gram(net, theta, data);
      const double lam = min_eigenvalue(g);
      if (s.over ? !numerically_singular(lam, g) : lam <= 1e-8) ++hits;
    }
    const bool ok = s.over ? hits >= 99 : hits == 100;
    pass = pass && ok;
    detail += "P=" + std::to_string(s.P) + (s.over ? " nonsingular " : " singular ") + std::to_string(hits) +
              "/100" + (ok ? "" : " (short)") + ", ";
  }
  const double secs = seconds_since(t0);
  pass = pass && secs < 120.0;
  return {pass, detail + fmt(secs) + " s"};
}

Verdict desk_envelope() {
  const auto t0 = Clock::now();
  const DeskRun r = desk_run({40, 40});
  const double bound = std::exp(-2.0 * r.cert.lambda0 * 0.1) * r.log.losses.front() * 1.01;
  const double secs = seconds_since(t0);
  const bool pass = r.cert.status == CertStatus::certified && r.log.losses.back() <= bound && secs < 300.0;
  return {pass, "P = " + std::to_string(r.net.param_count()) + ", status " + std::string(to_string(r.cert.status)) +
                    ", lambda0 = " + fmt(r.cert.lambda0) + ", final loss " + fmt(r.log.losses.back()) +
                    " <= " + fmt(bound) + ", " + fmt(secs) + " s"};
}

Verdict ablation() {
  const auto t0 = Clock::now();
  const std::vector<std::vector<std::size_t>> sweep{{5, 5}, {10, 10}, {20, 20}, {40, 40}};
  const std::size_t nM = 250;
  bool pass = true;
  std::string detail;
  double prev_final = INFINITY;
  for (const auto& hidden : sweep) {
    const DeskRun r = desk_run(hidden);
    const bool over = r.net.param_count() >= nM;
    const bool certified = r.cert.status == CertStatus::certified;
    if (!over && certified) pass = false;
    if (r.log.losses.back() >= prev_final) pass = false;
    prev_final = r.log.losses.back();
    detail += "P=" + std::to_string(r.net.param_count()) + " " + std::string(to_string(r.cert.status)) +
              " final " + fmt(r.log.losses.back()) + "; ";
  }
  const double secs = seconds_since(t0);
  pass = pass && secs < 900.0;
  return {pass, detail + fmt(secs) + " s"};
}

Verdict corollaries() {
  bool pass = true;
  std::string detail;
  for (const auto& [act, tag] : {std::pair{"relu", Coverage::corollary1_relu},
                                 std::pair{"sigmoid", Coverage::corollary2_sigmoid}}) {
    const DeskRun r = desk_run({40, 40}, act);
    const bool ok = r.cert.status == CertStatus::certified && r.cert.coverage == tag &&
                    check_envelope(r.log, r.cert.lambda0, 1e-3).pass;
    pass = pass && ok;
    detail += std::string(act) + ": " + std::string(to_string(r.cert.status)) + " [" +
              std::string(to_string(r.cert.coverage)) + "] lambda0 = " + fmt(r.cert.lambda0) + "; ";
  }
  return {pass, detail};
}

Verdict blowup() {
  std::vector<std::pair<std::string, TrajectoryLog>> logs;
  logs.emplace_back("closed-form", scalar_run(1e-3, 1e-3));
  for (const auto& hidden : std::vector<std::vector<std::size_t>>{{5, 5}, {10, 10}, {20, 20}, {40, 40}})
    logs.emplace_back("leaky " + std::to_string(hidden[0]) + "x2", desk_run(hidden).log);
  logs.emplace_back("relu 40x2", desk_run({40, 40}, "relu").log);
  logs.emplace_back("sigmoid 40x2", desk_run({40, 40}, "sigmoid").log);
  bool pass = true;
  std::string detail;
  for (const auto& [name, log] : logs) {
    const auto rep = blowup_bound_check(log);
    pass = pass && rep.pass;
    if (!rep.pass) detail += name + " fails at t = " + fmt(log.times[rep.worst_index]) + "; ";
  }
  return {pass, std::to_string(logs.size()) + " runs checked" + (detail.empty() ? "" : ": " + detail)};
}

double gram_lambda_max(const Network& net, const ParamVector& theta) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(ntk_gram(net, theta, desk_data()), Eigen::EigenvaluesOnly)
      .eigenvalues()
      .maxCoeff();
}

Verdict round_trip() {
  const Network net = desk_net({40, 40});
  const ParamVector theta0 = init_params(net, 0);
  FlowConfig cfg = desk_flow();
  cfg.horizon = 0.05;
  cfg.log_stride = 0.05;
  cfg.track_events = false;
  cfg.record_lambda = false;
  cfg.keep_thetas = true;
  const TrajectoryLog fwd = integrate(net, theta0, desk_data(), cfg);
  // Rounding in theta(T) is amplified by about exp(lambda_max T) going back.
  const double lmax = gram_lambda_max(net, theta0);
  const std::string stiffness = "lambda_max(G(0)) = " + fmt(lmax) + ", exp(lambda_max T) = " + fmt(std::exp(lmax * 0.05));
  try {
    const ParamVector back = integrate_reverse(net, fwd.thetas.back(), desk_data(), cfg);
    const double rel = (back - theta0).norm() / theta0.norm();
    return {rel <= 1e-4, "||theta_back - theta0|| / ||theta0|| = " + fmt(rel) + "; " + stiffness};
  } catch (const NumericError& e) {
    return {false, std::string("reverse flow diverged: ") + e.what() + "; " + stiffness};
  }
}

Verdict dynamics() {
  const DeskRun r = desk_run({40, 40});
  const auto rep = dynamics_residual_check(r.net, r.log, desk_data(), 1e-2);
  std::string per_time;
  for (std::size_t i = 0; i < rep.times.size(); ++i) per_time += " " + fmt(rep.deviations[i]);
  return {rep.max_relative_deviation < 1e-2,
          "max relative deviation " + fmt(rep.max_relative_deviation) + " (per time:" + per_time +
              "); lambda_max(G(0)) = " + fmt(gram_lambda_max(r.net, r.theta0)) + ", " +
              std::to_string(r.log.events.size()) + " piece switches"};
}

Verdict approximation() {
  const Activation exact = Activation::exact_sigmoid();
  bool pass = true;
  double prev = INFINITY;
  std::string detail;
  for (int deg : {1, 3, 7, 15, 31}) {
    const double err = sup_error(approximate_sigmoid(deg), exact, -6.0, 6.0, 20001);
    pass = pass && err > 0.0 && err < 0.25 && err <= prev + 1e-9;
    prev = err;
    detail += "deg " + std::to_string(deg) + ": " + fmt(err) + "; ";
  }
  return {pass, detail};
}

Verdict integrator_order() {
  const double T = 2.0;
  std::vector<double> errs;
  for (double h : {0.1, 0.05, 0.025}) {
    const TrajectoryLog log = scalar_run(h, T);
    errs.push_back(std::abs(log.thetas.back()(0) - scalar_exact(T)));
  }
  const double p1 = std::log2(errs[0] / errs[1]);
  const double p2 = std::log2(errs[1] / errs[2]);
  const bool order_ok = p1 >= 3.5 && p1 <= 4.5 && p2 >= 3.5 && p2 <= 4.5;

  // Euler against a plain gradient-descent loop, bit for bit.
  const Network net = desk_net({40, 40});
  const ParamVector theta0 = init_params(net, 0);
  const double h = 1e-3;
  FlowConfig cfg;
  cfg.scheme = Scheme::euler;
  cfg.step = h;
  cfg.horizon = 100 * h;
  cfg.log_stride = h;
  cfg.track_events = false;
  cfg.record_lambda = false;
  const TrajectoryLog log = integrate(net, theta0, desk_data(), cfg);
  ParamVector gd = theta0;
  std::size_t mismatches = log.size() == 101 ? 0 : 1;
  for (std::size_t k = 1; k <= 100 && k < log.size(); ++k) {
    gd = gd - h * loss_gradient(net, gd, desk_data());
    if (std::memcmp(gd.data(), log.thetas[k].data(), sizeof(double) * static_cast<std::size_t>(gd.size())) != 0)
      ++mismatches;
  }
  return {order_ok && mismatches == 0, "rk4 observed order " + fmt(p1) + ", " + fmt(p2) + "; euler vs gd loop: " +
                                           std::to_string(mismatches) + " mismatched steps of 100"};
}

struct Criterion {
  int id;
  const char* name;
  Verdict (*run)();
};

const Criterion kCriteria[] = {
    {1, "closed-form scalar flow", closed_form},
    {2, "gradient vs finite differences", gradient_fd},
    {3, "Gram rank dichotomy", rank_dichotomy},
    {4, "desk-scale envelope", desk_envelope},
    {5, "width ablation", ablation},
    {6, "relu and sigmoid certificates", corollaries},
    {7, "displacement bound", blowup},
    {8, "forward-reverse round trip", round_trip},
    {9, "residual dynamics", dynamics},
    {10, "sigmoid approximation", approximation},
    {11, "integrator order and gd bridge", integrator_order},
};

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else {
      std::cerr << "usage: acceptance [--only N]\n";
      return 1;
    }
  }
  if (only < 0 || only > 11) {
    std::cerr << "acceptance: no criterion " << only << "\n";
    return 1;
  }
  int failed = 0;
  for (const auto& c : kCriteria) {
    if (only != 0 && c.id != only) continue;
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    std::cout << "criterion " << c.id << " (" << c.name << "): " << (v.pass ? "PASS" : "FAIL") << "  " << v.detail
              << std::endl;
    if (!v.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
