#include "gflow/kernels.hpp"

#include "gflow/util.hpp"

#include <algorithm>
#include <exception>
#include <mutex>

namespace gflow::kernels {

namespace {

constexpr Eigen::Index kGradientBlock = 64;

// Runs body(j) for j in [0, count), rethrowing the first exception raised by
// any worker.
template <class Body>
void for_each_index(Eigen::Index count, Exec exec, Body&& body) {
  if (exec == Exec::serial) {
    for (Eigen::Index j = 0; j < count; ++j) body(j);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
#pragma omp parallel for schedule(static)
  for (Eigen::Index j = 0; j < count; ++j) {
    try {
      body(j);
    } catch (...) {
      std::lock_guard lock(error_mutex);
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace

Eigen::VectorXd predictions(const Network& net, const ParamVector& theta, const Dataset& data, Exec exec) {
  net.check_dataset(data);
  net.check_params(theta);
  const auto n = static_cast<Eigen::Index>(data.size());
  const auto M = static_cast<Eigen::Index>(net.output_size());
  Eigen::VectorXd out(n * M);
  for_each_index(n, exec, [&](Eigen::Index j) { out.segment(j * M, M) = net.forward(theta, data.inputs.col(j)); });
  return out;
}

double loss(const Network& net, const ParamVector& theta, const Dataset& data, Exec exec) {
  const Eigen::VectorXd f = predictions(net, theta, data, exec);
  const auto M = static_cast<Eigen::Index>(net.output_size());
  double total = 0.0;
  for (Eigen::Index j = 0; j < data.inputs.cols(); ++j)
    total += (f.segment(j * M, M) - data.labels.col(j)).squaredNorm();
  return 0.5 * total;
}

ParamVector loss_gradient(const Network& net, const ParamVector& theta, const Dataset& data, Exec exec) {
  net.check_dataset(data);
  net.check_params(theta);
  const auto n = static_cast<Eigen::Index>(data.size());
  const auto P = static_cast<Eigen::Index>(net.param_count());
  ParamVector grad = ParamVector::Zero(P);
  Eigen::MatrixXd block(P, std::min(n, kGradientBlock));
  for (Eigen::Index start = 0; start < n; start += kGradientBlock) {
    const Eigen::Index count = std::min(kGradientBlock, n - start);
    for_each_index(count, exec, [&](Eigen::Index b) {
      const Eigen::Index j = start + b;
      Network::Tape tape;
      const Eigen::VectorXd f = net.forward(theta, data.inputs.col(j), tape);
      block.col(b).setZero();
      net.backward(theta, tape, f - data.labels.col(j), block.col(b));
    });
    for (Eigen::Index b = 0; b < count; ++b) grad += block.col(b);
  }
  return grad;
}

Eigen::MatrixXd stacked_jacobian(const Network& net, const ParamVector& theta, const Dataset& data, Exec exec) {
  net.check_dataset(data);
  net.check_params(theta);
  const auto n = static_cast<Eigen::Index>(data.size());
  const auto M = static_cast<Eigen::Index>(net.output_size());
  Eigen::MatrixXd jac(static_cast<Eigen::Index>(net.param_count()), n * M);
  for_each_index(n, exec, [&](Eigen::Index j) { jac.middleCols(j * M, M) = net.param_jacobian(theta, data.inputs.col(j)); });
  return jac;
}

Eigen::MatrixXd gram(const Eigen::MatrixXd& jacobian, Exec exec) {
  const Eigen::Index d = jacobian.cols();
  Eigen::MatrixXd g(d, d);
  auto row = [&](Eigen::Index p) {
    for (Eigen::Index q = p; q < d; ++q) g(p, q) = jacobian.col(p).dot(jacobian.col(q));
  };
  if (exec == Exec::serial) {
    for (Eigen::Index p = 0; p < d; ++p) row(p);
  } else {
#pragma omp parallel for schedule(dynamic, 4)
    for (Eigen::Index p = 0; p < d; ++p) row(p);
  }
  for (Eigen::Index p = 0; p < d; ++p)
    for (Eigen::Index q = 0; q < p; ++q) g(p, q) = g(q, p);
  return g;
}

std::vector<int> piece_patterns(const Network& net, const ParamVector& theta, const Dataset& data, Exec exec) {
  net.check_dataset(data);
  const auto n = static_cast<Eigen::Index>(data.size());
  const auto h = static_cast<std::ptrdiff_t>(net.hidden_units());
  std::vector<int> out(static_cast<std::size_t>(n * h));
  for_each_index(n, exec, [&](Eigen::Index j) {
    std::vector<int> local;
    local.reserve(static_cast<std::size_t>(h));
    net.piece_pattern(theta, data.inputs.col(j), local);
    std::copy(local.begin(), local.end(), out.begin() + j * h);
  });
  return out;
}

}  // namespace gflow::kernels
