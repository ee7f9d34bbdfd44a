#include "gflow/spectral.hpp"

#include "gflow/kernels.hpp"
#include "gflow/util.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>

namespace gflow {

Eigen::MatrixXd stacked_jacobian(const Network& net, const ParamVector& theta, const Dataset& data) {
  return kernels::stacked_jacobian(net, theta, data, kernels::Exec::parallel);
}

Eigen::MatrixXd ntk_gram(const Network& net, const ParamVector& theta, const Dataset& data) {
  return kernels::gram(stacked_jacobian(net, theta, data), kernels::Exec::parallel);
}

double min_eigenvalue(const Eigen::MatrixXd& g) {
  if (g.rows() == 0 || g.rows() != g.cols()) throw std::invalid_argument("min_eigenvalue: need a square matrix");
  if (!g.allFinite()) throw std::invalid_argument("min_eigenvalue: non-finite entry");
  const double scale = std::max(1.0, g.cwiseAbs().maxCoeff());
  if ((g - g.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw std::invalid_argument("min_eigenvalue: matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(g, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw std::runtime_error("min_eigenvalue: eigensolver did not converge");
  return solver.eigenvalues()(0);
}

bool numerically_singular(double lambda_min, const Eigen::MatrixXd& g) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(g, Eigen::EigenvaluesOnly);
  const auto& ev = solver.eigenvalues();
  const double norm = std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
  return lambda_min < 1e-10 * norm || norm == 0.0;
}

StackedVector stacked_predictions(const Network& net, const ParamVector& theta, const Dataset& data) {
  return kernels::predictions(net, theta, data, kernels::Exec::parallel);
}

StackedVector stacked_labels(const Dataset& data) {
  return Eigen::Map<const Eigen::VectorXd>(data.labels.data(), data.labels.size());
}

StackedVector residual(const Network& net, const ParamVector& theta, const Dataset& data) {
  return stacked_labels(data) - stacked_predictions(net, theta, data);
}

void write_gram_csv(const Eigen::MatrixXd& g, std::size_t n, std::size_t M, std::size_t P, double t,
                    const std::string& path) {
  std::string out = "# n=" + std::to_string(n) + ",M=" + std::to_string(M) + ",P=" + std::to_string(P) +
                    ",t=" + format_double(t) + "\n";
  for (Eigen::Index i = 0; i < g.rows(); ++i) {
    for (Eigen::Index j = 0; j < g.cols(); ++j) {
      if (j > 0) out += ',';
      out += format_double(g(i, j));
    }
    out += '\n';
  }
  write_file(path, out);
}

}  // namespace gflow
