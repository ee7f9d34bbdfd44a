#pragma once

// Data-parallel kernels over the examples of a dataset. Each kernel has a
// serial reference path and an OpenMP path. Per-example work is independent;
// every reduction that produces a reported number runs in example order on
// one thread, so both paths return bitwise-identical results for any thread
// count.

#include "gflow/data.hpp"
#include "gflow/network.hpp"

#include <Eigen/Dense>

#include <vector>

namespace gflow::kernels {

enum class Exec { serial, parallel };

// Stacked predictions F in example-major order (length n * M).
Eigen::VectorXd predictions(const Network& net, const ParamVector& theta, const Dataset& data, Exec exec);

double loss(const Network& net, const ParamVector& theta, const Dataset& data, Exec exec);

ParamVector loss_gradient(const Network& net, const ParamVector& theta, const Dataset& data, Exec exec);

// P x nM; column j*M + k is d f_k(X_j) / d theta.
Eigen::MatrixXd stacked_jacobian(const Network& net, const ParamVector& theta, const Dataset& data, Exec exec);

// J^T J, filled from the upper triangle.
Eigen::MatrixXd gram(const Eigen::MatrixXd& jacobian, Exec exec);

// Piece indices of all hidden pre-activations, example-major.
std::vector<int> piece_patterns(const Network& net, const ParamVector& theta, const Dataset& data, Exec exec);

}  // namespace gflow::kernels
