#pragma once

#include "gflow/data.hpp"
#include "gflow/network.hpp"

#include <Eigen/Dense>

#include <string>

namespace gflow {

// Vectors in R^{nM} ordered example-major, then output component.
using StackedVector = Eigen::VectorXd;

Eigen::MatrixXd stacked_jacobian(const Network& net, const ParamVector& theta, const Dataset& data);

// Neural tangent kernel G = J^T J for the stacked Jacobian J.
Eigen::MatrixXd ntk_gram(const Network& net, const ParamVector& theta, const Dataset& data);

// Smallest eigenvalue of a symmetric matrix. Throws std::invalid_argument
// when |G - G^T| exceeds 1e-12 * max(1, |G|).
double min_eigenvalue(const Eigen::MatrixXd& g);

// lambda_min < 1e-10 * ||G||_2 (largest |eigenvalue|).
bool numerically_singular(double lambda_min, const Eigen::MatrixXd& g);

StackedVector stacked_predictions(const Network& net, const ParamVector& theta, const Dataset& data);
StackedVector stacked_labels(const Dataset& data);

// y - F
StackedVector residual(const Network& net, const ParamVector& theta, const Dataset& data);

// Row-major CSV with a "# n=..,M=..,P=..,t=.." header line.
void write_gram_csv(const Eigen::MatrixXd& g, std::size_t n, std::size_t M, std::size_t P, double t,
                    const std::string& path);

}  // namespace gflow
