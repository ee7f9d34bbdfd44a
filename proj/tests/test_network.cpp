#include "gflow/network.hpp"
#include "gflow/util.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace gflow;

namespace {

std::shared_ptr<const Graph> ring(std::size_t m) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < m; ++i) {
    const auto j = (i + 1) % m;
    a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 1.0;
    a(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = 1.0;
  }
  return std::make_shared<const Graph>(a);
}

Eigen::MatrixXd fd_jacobian(const Network& net, const ParamVector& theta, const Eigen::VectorXd& x, double h) {
  Eigen::MatrixXd jac(theta.size(), static_cast<Eigen::Index>(net.output_size()));
  ParamVector probe = theta;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    probe(i) = theta(i) + h;
    const Eigen::VectorXd up = net.forward(probe, x);
    probe(i) = theta(i) - h;
    const Eigen::VectorXd down = net.forward(probe, x);
    probe(i) = theta(i);
    jac.row(i) = ((up - down) / (2.0 * h)).transpose();
  }
  return jac;
}

double rel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

}  // namespace

TEST_CASE("parameter counts") {
  const auto leaky = builtin("leaky_relu");
  CHECK(Network::build(dense_chain({2, 3, 1}), leaky).param_count() == 13);
  CHECK(Network::build(residual_chain(4, 2), leaky).param_count() == 40);
  CHECK(Network::build(dense_chain({500, 50, 50, 50}), leaky).param_count() == 30150);
  // residual, dims 100, 8..16 layers
  CHECK(Network::build(residual_chain(100, 8), leaky).param_count() == 8 * 10100);
  CHECK(Network::build(residual_chain(100, 16), leaky).param_count() == 16 * 10100);
  CHECK(Network::build(dense_chain({1, 1}, false), leaky).param_count() == 1);
}

TEST_CASE("parameter counts match the layer formulas on random shapes") {
  Rng rng(5);
  const auto leaky = builtin("leaky_relu");
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::size_t> widths;
    const int depth = 2 + static_cast<int>(rng.uniform() * 4);
    for (int i = 0; i < depth; ++i) widths.push_back(1 + static_cast<std::size_t>(rng.uniform() * 9));
    std::size_t expect = 0;
    for (std::size_t i = 1; i < widths.size(); ++i) expect += widths[i] * (widths[i - 1] + 1);
    CHECK(Network::build(dense_chain(widths), leaky).param_count() == expect);

    const std::size_t m = 3 + static_cast<std::size_t>(rng.uniform() * 5);
    std::size_t gexpect = 0;
    for (std::size_t i = 1; i < widths.size(); ++i) gexpect += widths[i] * widths[i - 1] + m * widths[i];
    CHECK(Network::build(gcn_chain(widths, ring(m)), leaky).param_count() == gexpect);

    const std::size_t w = widths[0];
    const auto L = static_cast<std::size_t>(depth);
    CHECK(Network::build(residual_chain(w, L), leaky).param_count() == L * (w * w + w));
  }
}

TEST_CASE("build validation") {
  const auto leaky = builtin("leaky_relu");
  CHECK_THROWS(Network::build({}, leaky));
  CHECK_THROWS(Network::build(dense_chain({2, 0, 1}), leaky));
  CHECK_THROWS(Network::build({LayerSpec{LayerKind::dense, 2, 3}, LayerSpec{LayerKind::dense, 4, 1}}, leaky));
  CHECK_THROWS(Network::build({LayerSpec{LayerKind::residual, 2, 3}}, leaky));
  CHECK_THROWS(Network::build({LayerSpec{LayerKind::residual, 2, 2, false}}, leaky));
  CHECK_THROWS(Network::build({LayerSpec{LayerKind::gcn, 2, 2}}, leaky));
  CHECK_THROWS(Network::build({LayerSpec{LayerKind::dense, 2, 2, true, ring(3)}}, leaky));
  CHECK_THROWS(layer_kind_from_string("conv"));
  CHECK(layer_kind_from_string("gcn") == LayerKind::gcn);
}

TEST_CASE("forward examples") {
  {
    const auto net = Network::build({LayerSpec{LayerKind::dense, 1, 1}}, builtin("identity"));
    ParamVector theta(2);
    theta << 2.0, 1.0;  // W, B
    CHECK(net.forward(theta, Eigen::VectorXd::Constant(1, 3.0))(0) == 7.0);
  }
  {
    // all weights zero: output is the last bias regardless of sigma(b1)
    const auto net = Network::build(dense_chain({2, 2, 1}), builtin("leaky_relu"));
    ParamVector theta = ParamVector::Zero(static_cast<Eigen::Index>(net.param_count()));
    const auto& lay = net.layout();
    theta(static_cast<Eigen::Index>(lay[0].bias_offset)) = -3.0;
    theta(static_cast<Eigen::Index>(lay[0].bias_offset + 1)) = 2.0;
    theta(static_cast<Eigen::Index>(lay[1].bias_offset)) = 0.625;
    CHECK(net.forward(theta, Eigen::Vector2d(1.0, -4.0))(0) == 0.625);
  }
  {
    const auto net = Network::build(residual_chain(3, 1), builtin("leaky_relu"));
    const ParamVector theta = ParamVector::Zero(static_cast<Eigen::Index>(net.param_count()));
    const Eigen::Vector3d x(0.5, -2.0, 7.0);
    CHECK(net.forward(theta, x) == x);
  }
  {
    // hand-evaluated two-layer leaky net
    const auto net = Network::build(dense_chain({2, 2, 1}), builtin("leaky_relu", std::vector{0.1}));
    ParamVector theta(9);
    // W1 = [[1, 2], [-1, 1]], b1 = [0, -1], W2 = [[3, -2]], b2 = [0.5]
    theta << 1, 2, -1, 1, 0, -1, 3, -2, 0.5;
    // x = (1, 1): z1 = (3, -1), a1 = (3, -0.1), out = 9 + 0.2 + 0.5
    CHECK(net.forward(theta, Eigen::Vector2d(1.0, 1.0))(0) == doctest::Approx(9.7).epsilon(1e-15));
  }
}

TEST_CASE("gcn layer matches the matrix formula") {
  const auto g = ring(4);
  const auto net = Network::build({LayerSpec{LayerKind::gcn, 2, 3, true, g}}, builtin("identity"));
  Rng rng(2);
  ParamVector theta(static_cast<Eigen::Index>(net.param_count()));
  for (Eigen::Index i = 0; i < theta.size(); ++i) theta(i) = rng.normal();
  Eigen::MatrixXd X(4, 2);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = rng.normal();
  // row-major packing of X, W, B
  Eigen::VectorXd x(8);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 2; ++c) x(r * 2 + c) = X(r, c);
  Eigen::MatrixXd W(2, 3), B(4, 3);
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 3; ++c) W(r, c) = theta(r * 3 + c);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 3; ++c) B(r, c) = theta(6 + r * 3 + c);
  const Eigen::MatrixXd Y = g->normalized() * X * W + B;
  const Eigen::VectorXd y = net.forward(theta, x);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 3; ++c) CHECK(y(r * 3 + c) == doctest::Approx(Y(r, c)).epsilon(1e-14));
}

TEST_CASE("jacobian examples") {
  const auto lin = Network::build(dense_chain({1, 1}, false), builtin("identity"));
  CHECK(lin.param_jacobian(ParamVector::Constant(1, 0.7), Eigen::VectorXd::Constant(1, 2.0))(0, 0) == 2.0);
  const auto aff = Network::build(dense_chain({1, 1}), builtin("identity"));
  const Eigen::MatrixXd j = aff.param_jacobian(ParamVector::Constant(2, 0.7), Eigen::VectorXd::Constant(1, 3.0));
  CHECK(j(0, 0) == 3.0);
  CHECK(j(1, 0) == 1.0);
}

TEST_CASE("jacobian agrees with finite differences") {
  const auto g = ring(5);
  struct Case {
    Network net;
    std::size_t in;
  };
  std::vector<Case> cases{
      {Network::build(dense_chain({3, 5, 2}), builtin("leaky_relu", std::vector{0.3})), 3},
      {Network::build(dense_chain({3, 4, 4, 2}), builtin("sigmoid")), 3},
      {Network::build(residual_chain(3, 3), builtin("abs_shift", std::vector{0.1})), 3},
      {Network::build(gcn_chain({2, 3, 2}, g), builtin("leaky_relu", std::vector{0.3})), 10},
      {Network::build(dense_chain({2, 6, 1}), approximate_sigmoid(7)), 2},
  };
  Rng rng(9);
  for (const auto& c : cases) {
    for (int trial = 0; trial < 10; ++trial) {
      ParamVector theta(static_cast<Eigen::Index>(c.net.param_count()));
      for (Eigen::Index i = 0; i < theta.size(); ++i) theta(i) = rng.normal();
      Eigen::VectorXd x(static_cast<Eigen::Index>(c.in));
      for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.normal();
      CHECK(rel(c.net.param_jacobian(theta, x), fd_jacobian(c.net, theta, x, 1e-6)) < 1e-5);
    }
  }
}

TEST_CASE("loss and gradient") {
  const auto lin = Network::build(dense_chain({1, 1}, false), builtin("identity"));
  Dataset one{Eigen::MatrixXd::Constant(1, 1, 2.0), Eigen::MatrixXd::Constant(1, 1, 6.0), nullptr};
  CHECK(loss_gradient(lin, ParamVector::Constant(1, 1.0), one)(0) == -8.0);
  // f = 3, y = 1
  CHECK(loss(lin, ParamVector::Constant(1, 1.5), one) == doctest::Approx(0.5 * 9.0));
  Dataset tri{Eigen::MatrixXd::Constant(1, 1, 2.0), Eigen::MatrixXd::Constant(1, 1, 1.0), nullptr};
  CHECK(loss(lin, ParamVector::Constant(1, 1.5), tri) == 2.0);

  // residual norms 1 and 2
  Dataset two{Eigen::MatrixXd::Constant(1, 2, 1.0), Eigen::MatrixXd(1, 2), nullptr};
  two.labels << 0.0, 3.0;
  CHECK(loss(lin, ParamVector::Constant(1, 1.0), two) == 2.5);

  // perfect fit
  const auto net = Network::build(dense_chain({3, 4, 2}), builtin("leaky_relu"));
  const ParamVector theta = init_params(net, 4);
  Dataset fit = gen_synthetic(5, 3, 2, 1.0, 1.0, 4);
  for (Eigen::Index j = 0; j < fit.inputs.cols(); ++j) fit.labels.col(j) = net.forward(theta, fit.inputs.col(j));
  CHECK(loss(net, theta, fit) == 0.0);
  CHECK(loss_gradient(net, theta, fit).isZero(0.0));
}

TEST_CASE("init_params") {
  const auto net = Network::build(dense_chain({2, 3, 1}), builtin("leaky_relu"));
  const ParamVector a = init_params(net, 17);
  const ParamVector b = init_params(net, 17);
  CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * 13) == 0);
  CHECK((a - init_params(net, 18)).norm() > 0.0);

  const double gain = kaiming_gain(net.activation());
  const auto& l0 = net.layout()[0];
  for (std::size_t k = 0; k < l0.weight_count; ++k)
    CHECK(std::abs(a(static_cast<Eigen::Index>(l0.weight_offset + k))) <= std::sqrt(6.0 / 2.0) * gain);
  for (std::size_t k = 0; k < l0.bias_count; ++k)
    CHECK(std::abs(a(static_cast<Eigen::Index>(l0.bias_offset + k))) <= 1.0 / std::sqrt(2.0));

  // mean of 10^4 weights within three standard errors of zero
  const auto wide = Network::build(dense_chain({100, 100}, false), builtin("leaky_relu"));
  const ParamVector w = init_params(wide, 3);
  const double bound = std::sqrt(6.0 / 100.0) * kaiming_gain(wide.activation());
  const double se = bound / std::sqrt(3.0) / std::sqrt(static_cast<double>(w.size()));
  CHECK(std::abs(w.mean()) < 3.0 * se);
}

TEST_CASE("non-finite intermediate names the layer") {
  const auto net = Network::build(dense_chain({1, 2, 1}), builtin("leaky_relu"));
  ParamVector theta = ParamVector::Constant(static_cast<Eigen::Index>(net.param_count()), 1e200);
  try {
    net.forward(theta, Eigen::VectorXd::Constant(1, 1e200));
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("layer 1") != std::string::npos);
  }
}

TEST_CASE("dimension checks") {
  const auto net = Network::build(dense_chain({3, 2}), builtin("leaky_relu"));
  CHECK_THROWS(net.forward(ParamVector::Zero(3), Eigen::VectorXd::Zero(3)));
  CHECK_THROWS(net.forward(ParamVector::Zero(8), Eigen::VectorXd::Zero(2)));
  Dataset bad = gen_synthetic(4, 2, 2, 1.0, 1.0, 0);
  CHECK_THROWS(net.check_dataset(bad));
}
