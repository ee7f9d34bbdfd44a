#include "gflow/network.hpp"

#include "gflow/kernels.hpp"
#include "gflow/util.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace gflow {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstRowMap = Eigen::Map<const RowMajor>;
using RowMap = Eigen::Map<RowMajor>;

void apply_layer(const LayerSpec& layer, const ParamBlock& block, const double* theta,
                 const Eigen::VectorXd& in, Eigen::VectorXd& out) {
  const auto n_in = static_cast<Eigen::Index>(layer.in_width);
  const auto n_out = static_cast<Eigen::Index>(layer.out_width);
  switch (layer.kind) {
    case LayerKind::dense:
    case LayerKind::residual: {
      ConstRowMap w(theta + block.weight_offset, n_out, n_in);
      out.noalias() = w * in;
      if (layer.kind == LayerKind::residual) out += in;
      if (block.bias_count > 0)
        out += Eigen::Map<const Eigen::VectorXd>(theta + block.bias_offset, n_out);
      break;
    }
    case LayerKind::gcn: {
      const auto m = static_cast<Eigen::Index>(layer.rows());
      ConstRowMap x(in.data(), m, n_in);
      ConstRowMap w(theta + block.weight_offset, n_in, n_out);
      out.resize(m * n_out);
      RowMap y(out.data(), m, n_out);
      y.noalias() = (layer.graph->normalized() * x) * w;
      if (block.bias_count > 0) y += ConstRowMap(theta + block.bias_offset, m, n_out);
      break;
    }
  }
}

}  // namespace

std::string_view to_string(LayerKind k) {
  switch (k) {
    case LayerKind::dense: return "dense";
    case LayerKind::residual: return "residual";
    case LayerKind::gcn: return "gcn";
  }
  return "?";
}

LayerKind layer_kind_from_string(std::string_view s) {
  if (s == "dense") return LayerKind::dense;
  if (s == "residual") return LayerKind::residual;
  if (s == "gcn") return LayerKind::gcn;
  throw std::invalid_argument("unknown layer kind: " + std::string(s));
}

Network::Network(std::vector<LayerSpec> layers, Activation activation)
    : layers_(std::move(layers)), activation_(std::move(activation)) {}

Network Network::build(std::vector<LayerSpec> layers, Activation activation) {
  if (layers.empty()) throw std::invalid_argument("network: need at least one layer");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    const std::string where = "network layer " + std::to_string(i + 1) + ": ";
    if (l.in_width == 0 || l.out_width == 0) throw std::invalid_argument(where + "zero width");
    if (l.kind == LayerKind::residual && l.in_width != l.out_width)
      throw std::invalid_argument(where + "residual layer needs in_width == out_width");
    if (l.kind == LayerKind::gcn && !l.graph) throw std::invalid_argument(where + "gcn layer without a graph");
    if (l.kind != LayerKind::gcn && l.graph) throw std::invalid_argument(where + "graph given to a non-gcn layer");
    if (l.kind != LayerKind::dense && !l.bias)
      throw std::invalid_argument(where + "only dense layers may drop the bias");
    if (i > 0 && layers[i - 1].flat_out() != l.flat_in())
      throw std::invalid_argument(where + "input size " + std::to_string(l.flat_in()) +
                                  " does not match previous output size " +
                                  std::to_string(layers[i - 1].flat_out()));
  }
  Network net(std::move(layers), std::move(activation));
  std::size_t offset = 0;
  for (const auto& l : net.layers_) {
    ParamBlock b;
    b.weight_offset = offset;
    b.weight_count = l.weight_count();
    offset += b.weight_count;
    b.bias_offset = offset;
    b.bias_count = l.bias_count();
    offset += b.bias_count;
    net.layout_.push_back(b);
  }
  net.param_count_ = offset;
  return net;
}

std::size_t Network::hidden_units() const {
  std::size_t h = 0;
  for (std::size_t i = 0; i + 1 < layers_.size(); ++i) h += layers_[i].flat_out();
  return h;
}

void Network::check_params(const ParamVector& theta) const {
  if (static_cast<std::size_t>(theta.size()) != param_count_)
    throw std::invalid_argument("parameter vector has length " + std::to_string(theta.size()) +
                                ", network needs " + std::to_string(param_count_));
}

void Network::check_dataset(const Dataset& data) const {
  data.validate();
  if (data.input_dim() != input_size())
    throw std::invalid_argument("dataset input dimension " + std::to_string(data.input_dim()) +
                                " does not match network input " + std::to_string(input_size()));
  if (data.output_dim() != output_size())
    throw std::invalid_argument("dataset label dimension " + std::to_string(data.output_dim()) +
                                " does not match network output " + std::to_string(output_size()));
}

Eigen::VectorXd Network::forward(const ParamVector& theta, const Eigen::Ref<const Eigen::VectorXd>& x) const {
  Tape tape;
  return forward(theta, x, tape);
}

Eigen::VectorXd Network::forward(const ParamVector& theta, const Eigen::Ref<const Eigen::VectorXd>& x,
                                 Tape& tape) const {
  check_params(theta);
  if (static_cast<std::size_t>(x.size()) != input_size())
    throw std::invalid_argument("input has size " + std::to_string(x.size()) + ", network expects " +
                                std::to_string(input_size()));
  const std::size_t L = layers_.size();
  tape.inputs.resize(L);
  tape.pre.resize(L);
  tape.inputs[0] = x;
  for (std::size_t i = 0; i < L; ++i) {
    apply_layer(layers_[i], layout_[i], theta.data(), tape.inputs[i], tape.pre[i]);
    if (!tape.pre[i].allFinite())
      throw NumericError("non-finite value in the output of layer " + std::to_string(i + 1));
    if (i + 1 < L) {
      auto& next = tape.inputs[i + 1];
      next.resize(tape.pre[i].size());
      for (Eigen::Index k = 0; k < next.size(); ++k) next(k) = activation_.eval(tape.pre[i](k));
    }
  }
  return tape.pre[L - 1];
}

void Network::backward(const ParamVector& theta, const Tape& tape,
                       const Eigen::Ref<const Eigen::VectorXd>& seed, Eigen::Ref<Eigen::VectorXd> grad) const {
  const double* th = theta.data();
  double* g = grad.data();
  Eigen::VectorXd delta = seed;
  Eigen::VectorXd delta_in;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const auto& layer = layers_[i];
    const auto& block = layout_[i];
    const auto n_in = static_cast<Eigen::Index>(layer.in_width);
    const auto n_out = static_cast<Eigen::Index>(layer.out_width);
    const Eigen::VectorXd& in = tape.inputs[i];
    switch (layer.kind) {
      case LayerKind::dense:
      case LayerKind::residual: {
        RowMap gw(g + block.weight_offset, n_out, n_in);
        gw.noalias() += delta * in.transpose();
        if (block.bias_count > 0) Eigen::Map<Eigen::VectorXd>(g + block.bias_offset, n_out) += delta;
        if (i > 0) {
          ConstRowMap w(th + block.weight_offset, n_out, n_in);
          delta_in.noalias() = w.transpose() * delta;
          if (layer.kind == LayerKind::residual) delta_in += delta;
        }
        break;
      }
      case LayerKind::gcn: {
        const auto m = static_cast<Eigen::Index>(layer.rows());
        const Eigen::MatrixXd& s = layer.graph->normalized();
        ConstRowMap x(in.data(), m, n_in);
        ConstRowMap d(delta.data(), m, n_out);
        RowMap gw(g + block.weight_offset, n_in, n_out);
        gw.noalias() += (s * x).transpose() * d;
        if (block.bias_count > 0) RowMap(g + block.bias_offset, m, n_out) += d;
        if (i > 0) {
          ConstRowMap w(th + block.weight_offset, n_in, n_out);
          delta_in.resize(m * n_in);
          // S is symmetric, so S^T dY W^T = S dY W^T.
          RowMap(delta_in.data(), m, n_in).noalias() = s * (d * w.transpose());
        }
        break;
      }
    }
    if (i > 0) {
      const Eigen::VectorXd& z = tape.pre[i - 1];
      for (Eigen::Index k = 0; k < delta_in.size(); ++k) delta_in(k) *= activation_.deriv(z(k));
      delta.swap(delta_in);
    }
  }
}

Eigen::MatrixXd Network::param_jacobian(const ParamVector& theta, const Eigen::Ref<const Eigen::VectorXd>& x) const {
  Tape tape;
  forward(theta, x, tape);
  const auto P = static_cast<Eigen::Index>(param_count_);
  const auto M = static_cast<Eigen::Index>(output_size());
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(P, M);
  Eigen::VectorXd seed = Eigen::VectorXd::Zero(M);
  for (Eigen::Index k = 0; k < M; ++k) {
    seed(k) = 1.0;
    backward(theta, tape, seed, jac.col(k));
    seed(k) = 0.0;
  }
  return jac;
}

void Network::piece_pattern(const ParamVector& theta, const Eigen::Ref<const Eigen::VectorXd>& x,
                            std::vector<int>& out) const {
  Tape tape;
  forward(theta, x, tape);
  for (std::size_t i = 0; i + 1 < layers_.size(); ++i)
    for (Eigen::Index k = 0; k < tape.pre[i].size(); ++k) out.push_back(activation_.piece_index(tape.pre[i](k)));
}

ParamVector init_params(const Network& net, std::uint64_t seed) {
  Rng rng(seed);
  ParamVector theta(static_cast<Eigen::Index>(net.param_count()));
  const double gain = kaiming_gain(net.activation());
  for (std::size_t i = 0; i < net.depth(); ++i) {
    const auto& layer = net.layers()[i];
    const auto& block = net.layout()[i];
    const double fan_in = static_cast<double>(layer.in_width);
    const double w_bound = std::sqrt(6.0 / fan_in) * gain;
    const double b_bound = 1.0 / std::sqrt(fan_in);
    for (std::size_t k = 0; k < block.weight_count; ++k)
      theta(static_cast<Eigen::Index>(block.weight_offset + k)) = rng.uniform(-w_bound, w_bound);
    for (std::size_t k = 0; k < block.bias_count; ++k)
      theta(static_cast<Eigen::Index>(block.bias_offset + k)) = rng.uniform(-b_bound, b_bound);
  }
  return theta;
}

double loss(const Network& net, const ParamVector& theta, const Dataset& data) {
  return kernels::loss(net, theta, data, kernels::Exec::parallel);
}

ParamVector loss_gradient(const Network& net, const ParamVector& theta, const Dataset& data) {
  return kernels::loss_gradient(net, theta, data, kernels::Exec::parallel);
}

std::vector<LayerSpec> dense_chain(const std::vector<std::size_t>& widths, bool bias) {
  if (widths.size() < 2) throw std::invalid_argument("dense_chain: need input and output widths");
  std::vector<LayerSpec> out;
  for (std::size_t i = 1; i < widths.size(); ++i) out.push_back({LayerKind::dense, widths[i - 1], widths[i], bias, nullptr});
  return out;
}

std::vector<LayerSpec> residual_chain(std::size_t width, std::size_t depth) {
  return std::vector<LayerSpec>(depth, LayerSpec{LayerKind::residual, width, width, true, nullptr});
}

std::vector<LayerSpec> gcn_chain(const std::vector<std::size_t>& widths, std::shared_ptr<const Graph> graph) {
  if (widths.size() < 2) throw std::invalid_argument("gcn_chain: need input and output widths");
  std::vector<LayerSpec> out;
  for (std::size_t i = 1; i < widths.size(); ++i) out.push_back({LayerKind::gcn, widths[i - 1], widths[i], true, graph});
  return out;
}

}  // namespace gflow
