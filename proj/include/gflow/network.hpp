#pragma once

#include "gflow/activation.hpp"
#include "gflow/data.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <string_view>
#include <vector>

namespace gflow {

enum class LayerKind { dense, residual, gcn };

std::string_view to_string(LayerKind k);
LayerKind layer_kind_from_string(std::string_view s);

// One polynomial layer.
//   dense:    y = W x + b            W: out x in
//   residual: y = x + W x + b        W: in x in
//   gcn:      Y = S X W + B          S: normalized adjacency (m x m),
//                                    X: m x in, W: in x out, B: m x out
// gcn inputs and outputs are the row-major flattening of their matrices.
struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  std::size_t in_width = 0;
  std::size_t out_width = 0;
  bool bias = true;
  std::shared_ptr<const Graph> graph;

  std::size_t rows() const { return kind == LayerKind::gcn && graph ? graph->vertex_count() : 1; }
  std::size_t flat_in() const { return rows() * in_width; }
  std::size_t flat_out() const { return rows() * out_width; }
  std::size_t weight_count() const { return in_width * out_width; }
  std::size_t bias_count() const { return bias ? rows() * out_width : 0; }
};

// Offsets of one layer's parameters in the flat vector. Weights come first
// (row-major), then the bias.
struct ParamBlock {
  std::size_t weight_offset = 0;
  std::size_t weight_count = 0;
  std::size_t bias_offset = 0;
  std::size_t bias_count = 0;
};

using ParamVector = Eigen::VectorXd;

// g_L o sigma o ... o sigma o g_1. The activation follows every layer except
// the last.
class Network {
 public:
  // Per-example intermediate values. inputs[i] feeds layer i; pre[i] is the
  // output of layer i before the activation.
  struct Tape {
    std::vector<Eigen::VectorXd> inputs;
    std::vector<Eigen::VectorXd> pre;
  };

  static Network build(std::vector<LayerSpec> layers, Activation activation);

  std::size_t param_count() const { return param_count_; }
  std::size_t input_size() const { return layers_.front().flat_in(); }
  std::size_t output_size() const { return layers_.back().flat_out(); }
  std::size_t depth() const { return layers_.size(); }
  const std::vector<LayerSpec>& layers() const { return layers_; }
  const std::vector<ParamBlock>& layout() const { return layout_; }
  const Activation& activation() const { return activation_; }
  // Number of activated pre-activation entries per example.
  std::size_t hidden_units() const;

  Eigen::VectorXd forward(const ParamVector& theta, const Eigen::Ref<const Eigen::VectorXd>& x) const;
  Eigen::VectorXd forward(const ParamVector& theta, const Eigen::Ref<const Eigen::VectorXd>& x,
                          Tape& tape) const;

  // grad += J^T-weighted seed, i.e. sum_k seed_k * d f_k / d theta, for the
  // example recorded in tape.
  void backward(const ParamVector& theta, const Tape& tape,
                const Eigen::Ref<const Eigen::VectorXd>& seed, Eigen::Ref<Eigen::VectorXd> grad) const;

  // P x M matrix whose column k is d f_k(x, theta) / d theta.
  Eigen::MatrixXd param_jacobian(const ParamVector& theta, const Eigen::Ref<const Eigen::VectorXd>& x) const;

  // Piece index of every activated pre-activation, appended to out.
  void piece_pattern(const ParamVector& theta, const Eigen::Ref<const Eigen::VectorXd>& x,
                     std::vector<int>& out) const;

  void check_params(const ParamVector& theta) const;
  void check_dataset(const Dataset& data) const;

 private:
  Network(std::vector<LayerSpec> layers, Activation activation);

  std::vector<LayerSpec> layers_;
  Activation activation_;
  std::vector<ParamBlock> layout_;
  std::size_t param_count_ = 0;
};

// Kaiming-uniform: weights on +-sqrt(6 / fan_in) * gain, biases on
// +-1 / sqrt(fan_in), drawn in flat-vector order.
ParamVector init_params(const Network& net, std::uint64_t seed);

// 1/2 sum_j ||f(X_j) - y_j||^2
double loss(const Network& net, const ParamVector& theta, const Dataset& data);

// sum_j J_j (f(X_j) - y_j), summed in example order.
ParamVector loss_gradient(const Network& net, const ParamVector& theta, const Dataset& data);

// Convenience constructors used by configs and tests.
std::vector<LayerSpec> dense_chain(const std::vector<std::size_t>& widths, bool bias = true);
std::vector<LayerSpec> residual_chain(std::size_t width, std::size_t depth);
std::vector<LayerSpec> gcn_chain(const std::vector<std::size_t>& widths, std::shared_ptr<const Graph> graph);

}  // namespace gflow
