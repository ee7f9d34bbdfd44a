#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace gflow {

// Undirected graph over m vertices with a self-loop-augmented normalization
// cached at construction.
class Graph {
 public:
  // adjacency must be square, symmetric, 0/1 valued with a zero diagonal.
  explicit Graph(Eigen::MatrixXd adjacency);

  std::size_t vertex_count() const { return static_cast<std::size_t>(adjacency_.rows()); }
  const Eigen::MatrixXd& adjacency() const { return adjacency_; }
  // A + I
  Eigen::MatrixXd augmented() const;
  // Row sums of A + I; every entry is >= 1.
  const Eigen::VectorXd& degrees() const { return degrees_; }
  // D^{-1/2} (A + I) D^{-1/2}
  const Eigen::MatrixXd& normalized() const { return normalized_; }

  std::vector<std::pair<std::size_t, std::size_t>> edges() const;

 private:
  Eigen::MatrixXd adjacency_;
  Eigen::VectorXd degrees_;
  Eigen::MatrixXd normalized_;
};

// n examples stored column-wise: inputs is N x n, labels is M x n.
struct Dataset {
  Eigen::MatrixXd inputs;
  Eigen::MatrixXd labels;
  std::shared_ptr<const Graph> graph;

  std::size_t size() const { return static_cast<std::size_t>(inputs.cols()); }
  std::size_t input_dim() const { return static_cast<std::size_t>(inputs.rows()); }
  std::size_t output_dim() const { return static_cast<std::size_t>(labels.rows()); }

  // Throws on n == 0, mismatched example counts or non-finite entries.
  void validate() const;
};

// Inputs uniform on the radius ball of R^N (Gaussian direction, U^{1/N}
// radius); labels i.i.d. N(0, label_std^2).
Dataset gen_synthetic(std::size_t n, std::size_t N, std::size_t M, double radius,
                      double label_std, std::uint64_t seed);

// Symmetrized k-nearest-neighbour graph over the columns of points. Ties go to
// the lower index.
Graph knn_graph(const Eigen::MatrixXd& points, std::size_t k);

// Packs an n-point dataset into a single graph example: the n x N input matrix
// and n x M label matrix flattened row-major, with the graph attached.
Dataset as_graph_example(const Dataset& points, std::shared_ptr<const Graph> graph);

// CSV: first line "n,N,M", then n rows of N + M values.
std::string format_dataset(const Dataset& data);
Dataset parse_dataset(const std::string& text);
void save_dataset(const Dataset& data, const std::string& path);
Dataset load_dataset(const std::string& path);
std::string dataset_digest(const Dataset& data);

// Edge list "i,j" per line, i < j.
void save_graph(const Graph& graph, const std::string& path);

// True if two examples share the same input vector.
bool has_duplicate_inputs(const Dataset& data);

}  // namespace gflow
