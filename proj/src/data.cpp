#include "gflow/data.hpp"

#include "gflow/util.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace gflow {

Graph::Graph(Eigen::MatrixXd adjacency) : adjacency_(std::move(adjacency)) {
  const auto m = adjacency_.rows();
  if (m == 0 || adjacency_.cols() != m) throw std::invalid_argument("graph: adjacency must be square");
  for (Eigen::Index i = 0; i < m; ++i) {
    if (adjacency_(i, i) != 0.0) throw std::invalid_argument("graph: self-edge in adjacency");
    for (Eigen::Index j = 0; j < m; ++j) {
      const double a = adjacency_(i, j);
      if (a != 0.0 && a != 1.0) throw std::invalid_argument("graph: adjacency must be 0/1");
      if (a != adjacency_(j, i)) throw std::invalid_argument("graph: adjacency not symmetric");
    }
  }
  const Eigen::MatrixXd a_hat = augmented();
  degrees_ = a_hat.rowwise().sum();
  const Eigen::VectorXd inv_sqrt = degrees_.array().rsqrt();
  normalized_ = inv_sqrt.asDiagonal() * a_hat * inv_sqrt.asDiagonal();
}

Eigen::MatrixXd Graph::augmented() const {
  return adjacency_ + Eigen::MatrixXd::Identity(adjacency_.rows(), adjacency_.cols());
}

std::vector<std::pair<std::size_t, std::size_t>> Graph::edges() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (Eigen::Index i = 0; i < adjacency_.rows(); ++i)
    for (Eigen::Index j = i + 1; j < adjacency_.cols(); ++j)
      if (adjacency_(i, j) != 0.0) out.emplace_back(i, j);
  return out;
}

void Dataset::validate() const {
  if (inputs.cols() == 0) throw std::invalid_argument("dataset: no examples");
  if (labels.cols() != inputs.cols()) throw std::invalid_argument("dataset: input/label count mismatch");
  if (inputs.rows() == 0 || labels.rows() == 0) throw std::invalid_argument("dataset: zero dimension");
  if (!inputs.allFinite() || !labels.allFinite()) throw std::invalid_argument("dataset: non-finite entry");
}

Dataset gen_synthetic(std::size_t n, std::size_t N, std::size_t M, double radius,
                      double label_std, std::uint64_t seed) {
  if (n == 0 || N == 0 || M == 0) throw std::invalid_argument("gen_synthetic: dimensions must be >= 1");
  if (!(radius > 0.0) || !(label_std > 0.0))
    throw std::invalid_argument("gen_synthetic: radius and label_std must be positive");
  Rng rng(seed);
  Dataset d;
  d.inputs.resize(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(n));
  d.labels.resize(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(n));
  for (Eigen::Index j = 0; j < d.inputs.cols(); ++j) {
    Eigen::VectorXd dir(static_cast<Eigen::Index>(N));
    double norm = 0.0;
    do {
      for (Eigen::Index i = 0; i < dir.size(); ++i) dir(i) = rng.normal();
      norm = dir.norm();
    } while (norm == 0.0);
    const double r = radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(N));
    d.inputs.col(j) = dir * (r / norm);
    for (Eigen::Index i = 0; i < d.labels.rows(); ++i) d.labels(i, j) = label_std * rng.normal();
  }
  return d;
}

Graph knn_graph(const Eigen::MatrixXd& points, std::size_t k) {
  const auto n = static_cast<std::size_t>(points.cols());
  if (k == 0) throw std::invalid_argument("knn_graph: k must be positive");
  if (k >= n) throw std::invalid_argument("knn_graph: k must be smaller than the point count");
  Eigen::MatrixXd adj = Eigen::MatrixXd::Zero(points.cols(), points.cols());
  std::vector<std::size_t> order;
  std::vector<double> dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j)
      dist[j] = (points.col(static_cast<Eigen::Index>(i)) - points.col(static_cast<Eigen::Index>(j))).squaredNorm();
    order.clear();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) order.push_back(j);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });
    for (std::size_t r = 0; r < k; ++r) {
      const auto j = static_cast<Eigen::Index>(order[r]);
      adj(static_cast<Eigen::Index>(i), j) = 1.0;
      adj(j, static_cast<Eigen::Index>(i)) = 1.0;
    }
  }
  return Graph(std::move(adj));
}

Dataset as_graph_example(const Dataset& points, std::shared_ptr<const Graph> graph) {
  points.validate();
  if (!graph || graph->vertex_count() != points.size())
    throw std::invalid_argument("graph example: vertex count must equal the number of points");
  Dataset d;
  // Column-major N x n holds exactly the row-major n x N matrix.
  d.inputs = Eigen::Map<const Eigen::VectorXd>(points.inputs.data(), points.inputs.size());
  d.labels = Eigen::Map<const Eigen::VectorXd>(points.labels.data(), points.labels.size());
  d.graph = std::move(graph);
  return d;
}

std::string format_dataset(const Dataset& data) {
  data.validate();
  std::string out;
  out += std::to_string(data.size()) + "," + std::to_string(data.input_dim()) + "," +
         std::to_string(data.output_dim()) + "\n";
  for (Eigen::Index j = 0; j < data.inputs.cols(); ++j) {
    bool first = true;
    auto put = [&](double v) {
      if (!first) out += ',';
      out += format_double(v);
      first = false;
    };
    for (Eigen::Index i = 0; i < data.inputs.rows(); ++i) put(data.inputs(i, j));
    for (Eigen::Index i = 0; i < data.labels.rows(); ++i) put(data.labels(i, j));
    out += '\n';
  }
  return out;
}

namespace {

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::size_t parse_count(const std::string& s, const char* what) {
  const double v = parse_double(s);
  if (v < 1 || v != std::floor(v)) throw std::invalid_argument(std::string("dataset header: bad ") + what);
  return static_cast<std::size_t>(v);
}

}  // namespace

Dataset parse_dataset(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("dataset: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto head = split_commas(line);
  if (head.size() != 3) throw std::invalid_argument("dataset: header must be n,N,M");
  const std::size_t n = parse_count(head[0], "n");
  const std::size_t N = parse_count(head[1], "N");
  const std::size_t M = parse_count(head[2], "M");
  Dataset d;
  d.inputs.resize(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(n));
  d.labels.resize(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(n));
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (row >= n) throw std::invalid_argument("dataset: more rows than the header's n = " + std::to_string(n));
    const auto cells = split_commas(line);
    if (cells.size() != N + M)
      throw std::invalid_argument("dataset: row " + std::to_string(row + 1) + " has " +
                                  std::to_string(cells.size()) + " values, expected " +
                                  std::to_string(N + M));
    for (std::size_t i = 0; i < N + M; ++i) {
      double v = 0.0;
      try {
        v = parse_double(cells[i]);
      } catch (const std::invalid_argument&) {
        throw std::invalid_argument("dataset: row " + std::to_string(row + 1) + ": bad value '" +
                                    cells[i] + "'");
      }
      if (i < N)
        d.inputs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(row)) = v;
      else
        d.labels(static_cast<Eigen::Index>(i - N), static_cast<Eigen::Index>(row)) = v;
    }
    ++row;
  }
  if (row != n)
    throw std::invalid_argument("dataset: header says " + std::to_string(n) + " rows, found " +
                                std::to_string(row));
  d.validate();
  return d;
}

void save_dataset(const Dataset& data, const std::string& path) { write_file(path, format_dataset(data)); }

Dataset load_dataset(const std::string& path) { return parse_dataset(read_file(path)); }

std::string dataset_digest(const Dataset& data) { return hex_digest(format_dataset(data)); }

void save_graph(const Graph& graph, const std::string& path) {
  std::string out;
  for (auto [i, j] : graph.edges()) out += std::to_string(i) + "," + std::to_string(j) + "\n";
  write_file(path, out);
}

bool has_duplicate_inputs(const Dataset& data) {
  std::set<std::vector<double>> seen;
  for (Eigen::Index j = 0; j < data.inputs.cols(); ++j) {
    std::vector<double> row(data.inputs.col(j).data(), data.inputs.col(j).data() + data.inputs.rows());
    if (!seen.insert(std::move(row)).second) return true;
  }
  return false;
}

}  // namespace gflow
