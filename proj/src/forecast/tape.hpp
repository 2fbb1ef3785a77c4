#pragma once

#include <Eigen/Core>
#include <functional>
#include <vector>

namespace mogaf::forecast {

// Minimal reverse-mode tape over Eigen matrices. Nodes are identified by
// index; backward() runs the recorded closures in reverse order.
class Tape {
public:
  using NodeId = int;

  NodeId leaf(const Eigen::MatrixXd& value) {
    nodes_.push_back({value, Eigen::MatrixXd::Zero(value.rows(), value.cols()), {}});
    return static_cast<NodeId>(nodes_.size() - 1);
  }

  const Eigen::MatrixXd& value(NodeId id) const { return nodes_[id].value; }
  const Eigen::MatrixXd& grad(NodeId id) const { return nodes_[id].grad; }

  NodeId matmul(NodeId a, NodeId b);
  // a * b^T
  NodeId matmul_nt(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  // Broadcast-add a 1 x n row vector to every row of a.
  NodeId add_rowvec(NodeId a, NodeId row);
  NodeId scale(NodeId a, double s);
  // Row-wise multiply by a 1 x n gain vector.
  NodeId mul_rowvec(NodeId a, NodeId row);
  NodeId relu(NodeId a);
  // Elementwise multiply by a constant mask (dropout).
  NodeId mask(NodeId a, const Eigen::MatrixXd& m);
  NodeId softmax_rows(NodeId a);
  // Row-wise standardization (mean 0, var 1 per row), eps inside the sqrt.
  NodeId layernorm_rows(NodeId a, double eps = 1e-5);
  // Reshape m x n to 1 x (m*n), row-major.
  NodeId flatten(NodeId a);
  NodeId slice_cols(NodeId a, int start, int count);
  NodeId concat_cols(const std::vector<NodeId>& parts);
  // Replaces the listed rows of a with the 1 x n row vector node.
  NodeId replace_rows(NodeId a, NodeId row, const std::vector<int>& rows);
  // Sum of squared entries of (a - target), divided by denom. 1x1 output.
  NodeId squared_error(NodeId a, const Eigen::MatrixXd& target, double denom);

  // Seeds the output gradient with 1 and propagates.
  void backward(NodeId output);

private:
  struct Node {
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;
    std::function<void(Tape&)> back;
  };
  std::vector<Node> nodes_;

  NodeId push(Eigen::MatrixXd value, std::function<void(Tape&)> back) {
    Node n;
    n.grad = Eigen::MatrixXd::Zero(value.rows(), value.cols());
    n.value = std::move(value);
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
  }

  friend struct TapeAccess;
  Eigen::MatrixXd& grad_mut(NodeId id) { return nodes_[id].grad; }
};

}  // namespace mogaf::forecast
