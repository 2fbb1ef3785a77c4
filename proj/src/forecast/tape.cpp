#include "forecast/tape.hpp"

#include <cmath>

namespace mogaf::forecast {

Tape::NodeId Tape::matmul(NodeId a, NodeId b) {
  Eigen::MatrixXd v = nodes_[a].value * nodes_[b].value;
  return push(std::move(v), [a, b, out = static_cast<NodeId>(nodes_.size())](Tape& t) {
    const Eigen::MatrixXd& g = t.nodes_[out].grad;
    t.grad_mut(a) += g * t.nodes_[b].value.transpose();
    t.grad_mut(b) += t.nodes_[a].value.transpose() * g;
  });
}

Tape::NodeId Tape::matmul_nt(NodeId a, NodeId b) {
  Eigen::MatrixXd v = nodes_[a].value * nodes_[b].value.transpose();
  return push(std::move(v), [a, b, out = static_cast<NodeId>(nodes_.size())](Tape& t) {
    const Eigen::MatrixXd& g = t.nodes_[out].grad;
    t.grad_mut(a) += g * t.nodes_[b].value;
    t.grad_mut(b) += g.transpose() * t.nodes_[a].value;
  });
}

Tape::NodeId Tape::add(NodeId a, NodeId b) {
  Eigen::MatrixXd v = nodes_[a].value + nodes_[b].value;
  return push(std::move(v), [a, b, out = static_cast<NodeId>(nodes_.size())](Tape& t) {
    t.grad_mut(a) += t.nodes_[out].grad;
    t.grad_mut(b) += t.nodes_[out].grad;
  });
}

Tape::NodeId Tape::sub(NodeId a, NodeId b) {
  Eigen::MatrixXd v = nodes_[a].value - nodes_[b].value;
  return push(std::move(v), [a, b, out = static_cast<NodeId>(nodes_.size())](Tape& t) {
    t.grad_mut(a) += t.nodes_[out].grad;
    t.grad_mut(b) -= t.nodes_[out].grad;
  });
}

Tape::NodeId Tape::add_rowvec(NodeId a, NodeId row) {
  Eigen::MatrixXd v = nodes_[a].value.rowwise() +
                      Eigen::RowVectorXd(nodes_[row].value.row(0));
  return push(std::move(v), [a, row, out = static_cast<NodeId>(nodes_.size())](Tape& t) {
    const Eigen::MatrixXd& g = t.nodes_[out].grad;
    t.grad_mut(a) += g;
    t.grad_mut(row).row(0) += g.colwise().sum();
  });
}

Tape::NodeId Tape::scale(NodeId a, double s) {
  Eigen::MatrixXd v = nodes_[a].value * s;
  return push(std::move(v), [a, s, out = static_cast<NodeId>(nodes_.size())](Tape& t) {
    t.grad_mut(a) += s * t.nodes_[out].grad;
  });
}

Tape::NodeId Tape::mul_rowvec(NodeId a, NodeId row) {
  const Eigen::RowVectorXd r = nodes_[row].value.row(0);
  Eigen::MatrixXd v = nodes_[a].value.array().rowwise() * r.array();
  return push(std::move(v), [a, row, out = static_cast<NodeId>(nodes_.size())](Tape& t) {
    const Eigen::MatrixXd& g = t.nodes_[out].grad;
    const Eigen::RowVectorXd rv = t.nodes_[row].value.row(0);
    t.grad_mut(a) += (g.array().rowwise() * rv.array()).matrix();
    t.grad_mut(row).row(0) +=
        (g.array() * t.nodes_[a].value.array()).colwise().sum().matrix();
  });
}

Tape::NodeId Tape::relu(NodeId a) {
  Eigen::MatrixXd v = nodes_[a].value.cwiseMax(0.0);
  return push(std::move(v), [a, out = static_cast<NodeId>(nodes_.size())](Tape& t) {
    const Eigen::MatrixXd keep =
        (t.nodes_[a].value.array() > 0.0).cast<double>();
    t.grad_mut(a) += (t.nodes_[out].grad.array() * keep.array()).matrix();
  });
}

Tape::NodeId Tape::mask(NodeId a, const Eigen::MatrixXd& m) {
  Eigen::MatrixXd v = nodes_[a].value.cwiseProduct(m);
  return push(std::move(v), [a, m, out = static_cast<NodeId>(nodes_.size())](Tape& t) {
    t.grad_mut(a) += t.nodes_[out].grad.cwiseProduct(m);
  });
}

Tape::NodeId Tape::softmax_rows(NodeId a) {
  const Eigen::MatrixXd& x = nodes_[a].value;
  Eigen::MatrixXd v(x.rows(), x.cols());
  for (int i = 0; i < x.rows(); ++i) {
    const double m = x.row(i).maxCoeff();
    const Eigen::ArrayXd e = (x.row(i).array() - m).exp();
    v.row(i) = (e / e.sum()).matrix().transpose();
  }
  return push(std::move(v), [a, out = static_cast<NodeId>(nodes_.size())](Tape& t) {
    const Eigen::MatrixXd& s = t.nodes_[out].value;
    const Eigen::MatrixXd& g = t.nodes_[out].grad;
    Eigen::MatrixXd& ga = t.grad_mut(a);
    for (int i = 0; i < s.rows(); ++i) {
      const double dot = s.row(i).dot(g.row(i));
      ga.row(i) += (s.row(i).array() * (g.row(i).array() - dot)).matrix();
    }
  });
}

Tape::NodeId Tape::layernorm_rows(NodeId a, double eps) {
  const Eigen::MatrixXd& x = nodes_[a].value;
  const int n = static_cast<int>(x.cols());
  Eigen::MatrixXd v(x.rows(), n);
  Eigen::VectorXd inv_std(x.rows());
  for (int i = 0; i < x.rows(); ++i) {
    const double mean = x.row(i).mean();
    const double var = (x.row(i).array() - mean).square().mean();
    inv_std(i) = 1.0 / std::sqrt(var + eps);
    v.row(i) = ((x.row(i).array() - mean) * inv_std(i)).matrix();
  }
  return push(std::move(v), [a, inv_std, n,
                             out = static_cast<NodeId>(nodes_.size())](Tape& t) {
    const Eigen::MatrixXd& y = t.nodes_[out].value;  // normalized rows
    const Eigen::MatrixXd& g = t.nodes_[out].grad;
    Eigen::MatrixXd& ga = t.grad_mut(a);
    for (int i = 0; i < y.rows(); ++i) {
      const double gsum = g.row(i).sum();
      const double gysum = g.row(i).dot(y.row(i));
      ga.row(i) += (inv_std(i) / n) *
                   (n * g.row(i).array() - gsum - y.row(i).array() * gysum)
                       .matrix();
    }
  });
}

Tape::NodeId Tape::flatten(NodeId a) {
  const Eigen::MatrixXd& x = nodes_[a].value;
  Eigen::MatrixXd v(1, x.size());
  int idx = 0;
  for (int i = 0; i < x.rows(); ++i) {
    for (int j = 0; j < x.cols(); ++j) v(0, idx++) = x(i, j);
  }
  return push(std::move(v), [a, rows = x.rows(), cols = x.cols(),
                             out = static_cast<NodeId>(nodes_.size())](Tape& t) {
    const Eigen::MatrixXd& g = t.nodes_[out].grad;
    Eigen::MatrixXd& ga = t.grad_mut(a);
    int idx = 0;
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < cols; ++j) ga(i, j) += g(0, idx++);
    }
  });
}

Tape::NodeId Tape::slice_cols(NodeId a, int start, int count) {
  Eigen::MatrixXd v = nodes_[a].value.middleCols(start, count);
  return push(std::move(v), [a, start, count,
                             out = static_cast<NodeId>(nodes_.size())](Tape& t) {
    t.grad_mut(a).middleCols(start, count) += t.nodes_[out].grad;
  });
}

Tape::NodeId Tape::concat_cols(const std::vector<NodeId>& parts) {
  const Eigen::Index rows = nodes_[parts.front()].value.rows();
  Eigen::Index cols = 0;
  for (NodeId p : parts) cols += nodes_[p].value.cols();
  Eigen::MatrixXd v(rows, cols);
  Eigen::Index off = 0;
  for (NodeId p : parts) {
    const Eigen::MatrixXd& x = nodes_[p].value;
    v.middleCols(off, x.cols()) = x;
    off += x.cols();
  }
  return push(std::move(v), [parts, out = static_cast<NodeId>(nodes_.size())](Tape& t) {
    const Eigen::MatrixXd& g = t.nodes_[out].grad;
    Eigen::Index off = 0;
    for (NodeId p : parts) {
      const Eigen::Index c = t.nodes_[p].value.cols();
      t.grad_mut(p) += g.middleCols(off, c);
      off += c;
    }
  });
}

Tape::NodeId Tape::replace_rows(NodeId a, NodeId row,
                                const std::vector<int>& rows) {
  Eigen::MatrixXd v = nodes_[a].value;
  for (int i : rows) v.row(i) = nodes_[row].value.row(0);
  return push(std::move(v), [a, row, rows,
                             out = static_cast<NodeId>(nodes_.size())](Tape& t) {
    const Eigen::MatrixXd& g = t.nodes_[out].grad;
    Eigen::MatrixXd ga = g;
    for (int i : rows) {
      t.grad_mut(row).row(0) += g.row(i);
      ga.row(i).setZero();
    }
    t.grad_mut(a) += ga;
  });
}

Tape::NodeId Tape::squared_error(NodeId a, const Eigen::MatrixXd& target,
                                 double denom) {
  const Eigen::MatrixXd diff = nodes_[a].value - target;
  Eigen::MatrixXd v(1, 1);
  v(0, 0) = diff.squaredNorm() / denom;
  return push(std::move(v), [a, target, denom,
                             out = static_cast<NodeId>(nodes_.size())](Tape& t) {
    const double g = t.nodes_[out].grad(0, 0);
    t.grad_mut(a) += (2.0 * g / denom) * (t.nodes_[a].value - target);
  });
}

void Tape::backward(NodeId output) {
  nodes_[output].grad.setConstant(1.0);
  for (int i = output; i >= 0; --i) {
    if (nodes_[i].back) nodes_[i].back(*this);
  }
}

}  // namespace mogaf::forecast
