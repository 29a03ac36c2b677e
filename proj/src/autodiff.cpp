#include "svla/autodiff.hpp"

#include <cmath>
#include <stdexcept>

namespace svla {

using Eigen::MatrixXd;

Var Graph::make(MatrixXd v) {
  nodes_.push_back(Node{});
  Node& n = nodes_.back();
  n.value = std::move(v);
  n.grad = MatrixXd::Zero(n.value.rows(), n.value.cols());
  n.graph = this;
  return Var{&n};
}

Var Graph::input(MatrixXd v) { return make(std::move(v)); }

Var Graph::param(const std::string& name, const MatrixXd& v) {
  auto it = params_.find(name);
  if (it != params_.end()) return it->second;
  Var var = make(v);
  params_.emplace(name, var);
  return var;
}

void Graph::backward(Var loss) {
  if (loss.rows() != 1 || loss.cols() != 1) {
    throw std::invalid_argument("backward requires a 1x1 loss node");
  }
  if (ran_backward_) throw std::logic_error("graph backward ran twice");
  ran_backward_ = true;
  loss.n->grad(0, 0) = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (it->backward) it->backward();
  }
}

std::map<std::string, MatrixXd> Graph::param_grads() const {
  std::map<std::string, MatrixXd> out;
  for (const auto& [name, var] : params_) out.emplace(name, var.n->grad);
  return out;
}

namespace {

Graph* graph_of(Var a) { return a.n->graph; }

void check_same_shape(Var a, Var b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
  }
}

}  // namespace

Var add(Var a, Var b) {
  check_same_shape(a, b, "add");
  Var out = graph_of(a)->make(a.value() + b.value());
  out.n->backward = [a, b, o = out.n]() {
    a.n->grad += o->grad;
    b.n->grad += o->grad;
  };
  return out;
}

Var sub(Var a, Var b) {
  check_same_shape(a, b, "sub");
  Var out = graph_of(a)->make(a.value() - b.value());
  out.n->backward = [a, b, o = out.n]() {
    a.n->grad += o->grad;
    b.n->grad -= o->grad;
  };
  return out;
}

Var mul(Var a, Var b) {
  check_same_shape(a, b, "mul");
  Var out = graph_of(a)->make(a.value().cwiseProduct(b.value()));
  out.n->backward = [a, b, o = out.n]() {
    a.n->grad += o->grad.cwiseProduct(b.n->value);
    b.n->grad += o->grad.cwiseProduct(a.n->value);
  };
  return out;
}

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: inner dimensions differ");
  }
  Var out = graph_of(a)->make(a.value() * b.value());
  out.n->backward = [a, b, o = out.n]() {
    a.n->grad += o->grad * b.n->value.transpose();
    b.n->grad += a.n->value.transpose() * o->grad;
  };
  return out;
}

Var transpose(Var a) {
  Var out = graph_of(a)->make(a.value().transpose());
  out.n->backward = [a, o = out.n]() { a.n->grad += o->grad.transpose(); };
  return out;
}

Var scale(Var a, double s) {
  Var out = graph_of(a)->make(a.value() * s);
  out.n->backward = [a, s, o = out.n]() { a.n->grad += o->grad * s; };
  return out;
}

Var add_rowwise(Var m, Var row) {
  if (row.rows() != 1 || row.cols() != m.cols()) {
    throw std::invalid_argument("add_rowwise: need a 1xD row matching m");
  }
  MatrixXd v = m.value();
  v.rowwise() += row.value().row(0);
  Var out = graph_of(m)->make(std::move(v));
  out.n->backward = [m, row, o = out.n]() {
    m.n->grad += o->grad;
    row.n->grad += o->grad.colwise().sum();
  };
  return out;
}

Var sigmoid(Var a) {
  MatrixXd v = a.value().unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
  Var out = graph_of(a)->make(std::move(v));
  out.n->backward = [a, o = out.n]() {
    a.n->grad += o->grad.cwiseProduct(
        o->value.cwiseProduct(MatrixXd::Ones(o->value.rows(), o->value.cols()) - o->value));
  };
  return out;
}

Var tanh_act(Var a) {
  MatrixXd v = a.value().unaryExpr([](double x) { return std::tanh(x); });
  Var out = graph_of(a)->make(std::move(v));
  out.n->backward = [a, o = out.n]() {
    a.n->grad += o->grad.cwiseProduct(
        MatrixXd::Ones(o->value.rows(), o->value.cols()) - o->value.cwiseProduct(o->value));
  };
  return out;
}

Var abs_val(Var a) {
  Var out = graph_of(a)->make(a.value().cwiseAbs());
  out.n->backward = [a, o = out.n]() {
    a.n->grad += o->grad.cwiseProduct(a.n->value.unaryExpr(
        [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }));
  };
  return out;
}

Var log_val(Var a) {
  Var out = graph_of(a)->make(a.value().array().log().matrix());
  out.n->backward = [a, o = out.n]() {
    a.n->grad += o->grad.cwiseQuotient(a.n->value);
  };
  return out;
}

Var clamp_val(Var a, double lo, double hi, bool* flag) {
  bool clamped = false;
  MatrixXd v = a.value().unaryExpr([&](double x) {
    if (x < lo) { clamped = true; return lo; }
    if (x > hi) { clamped = true; return hi; }
    return x;
  });
  if (clamped && flag) *flag = true;
  Var out = graph_of(a)->make(std::move(v));
  out.n->backward = [a, lo, hi, o = out.n]() {
    for (int i = 0; i < o->grad.rows(); ++i) {
      for (int j = 0; j < o->grad.cols(); ++j) {
        const double x = a.n->value(i, j);
        if (x > lo && x < hi) a.n->grad(i, j) += o->grad(i, j);
      }
    }
  };
  return out;
}

Var softmax_rows(Var a) {
  MatrixXd v(a.rows(), a.cols());
  for (int i = 0; i < a.rows(); ++i) {
    const double m = a.value().row(i).maxCoeff();
    Eigen::RowVectorXd e = (a.value().row(i).array() - m).exp();
    v.row(i) = e / e.sum();
  }
  Var out = graph_of(a)->make(std::move(v));
  out.n->backward = [a, o = out.n]() {
    // per row: dx = y ⊙ (dy − (dy·y))
    for (int i = 0; i < o->grad.rows(); ++i) {
      const double dot = o->grad.row(i).cwiseProduct(o->value.row(i)).sum();
      a.n->grad.row(i) +=
          o->value.row(i).cwiseProduct(o->grad.row(i).array().matrix() -
                                       Eigen::RowVectorXd::Constant(o->grad.cols(), dot));
    }
  };
  return out;
}

Var layer_norm_rows(Var x, Var gain, Var bias, double eps) {
  const int rows = x.rows(), cols = x.cols();
  if (gain.rows() != 1 || gain.cols() != cols || bias.rows() != 1 || bias.cols() != cols) {
    throw std::invalid_argument("layer_norm_rows: gain/bias must be 1xD");
  }
  MatrixXd xhat(rows, cols);
  Eigen::VectorXd inv_sigma(rows);
  for (int i = 0; i < rows; ++i) {
    const double mu = x.value().row(i).mean();
    const double var = (x.value().row(i).array() - mu).square().mean();
    const double is = 1.0 / std::sqrt(var + eps);
    inv_sigma[i] = is;
    xhat.row(i) = (x.value().row(i).array() - mu) * is;
  }
  MatrixXd v = xhat;
  for (int i = 0; i < rows; ++i) {
    v.row(i) = v.row(i).cwiseProduct(gain.value().row(0)) + bias.value().row(0);
  }
  Var out = graph_of(x)->make(std::move(v));
  out.n->backward = [x, gain, bias, xhat, inv_sigma, o = out.n]() {
    const int r = o->grad.rows(), c = o->grad.cols();
    for (int i = 0; i < r; ++i) {
      gain.n->grad.row(0) += o->grad.row(i).cwiseProduct(xhat.row(i));
      bias.n->grad.row(0) += o->grad.row(i);
      const Eigen::RowVectorXd dxhat = o->grad.row(i).cwiseProduct(gain.n->value.row(0));
      const double m1 = dxhat.mean();
      const double m2 = dxhat.cwiseProduct(xhat.row(i)).mean();
      x.n->grad.row(i) +=
          inv_sigma[i] * (dxhat.array() - m1 - xhat.row(i).array() * m2).matrix();
    }
    (void)c;
  };
  return out;
}

Var slice_rows(Var a, int row0, int nrows) {
  if (row0 < 0 || nrows < 1 || row0 + nrows > a.rows()) {
    throw std::invalid_argument("slice_rows: range out of bounds");
  }
  Var out = graph_of(a)->make(a.value().middleRows(row0, nrows));
  out.n->backward = [a, row0, nrows, o = out.n]() {
    a.n->grad.middleRows(row0, nrows) += o->grad;
  };
  return out;
}

Var slice_cols(Var a, int col0, int ncols) {
  if (col0 < 0 || ncols < 1 || col0 + ncols > a.cols()) {
    throw std::invalid_argument("slice_cols: range out of bounds");
  }
  Var out = graph_of(a)->make(a.value().middleCols(col0, ncols));
  out.n->backward = [a, col0, ncols, o = out.n]() {
    a.n->grad.middleCols(col0, ncols) += o->grad;
  };
  return out;
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: empty");
  int rows = 0;
  const int cols = parts[0].cols();
  for (Var p : parts) {
    if (p.cols() != cols) throw std::invalid_argument("concat_rows: column mismatch");
    rows += p.rows();
  }
  MatrixXd v(rows, cols);
  int r = 0;
  for (Var p : parts) {
    v.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  Var out = graph_of(parts[0])->make(std::move(v));
  out.n->backward = [parts, o = out.n]() {
    int r0 = 0;
    for (Var p : parts) {
      p.n->grad += o->grad.middleRows(r0, p.rows());
      r0 += p.rows();
    }
  };
  return out;
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: empty");
  int cols = 0;
  const int rows = parts[0].rows();
  for (Var p : parts) {
    if (p.rows() != rows) throw std::invalid_argument("concat_cols: row mismatch");
    cols += p.cols();
  }
  MatrixXd v(rows, cols);
  int c = 0;
  for (Var p : parts) {
    v.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  Var out = graph_of(parts[0])->make(std::move(v));
  out.n->backward = [parts, o = out.n]() {
    int c0 = 0;
    for (Var p : parts) {
      p.n->grad += o->grad.middleCols(c0, p.cols());
      c0 += p.cols();
    }
  };
  return out;
}

Var gather_rows(Var table, const std::vector<int>& ids) {
  if (ids.empty()) throw std::invalid_argument("gather_rows: empty id list");
  MatrixXd v((int)ids.size(), table.cols());
  for (size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= table.rows()) {
      throw std::out_of_range("gather_rows: id " + std::to_string(ids[i]) +
                              " outside table of " + std::to_string(table.rows()) +
                              " rows");
    }
    v.row((int)i) = table.value().row(ids[i]);
  }
  Var out = graph_of(table)->make(std::move(v));
  out.n->backward = [table, ids, o = out.n]() {
    for (size_t i = 0; i < ids.size(); ++i) {
      table.n->grad.row(ids[i]) += o->grad.row((int)i);
    }
  };
  return out;
}

Var sum_all(Var a) {
  Var out = graph_of(a)->make(MatrixXd::Constant(1, 1, a.value().sum()));
  out.n->backward = [a, o = out.n]() {
    a.n->grad.array() += o->grad(0, 0);
  };
  return out;
}

Var mean_all(Var a) {
  Var out = graph_of(a)->make(MatrixXd::Constant(1, 1, a.value().mean()));
  out.n->backward = [a, o = out.n]() {
    a.n->grad.array() += o->grad(0, 0) / (double)a.n->value.size();
  };
  return out;
}

Var max_over_rows(Var a) {
  MatrixXd v(1, a.cols());
  for (int j = 0; j < a.cols(); ++j) v(0, j) = a.value().col(j).maxCoeff();
  Var out = graph_of(a)->make(std::move(v));
  out.n->backward = [a, o = out.n]() {
    for (int j = 0; j < o->value.cols(); ++j) {
      const double m = o->value(0, j);
      int ties = 0;
      for (int i = 0; i < a.n->value.rows(); ++i) {
        if (a.n->value(i, j) == m) ++ties;
      }
      const double share = o->grad(0, j) / (double)ties;
      for (int i = 0; i < a.n->value.rows(); ++i) {
        if (a.n->value(i, j) == m) a.n->grad(i, j) += share;
      }
    }
  };
  return out;
}

Var normalize_row(Var a) {
  if (a.rows() != 1) throw std::invalid_argument("normalize_row: need a row vector");
  const double n = a.value().norm();
  MatrixXd v;
  if (n == 0.0) {
    v = MatrixXd::Zero(1, a.cols());
    v(0, 0) = 1.0;
  } else {
    v = a.value() / n;
  }
  Var out = graph_of(a)->make(std::move(v));
  out.n->backward = [a, n, o = out.n]() {
    if (n == 0.0) return;  // degenerate branch is locally constant
    const double dot = o->grad.cwiseProduct(o->value).sum();
    a.n->grad += (o->grad - dot * o->value) / n;
  };
  return out;
}

}  // namespace svla
