#pragma once

#include <Eigen/Dense>
#include <deque>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace svla {

class Graph;

// One value in the computation graph. Nodes are owned by a Graph and live in
// creation order; reverse creation order is a valid topological order for the
// backward sweep because every op only consumes already-created nodes.
struct Node {
  Eigen::MatrixXd value;
  Eigen::MatrixXd grad;                 // same shape as value, starts at zero
  std::function<void()> backward;       // empty for leaves
  Graph* graph = nullptr;
};

// Cheap handle into a Graph.
struct Var {
  Node* n = nullptr;

  const Eigen::MatrixXd& value() const { return n->value; }
  const Eigen::MatrixXd& grad() const { return n->grad; }
  int rows() const { return (int)n->value.rows(); }
  int cols() const { return (int)n->value.cols(); }
};

// Reverse-mode tape over Eigen double matrices. One Graph per forward pass;
// build, call backward once, read gradients, discard.
class Graph {
 public:
  // leaf without gradient tracking
  Var input(Eigen::MatrixXd v);
  // named leaf with gradient tracking; repeated calls with the same name
  // return the same node so gradient contributions accumulate naturally.
  Var param(const std::string& name, const Eigen::MatrixXd& v);

  // seeds d(loss)/d(loss)=1 and runs the reverse sweep; loss must be 1×1.
  // A graph can run backward only once.
  void backward(Var loss);

  // gradient of the loss w.r.t. each named parameter used in this graph
  std::map<std::string, Eigen::MatrixXd> param_grads() const;

  size_t size() const { return nodes_.size(); }

  Var make(Eigen::MatrixXd v);          // internal: op result node

 private:
  std::deque<Node> nodes_;
  std::map<std::string, Var> params_;
  bool ran_backward_ = false;
};

// elementwise / structural ops --------------------------------------------

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);                  // hadamard
Var matmul(Var a, Var b);
Var transpose(Var a);
Var scale(Var a, double s);
Var add_rowwise(Var m, Var row);        // broadcast a 1×D row over all rows

Var sigmoid(Var a);
Var tanh_act(Var a);
Var abs_val(Var a);                     // subgradient 0 at 0
Var log_val(Var a);
// clamps into [lo,hi]; zero gradient outside the open interval. When any
// entry is actually clamped and `flag` is non-null, *flag is set.
Var clamp_val(Var a, double lo, double hi, bool* flag = nullptr);

Var softmax_rows(Var a);
// per-row layer norm with learned 1×D gain/bias
Var layer_norm_rows(Var x, Var gain, Var bias, double eps = 1e-5);

Var slice_rows(Var a, int row0, int nrows);
Var slice_cols(Var a, int col0, int ncols);
Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const std::vector<Var>& parts);
// embedding lookup: rows of `table` selected by id, gradient scattered back
Var gather_rows(Var table, const std::vector<int>& ids);

Var sum_all(Var a);                     // 1×1
Var mean_all(Var a);                    // 1×1
// column-wise max over rows → 1×D; ties split the gradient equally
Var max_over_rows(Var a);
// row vector normalized to unit length; zero input maps to e_0 with zero
// gradient (the documented degenerate-quaternion rule)
Var normalize_row(Var a);

}  // namespace svla
