#include "svla/nn.hpp"

#include <cmath>

namespace svla {

using Eigen::MatrixXd;

void init_matrix(ParameterStore& s, const std::string& name, int rows, int cols,
                 double scale, Rng& rng, ParamGroup group) {
  MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = scale * rng.normal();
  }
  s.add(name, std::move(m), group);
}

void init_linear(ParameterStore& s, const std::string& prefix, int in, int out,
                 Rng& rng, ParamGroup group, bool zero_init) {
  if (zero_init) {
    s.add(prefix + ".w", MatrixXd::Zero(in, out), group);
  } else {
    init_matrix(s, prefix + ".w", in, out, 1.0 / std::sqrt((double)in), rng, group);
  }
  s.add(prefix + ".b", MatrixXd::Zero(1, out), group);
}

void init_layer_norm(ParameterStore& s, const std::string& prefix, int dim,
                     ParamGroup group) {
  s.add(prefix + ".gain", MatrixXd::Ones(1, dim), group);
  s.add(prefix + ".bias", MatrixXd::Zero(1, dim), group);
}

void init_attention(ParameterStore& s, const std::string& prefix, int dim,
                    Rng& rng, ParamGroup group) {
  const double scale = 1.0 / std::sqrt((double)dim);
  init_matrix(s, prefix + ".wq", dim, dim, scale, rng, group);
  init_matrix(s, prefix + ".wk", dim, dim, scale, rng, group);
  init_matrix(s, prefix + ".wv", dim, dim, scale, rng, group);
  init_matrix(s, prefix + ".wo", dim, dim, scale, rng, group);
}

void init_self_block(ParameterStore& s, const std::string& prefix, int dim,
                     int ffn_hidden, Rng& rng, ParamGroup group) {
  init_layer_norm(s, prefix + ".ln1", dim, group);
  init_attention(s, prefix + ".attn", dim, rng, group);
  init_layer_norm(s, prefix + ".ln2", dim, group);
  init_linear(s, prefix + ".ffn.fc1", dim, ffn_hidden, rng, group);
  init_linear(s, prefix + ".ffn.fc2", ffn_hidden, dim, rng, group);
}

void init_mlp2(ParameterStore& s, const std::string& prefix, int in, int hidden,
               int out, Rng& rng, ParamGroup group, bool zero_last) {
  init_linear(s, prefix + ".fc1", in, hidden, rng, group);
  init_linear(s, prefix + ".fc2", hidden, out, rng, group, zero_last);
}

Var linear(Graph& g, const ParameterStore& s, const std::string& prefix, Var x) {
  Var w = g.param(prefix + ".w", s.at(prefix + ".w"));
  Var b = g.param(prefix + ".b", s.at(prefix + ".b"));
  return add_rowwise(matmul(x, w), b);
}

Var layer_norm(Graph& g, const ParameterStore& s, const std::string& prefix, Var x) {
  Var gain = g.param(prefix + ".gain", s.at(prefix + ".gain"));
  Var bias = g.param(prefix + ".bias", s.at(prefix + ".bias"));
  return layer_norm_rows(x, gain, bias);
}

Var attention(Graph& g, const ParameterStore& s, const std::string& prefix,
              Var q_in, Var kv_in, int heads) {
  const int dim = q_in.cols();
  if (dim % heads != 0) {
    throw std::invalid_argument("attention: heads must divide dim");
  }
  const int dh = dim / heads;
  Var q = matmul(q_in, g.param(prefix + ".wq", s.at(prefix + ".wq")));
  Var k = matmul(kv_in, g.param(prefix + ".wk", s.at(prefix + ".wk")));
  Var v = matmul(kv_in, g.param(prefix + ".wv", s.at(prefix + ".wv")));
  std::vector<Var> head_out;
  head_out.reserve(heads);
  for (int h = 0; h < heads; ++h) {
    Var qh = slice_cols(q, h * dh, dh);
    Var kh = slice_cols(k, h * dh, dh);
    Var vh = slice_cols(v, h * dh, dh);
    Var scores = scale(matmul(qh, transpose(kh)), 1.0 / std::sqrt((double)dh));
    Var attn = softmax_rows(scores);
    head_out.push_back(matmul(attn, vh));
  }
  Var merged = heads == 1 ? head_out[0] : concat_cols(head_out);
  return matmul(merged, g.param(prefix + ".wo", s.at(prefix + ".wo")));
}

Var mlp2(Graph& g, const ParameterStore& s, const std::string& prefix, Var x) {
  Var h = tanh_act(linear(g, s, prefix + ".fc1", x));
  return linear(g, s, prefix + ".fc2", h);
}

Var self_block(Graph& g, const ParameterStore& s, const std::string& prefix,
               Var x, int heads) {
  Var normed = layer_norm(g, s, prefix + ".ln1", x);
  Var y = add(x, attention(g, s, prefix + ".attn", normed, normed, heads));
  Var normed2 = layer_norm(g, s, prefix + ".ln2", y);
  return add(y, mlp2(g, s, prefix + ".ffn", normed2));
}

}  // namespace svla
