#include "svla/action_head.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace svla {

void init_action_head(ParameterStore& s, const Config& c, Rng& rng) {
  const auto g = ParamGroup::action_head;
  // film: affine generator emits [gamma | beta]; its last-layer bias is
  // (ones | zeros) and the gate generator's is +4, so a zero spatial input
  // yields gamma=1, beta=0, gate=sigmoid(4)~0.982.
  init_mlp2(s, "head.film.affine", c.act_dim, c.adapter_hidden, 2 * c.act_dim,
            rng, g);
  init_mlp2(s, "head.film.gate", c.act_dim, c.adapter_hidden, c.act_dim, rng, g);
  Eigen::MatrixXd& affine_b = s.at("head.film.affine.fc2.b");
  affine_b.setZero();
  affine_b.block(0, 0, 1, c.act_dim).setOnes();
  s.at("head.film.gate.fc2.b").setConstant(4.0);
  init_attention(s, "head.ca", c.act_dim, rng, g);
  init_mlp2(s, "head.predictor", c.act_dim, c.predictor_hidden,
            7 * c.chunk_size, rng, g);
  for (const char* gate : {"i", "f", "o", "c"}) {
    const std::string p = std::string("head.lstm.") + gate;
    init_matrix(s, p + ".wx", c.act_dim, c.lstm_hidden,
                1.0 / std::sqrt(static_cast<double>(c.act_dim)), rng, g);
    init_matrix(s, p + ".wh", c.lstm_hidden, c.lstm_hidden,
                1.0 / std::sqrt(static_cast<double>(c.lstm_hidden)), rng, g);
    s.add(p + ".b", Eigen::MatrixXd::Zero(1, c.lstm_hidden), g);
  }
}

void init_adapter(ParameterStore& s, const Config& c, Rng& rng) {
  init_mlp2(s, "adapter", c.spatial_dim, c.adapter_hidden, c.act_dim, rng,
            ParamGroup::adapter, /*zero_last=*/true);
}

Var pool_tokens(Graph& g, Var spatial_tokens) {
  (void)g;
  return max_over_rows(spatial_tokens);
}

Var adapt(Graph& g, const ParameterStore& s, Var pooled) {
  return mlp2(g, s, "adapter", pooled);
}

static void check_dims(Var a, Var b, const char* where) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::runtime_error(std::string(where) + ": feature dims differ (" +
                             std::to_string(a.cols()) + " vs " +
                             std::to_string(b.cols()) + ")");
  }
}

Var fuse_addition(Graph& g, Var t_act, Var t_spl) {
  (void)g;
  check_dims(t_act, t_spl, "fuse_addition");
  return add(t_act, t_spl);
}

Var fuse_film(Graph& g, const ParameterStore& s, const Config& c, Var t_act,
              Var t_spl) {
  check_dims(t_act, t_spl, "fuse_film");
  Var affine = mlp2(g, s, "head.film.affine", t_spl);
  Var gamma = slice_cols(affine, 0, c.act_dim);
  Var beta = slice_cols(affine, c.act_dim, c.act_dim);
  Var modulated = add(mul(gamma, t_act), beta);
  Var gate = sigmoid(mlp2(g, s, "head.film.gate", t_spl));
  Var ones = g.input(Eigen::MatrixXd::Ones(1, c.act_dim));
  return add(mul(gate, modulated), mul(sub(ones, gate), t_spl));
}

Var fuse_cross_attention(Graph& g, const ParameterStore& s, const Config& c,
                         Var t_act, Var t_spl) {
  check_dims(t_act, t_spl, "fuse_cross_attention");
  return add(t_act, attention(g, s, "head.ca", t_act, t_spl, c.attention_heads));
}

Var fuse(Graph& g, const ParameterStore& s, const Config& c, Var t_act,
         Var t_spl) {
  switch (c.fusion_mode) {
    case FusionMode::addition:
      return fuse_addition(g, t_act, t_spl);
    case FusionMode::film:
      return fuse_film(g, s, c, t_act, t_spl);
    case FusionMode::cross_attention:
      return fuse_cross_attention(g, s, c, t_act, t_spl);
  }
  throw std::runtime_error("fuse: unknown fusion mode");
}

Var predict_mlp(Graph& g, const ParameterStore& s, const Config& c, Var fused) {
  (void)c;
  return mlp2(g, s, "head.predictor", fused);
}

static Var lstm_gate(Graph& g, const ParameterStore& s, const std::string& p,
                     Var x, Var h) {
  Var z = add(matmul(x, g.param(p + ".wx", s.at(p + ".wx"))),
              matmul(h, g.param(p + ".wh", s.at(p + ".wh"))));
  return add_rowwise(z, g.param(p + ".b", s.at(p + ".b")));
}

Var predict_lstm(Graph& g, const ParameterStore& s, const Config& c,
                 const std::vector<Var>& history) {
  if (history.empty()) throw std::runtime_error("predict_lstm: empty history");
  if (static_cast<int>(history.size()) > c.window) {
    throw std::runtime_error("predict_lstm: history longer than window");
  }
  Var h = g.input(Eigen::MatrixXd::Zero(1, c.lstm_hidden));
  Var cell = g.input(Eigen::MatrixXd::Zero(1, c.lstm_hidden));
  for (Var x : history) {
    Var i = sigmoid(lstm_gate(g, s, "head.lstm.i", x, h));
    Var f = sigmoid(lstm_gate(g, s, "head.lstm.f", x, h));
    Var o = sigmoid(lstm_gate(g, s, "head.lstm.o", x, h));
    Var cand = tanh_act(lstm_gate(g, s, "head.lstm.c", x, h));
    cell = add(mul(f, cell), mul(i, cand));
    h = mul(o, tanh_act(cell));
  }
  return mlp2(g, s, "head.predictor", h);
}

ChunkPrediction split_prediction(Graph& g, const Config& c, Var raw) {
  (void)g;
  if (raw.rows() != 1 || raw.cols() != 7 * c.chunk_size) {
    throw std::runtime_error("split_prediction: expected 1x" +
                             std::to_string(7 * c.chunk_size) + " row");
  }
  ChunkPrediction p;
  p.pose = slice_cols(raw, 0, 6 * c.chunk_size);
  p.grip_logit = slice_cols(raw, 6 * c.chunk_size, c.chunk_size);
  p.grip_prob = sigmoid(p.grip_logit);
  return p;
}

ActionChunk chunk_from_prediction(const Config& c, const ChunkPrediction& p) {
  ActionChunk chunk;
  chunk.values.resize(c.chunk_size, 7);
  const Eigen::MatrixXd& pose = p.pose.value();
  const Eigen::MatrixXd& grip = p.grip_prob.value();
  for (int i = 0; i < c.chunk_size; ++i) {
    for (int d = 0; d < 6; ++d) chunk.values(i, d) = pose(0, 6 * i + d);
    chunk.values(i, 6) = grip(0, i);
  }
  return chunk;
}

LossParts composite_loss(Graph& g, const ChunkPrediction& pred,
                         const Eigen::MatrixXd& pose_gt,
                         const Eigen::MatrixXd& grip_gt, double lambda) {
  const int steps = static_cast<int>(grip_gt.cols());
  if (pose_gt.rows() != steps || pose_gt.cols() != 6 || grip_gt.rows() != 1) {
    throw std::runtime_error("composite_loss: ground-truth shape mismatch");
  }
  if (pred.pose.cols() != 6 * steps || pred.grip_prob.cols() != steps) {
    throw std::runtime_error("composite_loss: prediction shape mismatch");
  }
  Eigen::MatrixXd pose_flat(1, 6 * steps);
  for (int i = 0; i < steps; ++i) {
    const double gv = grip_gt(0, i);
    if (gv != 0.0 && gv != 1.0) {
      throw std::runtime_error("composite_loss: gripper target not binary at step " +
                               std::to_string(i));
    }
    for (int d = 0; d < 6; ++d) pose_flat(0, 6 * i + d) = pose_gt(i, d);
  }
  LossParts out;
  Var diff = sub(pred.pose, g.input(pose_flat));
  out.mse = scale(sum_all(mul(diff, diff)), 1.0 / 6.0);

  Var p = clamp_val(pred.grip_prob, 1e-7, 1.0 - 1e-7, &out.clamped);
  Var y = g.input(grip_gt);
  Var ones = g.input(Eigen::MatrixXd::Ones(1, steps));
  Var pos_term = mul(y, log_val(p));
  Var neg_term = mul(sub(ones, y), log_val(sub(ones, p)));
  out.bce = scale(sum_all(add(pos_term, neg_term)), -1.0);
  out.total = add(out.mse, scale(out.bce, lambda));
  return out;
}

}  // namespace svla
