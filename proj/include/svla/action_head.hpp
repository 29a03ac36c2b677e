#pragma once

#include <vector>

#include "svla/autodiff.hpp"
#include "svla/config.hpp"
#include "svla/nn.hpp"
#include "svla/param_store.hpp"
#include "svla/types.hpp"

namespace svla {

// Spatial-enhanced action head: pools the spatial tokens, adapts them into
// the backbone feature space through a zero-initialized bottleneck, fuses
// them with the semantic action feature under one of three strategies, and
// decodes a C-step action chunk with an MLP or LSTM predictor. Fusion and
// predictor parameters live under "head." (frozen during post-training);
// the adapter lives under "adapter." and is the main post-training knob.

// Initializes every fusion strategy and both predictors so that one
// checkpoint can be re-run under any fusion_mode.
void init_action_head(ParameterStore& s, const Config& c, Rng& rng);
void init_adapter(ParameterStore& s, const Config& c, Rng& rng);

// element-wise max over token rows -> 1 x D_s
Var pool_tokens(Graph& g, Var spatial_tokens);

// 2-layer bottleneck D_s -> adapter_hidden -> D_act; final layer is
// zero-initialized so the adapted feature starts as the zero vector.
Var adapt(Graph& g, const ParameterStore& s, Var pooled);

// f = t_act + t_spl (non-parametric)
Var fuse_addition(Graph& g, Var t_act, Var t_spl);
// (gamma, beta) and a sigmoid gate generated from t_spl by two fixed
// perceptrons; f = g .* (gamma .* t_act + beta) + (1 - g) .* t_spl.
// The generators' last-layer biases are crafted so that a zero t_spl gives
// gamma = 1, beta = 0 and a nearly-open gate, keeping the initial policy
// close to the spatial-free one.
Var fuse_film(Graph& g, const ParameterStore& s, const Config& c, Var t_act,
              Var t_spl);
// multi-head attention with query t_act and the single key/value t_spl,
// plus a residual from t_act
Var fuse_cross_attention(Graph& g, const ParameterStore& s, const Config& c,
                         Var t_act, Var t_spl);
// dispatch on c.fusion_mode
Var fuse(Graph& g, const ParameterStore& s, const Config& c, Var t_act,
         Var t_spl);

// Raw predictor output, a 1 x 7C row: the first 6C entries are the pose
// values (chunk-major), the last C are gripper logits.
Var predict_mlp(Graph& g, const ParameterStore& s, const Config& c, Var fused);
// LSTM over the fused-feature history (oldest first, length in [1, window]);
// the final hidden state feeds the same perceptron head as predict_mlp, so
// lstm_hidden must equal act_dim. Shorter histories just run fewer steps,
// which matches left-padding with masked zeros.
Var predict_lstm(Graph& g, const ParameterStore& s, const Config& c,
                 const std::vector<Var>& history);

struct ChunkPrediction {
  Var pose;        // 1 x 6C
  Var grip_logit;  // 1 x C
  Var grip_prob;   // 1 x C, sigmoid of the logits
};

// splits the raw predictor row and applies the gripper sigmoid
ChunkPrediction split_prediction(Graph& g, const Config& c, Var raw);
// numeric chunk (C x 7, gripper as probability) from a prediction
ActionChunk chunk_from_prediction(const Config& c, const ChunkPrediction& p);

struct LossParts {
  Var total;  // mse + lambda * bce
  Var mse;    // sum over chunk steps of mean-over-6-dims squared pose error
  Var bce;    // sum over chunk steps of gripper binary cross-entropy
  bool clamped = false;  // gripper probability left (1e-7, 1-1e-7) and was clamped
};

// pose_gt is C x 6, grip_gt is 1 x C with entries in {0,1} (else throws)
LossParts composite_loss(Graph& g, const ChunkPrediction& pred,
                         const Eigen::MatrixXd& pose_gt,
                         const Eigen::MatrixXd& grip_gt, double lambda);

}  // namespace svla
