#pragma once

#include <vector>

#include "svla/action_head.hpp"
#include "svla/backbone.hpp"
#include "svla/spatial_model.hpp"

namespace svla {

// per-sample stochastic conditioning gates
struct GateSetting {
  int b_d = 0;  // inject depth tokens
  int b_p = 0;  // inject the ground-truth camera token
};

struct PolicyOutput {
  ChunkPrediction pred;  // graph-attached prediction (for losses)
  ActionChunk chunk;     // numeric C x 7 chunk, gripper as probability
};

// Full policy forward over an observation window (oldest first, the last
// entry is the current timestep). With use_spatial=false the fused feature
// is the semantic action token itself — the spatial-free baseline. The MLP
// predictor consumes only the current timestep; the LSTM consumes the
// whole window.
PolicyOutput policy_forward(Graph& g, const ParameterStore& s, const Config& c,
                            const std::vector<Observation>& window,
                            GateSetting gates, bool use_spatial);

// initializer for the full policy (backbone + head [+ spatial + adapter])
void init_policy(ParameterStore& s, const Config& c, int vocab, Rng& rng,
                 bool use_spatial);

}  // namespace svla
