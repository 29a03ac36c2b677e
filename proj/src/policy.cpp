#include "svla/policy.hpp"

#include <stdexcept>

namespace svla {

void init_policy(ParameterStore& s, const Config& c, int vocab, Rng& rng,
                 bool use_spatial) {
  init_backbone(s, c, vocab, rng);
  init_action_head(s, c, rng);
  if (use_spatial) {
    init_esm(s, c, rng);
    init_adapter(s, c, rng);
  }
}

static Var fused_feature(Graph& g, const ParameterStore& s, const Config& c,
                         const Observation& obs, GateSetting gates,
                         bool use_spatial) {
  Var t_act = semantic_forward(g, s, c, obs);
  if (!use_spatial) return t_act;
  EsmEncoding enc = esm_forward(g, s, c, obs, gates.b_d, gates.b_p);
  Var pooled = pool_tokens(g, enc.spatial_tokens);
  Var adapted = adapt(g, s, pooled);
  return fuse(g, s, c, t_act, adapted);
}

PolicyOutput policy_forward(Graph& g, const ParameterStore& s, const Config& c,
                            const std::vector<Observation>& window,
                            GateSetting gates, bool use_spatial) {
  if (window.empty()) {
    throw std::invalid_argument("policy_forward: empty observation window");
  }
  if (static_cast<int>(window.size()) > c.window) {
    throw std::invalid_argument("policy_forward: window longer than configured");
  }
  Var raw = [&] {
    if (c.predictor_mode == PredictorMode::mlp) {
      Var fused = fused_feature(g, s, c, window.back(), gates, use_spatial);
      return predict_mlp(g, s, c, fused);
    }
    std::vector<Var> history;
    history.reserve(window.size());
    for (const Observation& obs : window) {
      history.push_back(fused_feature(g, s, c, obs, gates, use_spatial));
    }
    return predict_lstm(g, s, c, history);
  }();
  PolicyOutput out;
  out.pred = split_prediction(g, c, raw);
  out.chunk = chunk_from_prediction(c, out.pred);
  return out;
}

}  // namespace svla
