#pragma once

#include "svla/autodiff.hpp"
#include "svla/config.hpp"
#include "svla/nn.hpp"
#include "svla/param_store.hpp"
#include "svla/types.hpp"

namespace svla {

// Small bidirectional transformer over one multimodal sequence: side-view
// patch embeddings, optional wrist-view patch embeddings, instruction token
// embeddings, and a learnable action token at the last position. The hidden
// state at the action token is the semantic action feature consumed by the
// action head. Parameters live under the "vlm." prefix.

void init_backbone(ParameterStore& s, const Config& c, int vocab, Rng& rng);

// sequence rows in the fixed layout above; positional embeddings are added
// by absolute position to everything except the action token
Var build_sequence(Graph& g, const ParameterStore& s, const Config& c,
                   const Observation& obs);

// K self-attention blocks, then the hidden state at the action token (the
// last row). With zero blocks this is the raw action-token embedding.
Var semantic_forward(Graph& g, const ParameterStore& s, const Config& c,
                     const Observation& obs);

}  // namespace svla
