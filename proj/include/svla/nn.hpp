#pragma once

#include "svla/autodiff.hpp"
#include "svla/param_store.hpp"
#include "svla/rng.hpp"

namespace svla {

// Parameter initializers. Each writes named tensors into the store using the
// given prefix; forward helpers below bind the same names back out of the
// store, so a module is fully described by its prefix.

// dense matrix of scale * N(0,1) entries
void init_matrix(ParameterStore& s, const std::string& name, int rows, int cols,
                 double scale, Rng& rng, ParamGroup group);
// `prefix.w` (in×out, N(0,1)/sqrt(in)) and `prefix.b` (1×out, zeros);
// zero_init makes both tensors zero (adapter final layer contract)
void init_linear(ParameterStore& s, const std::string& prefix, int in, int out,
                 Rng& rng, ParamGroup group, bool zero_init = false);
// `prefix.gain` (ones) and `prefix.bias` (zeros), both 1×dim
void init_layer_norm(ParameterStore& s, const std::string& prefix, int dim,
                     ParamGroup group);
// `prefix.wq/.wk/.wv/.wo`, all dim×dim, no biases
void init_attention(ParameterStore& s, const std::string& prefix, int dim,
                    Rng& rng, ParamGroup group);
// pre-norm residual transformer block: self-attention + feed-forward
void init_self_block(ParameterStore& s, const std::string& prefix, int dim,
                     int ffn_hidden, Rng& rng, ParamGroup group);

// Forward helpers. All take the graph, the store, and the prefix used at
// init time; shapes follow the autodiff convention rows=tokens, cols=dim.

Var linear(Graph& g, const ParameterStore& s, const std::string& prefix, Var x);
Var layer_norm(Graph& g, const ParameterStore& s, const std::string& prefix, Var x);
// multi-head attention, queries from q_in, keys/values from kv_in
Var attention(Graph& g, const ParameterStore& s, const std::string& prefix,
              Var q_in, Var kv_in, int heads);
Var self_block(Graph& g, const ParameterStore& s, const std::string& prefix,
               Var x, int heads);
// 2-layer perceptron with tanh hidden activation over `prefix.fc1/.fc2`
Var mlp2(Graph& g, const ParameterStore& s, const std::string& prefix, Var x);
void init_mlp2(ParameterStore& s, const std::string& prefix, int in, int hidden,
               int out, Rng& rng, ParamGroup group, bool zero_last = false);

}  // namespace svla
