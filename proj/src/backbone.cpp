#include "svla/backbone.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "svla/spatial_model.hpp"

namespace svla {

void init_backbone(ParameterStore& s, const Config& c, int vocab, Rng& rng) {
  if (vocab <= 0) throw std::runtime_error("init_backbone: vocab must be positive");
  const int p2c = c.patch_size * c.patch_size * c.image_channels;
  const int m = c.patch_count();
  const int max_pos = 2 * m + c.max_instruction_len;
  init_linear(s, "vlm.patch_embed", p2c, c.act_dim, rng, ParamGroup::vlm);
  init_matrix(s, "vlm.tok_embed", vocab, c.act_dim, 0.1, rng, ParamGroup::vlm);
  init_matrix(s, "vlm.pos", max_pos, c.act_dim, 0.1, rng, ParamGroup::vlm);
  init_matrix(s, "vlm.act_token", 1, c.act_dim, 0.1, rng, ParamGroup::vlm);
  for (int b = 0; b < c.backbone_blocks; ++b) {
    init_self_block(s, "vlm.blk" + std::to_string(b), c.act_dim,
                    c.backbone_ffn_hidden, rng, ParamGroup::vlm);
  }
}

Var build_sequence(Graph& g, const ParameterStore& s, const Config& c,
                   const Observation& obs) {
  obs.validate();
  if (static_cast<int>(obs.instruction.size()) > c.max_instruction_len) {
    throw std::runtime_error(
        "build_sequence: instruction length " +
        std::to_string(obs.instruction.size()) + " exceeds max_instruction_len " +
        std::to_string(c.max_instruction_len));
  }
  std::vector<Var> parts;
  Var side = g.input(patchify_image(obs.side_image, c.patch_size));
  parts.push_back(linear(g, s, "vlm.patch_embed", side));
  if (obs.wrist_image) {
    Var wrist = g.input(patchify_image(*obs.wrist_image, c.patch_size));
    parts.push_back(linear(g, s, "vlm.patch_embed", wrist));
  }
  Var tok_embed = g.param("vlm.tok_embed", s.at("vlm.tok_embed"));
  parts.push_back(gather_rows(tok_embed, obs.instruction));
  Var tokens = parts.size() == 1 ? parts[0] : concat_rows(parts);
  Var pos = g.param("vlm.pos", s.at("vlm.pos"));
  tokens = add(tokens, slice_rows(pos, 0, static_cast<int>(tokens.rows())));
  Var act = g.param("vlm.act_token", s.at("vlm.act_token"));
  return concat_rows({tokens, act});
}

Var semantic_forward(Graph& g, const ParameterStore& s, const Config& c,
                     const Observation& obs) {
  Var x = build_sequence(g, s, c, obs);
  for (int b = 0; b < c.backbone_blocks; ++b) {
    x = self_block(g, s, "vlm.blk" + std::to_string(b), x, c.attention_heads);
  }
  return slice_rows(x, static_cast<int>(x.rows()) - 1, 1);
}

}  // namespace svla
