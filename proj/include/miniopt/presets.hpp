#pragma once

// Named architecture presets for the memory audit. The GPT-2-shaped presets
// model the standard layout: learned position embeddings, biased linear
// maps, pre-norm blocks, and a weight-tied output head (so no separate
// output tensor is counted).

#include <string>
#include <vector>

#include "miniopt/models/transformer.hpp"
#include "miniopt/partition.hpp"

namespace miniopt::cli {

inline std::vector<partition::ParamMeta> gpt2_shaped_metas(int n_layers, int width, int n_heads,
                                                           int vocab, int seq_len) {
  using partition::ParamMeta;
  using partition::Role;
  const int mlp_width = 4 * width;
  std::vector<ParamMeta> metas;
  metas.push_back({"embed", vocab, width, Role::Embed, 0});
  metas.push_back({"wpe", seq_len, width, Role::Other, 0});
  for (int l = 0; l < n_layers; ++l) {
    const std::string p = "h" + std::to_string(l) + ".";
    metas.push_back({p + "ln1.gain", width, 1, Role::Other, 0});
    metas.push_back({p + "ln1.bias", width, 1, Role::Other, 0});
    metas.push_back({p + "attn.query", width, width, Role::Query, n_heads});
    metas.push_back({p + "attn.query.bias", width, 1, Role::Other, 0});
    metas.push_back({p + "attn.key", width, width, Role::Key, n_heads});
    metas.push_back({p + "attn.key.bias", width, 1, Role::Other, 0});
    metas.push_back({p + "attn.value", width, width, Role::Value, 0});
    metas.push_back({p + "attn.value.bias", width, 1, Role::Other, 0});
    metas.push_back({p + "attn.proj", width, width, Role::AttnProj, 0});
    metas.push_back({p + "attn.proj.bias", width, 1, Role::Other, 0});
    metas.push_back({p + "ln2.gain", width, 1, Role::Other, 0});
    metas.push_back({p + "ln2.bias", width, 1, Role::Other, 0});
    metas.push_back({p + "mlp.fc1", mlp_width, width, Role::Mlp, 0});
    metas.push_back({p + "mlp.fc1.bias", mlp_width, 1, Role::Other, 0});
    metas.push_back({p + "mlp.proj", width, mlp_width, Role::Mlp, 0});
    metas.push_back({p + "mlp.proj.bias", width, 1, Role::Other, 0});
  }
  metas.push_back({"lnf.gain", width, 1, Role::Other, 0});
  metas.push_back({"lnf.bias", width, 1, Role::Other, 0});
  // output head tied to the embedding: no extra tensor
  return metas;
}

// tiny: the 1-layer probe model (untied head, so embed and output both
// appear). gpt2-*: standard GPT-2 shapes with tied heads.
inline std::vector<partition::ParamMeta> preset_metas(const std::string& preset) {
  if (preset == "tiny") {
    models::TransformerConfig cfg;
    cfg.n_layers = 1;
    cfg.n_emb = 16;
    cfg.n_heads = 4;
    cfg.vocab = 8;
    cfg.seq_len = 16;
    cfg.mlp_width = 32;
    return models::transformer_param_metas(cfg);
  }
  if (preset == "gpt2-125m") return gpt2_shaped_metas(12, 768, 12, 50257, 1024);
  if (preset == "gpt2-1.5b") return gpt2_shaped_metas(48, 1600, 25, 50257, 1024);
  throw std::invalid_argument("unknown architecture preset '" + preset + "'");
}

}  // namespace miniopt::cli
