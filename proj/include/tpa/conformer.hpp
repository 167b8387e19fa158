#pragma once

#include "tpa/adapters.hpp"

namespace tpa {

struct ConformerConfig {
  int num_blocks = 4;
  Index d_model = 32;
  int heads = 4;
  Index conv_kernel = 7;
  Index ffn_expansion = 4;
  std::uint64_t seed = 1;

  void validate() const;
};

// ffn1 and ffn2 contribute half-step residuals, attention and conv full ones;
// a final layer norm closes the block.
struct BlockParams {
  FFNParams ffn1;
  MHSAParams mhsa;
  ConvModuleParams conv;
  FFNParams ffn2;
  LayerNormParams final_norm;
};

BlockParams make_block(const ConformerConfig& cfg, Rng& rng);
std::vector<BlockParams> make_encoder(const ConformerConfig& cfg);

// Adapters attached to one block's sub-block sites. The AfterBlock site is
// owned by encoder_forward, which composes the serial adapter onto the block
// output.
struct AdapterHooks {
  const AdapterParams* ffn1 = nullptr;
  const AdapterParams* conv = nullptr;
  const AdapterParams* ffn2 = nullptr;
  const AdapterParams* after_block = nullptr;
};

AdapterHooks hooks_for_block(const AdapterSet& set, int block_index);

Var block_forward(const BlockParams& p, Var x, const AdapterHooks& hooks = {}, int block_index = 0,
                  ActivationProbe* probe = nullptr);

Var encoder_forward(const std::vector<BlockParams>& blocks, Var x,
                    const AdapterSet* adapters = nullptr, ActivationProbe* probe = nullptr);

void visit_params(BlockParams& p, const std::string& prefix, const ParamVisitor& v);
void visit_params(std::vector<BlockParams>& blocks, const std::string& prefix, const ParamVisitor& v);

long long encoder_param_count(const ConformerConfig& cfg);

inline AdapterSet build_adapter_set(const AdapterSpec& spec, const ConformerConfig& cfg,
                                    std::uint64_t seed) {
  return build_adapter_set(spec, cfg.num_blocks, cfg.d_model, seed);
}

inline AdapterParamCount count_adapter_params(const AdapterSpec& spec, const ConformerConfig& cfg) {
  return count_adapter_params(spec, cfg.num_blocks, cfg.d_model);
}

// Share of a full model's parameters held by the adapters:
// adapters / (encoder + adapters + head).
double adapter_param_fraction(const AdapterSpec& spec, const ConformerConfig& cfg,
                              long long head_params);

}  // namespace tpa
