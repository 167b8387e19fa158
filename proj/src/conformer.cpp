#include "tpa/conformer.hpp"

namespace tpa {

void ConformerConfig::validate() const {
  if (num_blocks < 0) throw ConfigError("num_blocks must be >= 0");
  if (d_model < 1) throw ConfigError("d_model must be >= 1");
  if (heads < 1 || d_model % heads != 0) {
    throw ConfigError("heads " + std::to_string(heads) + " must divide d_model " +
                      std::to_string(d_model));
  }
  if (conv_kernel < 1 || conv_kernel % 2 == 0) {
    throw ConfigError("conv_kernel must be odd and positive, got " + std::to_string(conv_kernel));
  }
  if (ffn_expansion < 1) throw ConfigError("ffn_expansion must be >= 1");
}

BlockParams make_block(const ConformerConfig& cfg, Rng& rng) {
  BlockParams b;
  b.ffn1 = make_ffn(cfg.d_model, cfg.ffn_expansion, rng);
  b.mhsa = make_mhsa(cfg.d_model, cfg.heads, rng);
  b.conv = make_conv_module(cfg.d_model, cfg.conv_kernel, rng);
  b.ffn2 = make_ffn(cfg.d_model, cfg.ffn_expansion, rng);
  b.final_norm = make_layernorm(cfg.d_model);
  return b;
}

std::vector<BlockParams> make_encoder(const ConformerConfig& cfg) {
  cfg.validate();
  std::vector<BlockParams> blocks;
  blocks.reserve(static_cast<std::size_t>(cfg.num_blocks));
  for (int i = 0; i < cfg.num_blocks; ++i) {
    Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(i)));
    blocks.push_back(make_block(cfg, rng));
  }
  return blocks;
}

AdapterHooks hooks_for_block(const AdapterSet& set, int block_index) {
  AdapterHooks h;
  h.ffn1 = set.find({block_index, Site::Ffn1});
  h.conv = set.find({block_index, Site::Conv});
  h.ffn2 = set.find({block_index, Site::Ffn2});
  h.after_block = set.find({block_index, Site::AfterBlock});
  return h;
}

namespace {

// x + c*F(x), or the three-path parallel form when an adapter hooks the site.
template <class F>
Var combine(Var x, double c, F&& f, const AdapterParams* hook, ActivationProbe* probe,
            StatsSite site) {
  if (!hook) return add(x, scale(std::forward<F>(f)(x), c));
  return apply_parallel(x, c, std::forward<F>(f), *hook, probe, site);
}

}  // namespace

Var block_forward(const BlockParams& p, Var x, const AdapterHooks& hooks, int block_index,
                  ActivationProbe* probe) {
  if (x.cols() != p.ffn1.pre_norm.gamma.size()) {
    throw DimensionError("block: input " + shape_str(x.value().shape()) + " does not match width " +
                         std::to_string(p.ffn1.pre_norm.gamma.size()));
  }
  Var y1 = combine(
      x, 0.5, [&](Var in) { return ffn_forward(p.ffn1, in, probe, {block_index, StatsSiteKind::Ffn1Inner}); },
      hooks.ffn1, probe, {block_index, StatsSiteKind::AdapterFfn1});
  Var y2 = add(y1, mhsa_forward(p.mhsa, y1));
  Var y3 = combine(
      y2, 1.0, [&](Var in) { return conv_forward(p.conv, in); }, hooks.conv, probe,
      {block_index, StatsSiteKind::AdapterConv});
  Var y4 = combine(
      y3, 0.5, [&](Var in) { return ffn_forward(p.ffn2, in, probe, {block_index, StatsSiteKind::Ffn2Inner}); },
      hooks.ffn2, probe, {block_index, StatsSiteKind::AdapterFfn2});
  return layernorm_forward(p.final_norm, y4);
}

Var encoder_forward(const std::vector<BlockParams>& blocks, Var x, const AdapterSet* adapters,
                    ActivationProbe* probe) {
  Var out = x;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const int bi = static_cast<int>(i);
    AdapterHooks hooks = adapters ? hooks_for_block(*adapters, bi) : AdapterHooks{};
    out = block_forward(blocks[i], out, hooks, bi, probe);
    if (hooks.after_block) {
      out = apply_serial(out, *hooks.after_block, probe, {bi, StatsSiteKind::AdapterAfterBlock});
    }
  }
  return out;
}

void visit_params(BlockParams& p, const std::string& prefix, const ParamVisitor& v) {
  visit_params(p.ffn1, prefix + "/ffn1", v);
  visit_params(p.mhsa, prefix + "/mhsa", v);
  visit_params(p.conv, prefix + "/conv", v);
  visit_params(p.ffn2, prefix + "/ffn2", v);
  visit_params(p.final_norm, prefix + "/final_norm", v);
}

void visit_params(std::vector<BlockParams>& blocks, const std::string& prefix, const ParamVisitor& v) {
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    visit_params(blocks[i], prefix + "/block" + std::to_string(i), v);
  }
}

long long encoder_param_count(const ConformerConfig& cfg) {
  const long long d = cfg.d_model, e = cfg.ffn_expansion, k = cfg.conv_kernel;
  const long long norm = 2 * d;
  const long long ffn = norm + (d * e * d + e * d) + (e * d * d + d);
  const long long mhsa = norm + 4 * (d * d + d);
  const long long conv = norm + (d * 2 * d + 2 * d) + k * d + norm + (d * d + d);
  const long long block = 2 * ffn + mhsa + conv + norm;
  return block * cfg.num_blocks;
}

double adapter_param_fraction(const AdapterSpec& spec, const ConformerConfig& cfg,
                              long long head_params) {
  const long long adapters = count_adapter_params(spec, cfg).total;
  const long long total = encoder_param_count(cfg) + adapters + head_params;
  return total == 0 ? 0.0 : static_cast<double>(adapters) / static_cast<double>(total);
}

}  // namespace tpa
