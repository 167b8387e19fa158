#include "tpa/adapters.hpp"

namespace tpa {

std::string to_string(Placement p) {
  switch (p) {
    case Placement::Serial: return "serial";
    case Placement::ParallelFfn1: return "parallel";
    case Placement::Tpa: return "tpa";
    case Placement::ParallelConv: return "conv";
    case Placement::None: return "none";
  }
  throw ConfigError("unknown placement");
}

Placement parse_placement(const std::string& name) {
  if (name == "serial") return Placement::Serial;
  if (name == "parallel") return Placement::ParallelFfn1;
  if (name == "tpa") return Placement::Tpa;
  if (name == "conv") return Placement::ParallelConv;
  if (name == "none") return Placement::None;
  throw ConfigError("unknown adapter placement: " + name);
}

std::string to_string(BiasInit b) { return b == BiasInit::Xavier ? "xavier" : "zero"; }

BiasInit parse_bias_init(const std::string& name) {
  if (name == "xavier") return BiasInit::Xavier;
  if (name == "zero") return BiasInit::Zero;
  throw ConfigError("unknown bias init: " + name);
}

std::vector<Site> AdapterSpec::sites() const {
  switch (placement) {
    case Placement::Serial: return {Site::AfterBlock};
    case Placement::ParallelFfn1: return {Site::Ffn1};
    case Placement::Tpa: return {Site::Ffn1, Site::Ffn2};
    case Placement::ParallelConv: return {Site::Conv};
    case Placement::None: return {};
  }
  throw ConfigError("unknown placement");
}

void AdapterSpec::validate() const {
  if (placement != Placement::None && width < 1) {
    throw ConfigError("adapter width must be >= 1, got " + std::to_string(width));
  }
}

const AdapterParams* AdapterSet::find(const InsertionSite& site) const {
  auto it = entries.find(site);
  return it == entries.end() ? nullptr : &it->second;
}

Var adapter_forward(const AdapterParams& p, Var x, ActivationProbe* probe, StatsSite site) {
  if (x.cols() != p.dim()) {
    throw DimensionError("adapter: input " + shape_str(x.shape()) + " does not match down projection " +
                         shape_str(p.down.weight.shape()));
  }
  Tape& t = x.tape();
  if (p.width() == 0) {
    // fully pruned bottleneck: only the b_2 offset remains
    return add_rowwise(x, t.leaf(p.up.bias));
  }
  Var g = p.norm ? layernorm_forward(*p.norm, x) : x;
  Var pre = linear_forward(p.down, g);
  if (probe) probe->record(site, pre.value());
  return add(x, linear_forward(p.up, relu(pre)));
}

Var apply_serial(Var block_out, const AdapterParams& p, ActivationProbe* probe, StatsSite site) {
  return adapter_forward(p, block_out, probe, site);
}

AdapterParams make_adapter(Index d, const AdapterSpec& spec, Rng& rng) {
  AdapterParams p;
  if (spec.use_layer_norm) p.norm = make_layernorm(d);
  p.down = LinearParams{Tensor({d, spec.width}), Tensor({spec.width})};
  p.up = LinearParams{Tensor({spec.width, d}), Tensor({d})};
  xavier_uniform(p.down.weight, d, spec.width, rng);
  if (spec.bias_init == BiasInit::Xavier) {
    xavier_uniform(p.down.bias, spec.width, 1, rng);
    xavier_uniform(p.up.bias, d, 1, rng);
  }
  // up.weight stays all-zero: the adapter starts as the identity map
  p.down.weight.set_requires_grad(true);
  p.down.bias.set_requires_grad(true);
  p.up.weight.set_requires_grad(true);
  p.up.bias.set_requires_grad(true);
  return p;
}

AdapterSet build_adapter_set(const AdapterSpec& spec, int num_blocks, Index d_model,
                             std::uint64_t seed) {
  spec.validate();
  AdapterSet set;
  set.spec = spec;
  for (int b = 0; b < num_blocks; ++b) {
    for (Site site : spec.sites()) {
      Rng rng(mix_seed(seed, static_cast<std::uint64_t>(b), static_cast<std::uint64_t>(site)));
      set.entries.emplace(InsertionSite{b, site}, make_adapter(d_model, spec, rng));
    }
  }
  return set;
}

AdapterParamCount count_adapter_params(const AdapterSpec& spec, int num_blocks, Index d_model) {
  const long long d = d_model, w = spec.width;
  AdapterParamCount c;
  if (spec.placement == Placement::None) return c;
  c.per_adapter = d * w + w + w * d + d + (spec.use_layer_norm ? 2 * d : 0);
  const long long per_block = spec.placement == Placement::Tpa ? 2 * c.per_adapter : c.per_adapter;
  c.total = per_block * num_blocks;
  return c;
}

void visit_params(AdapterParams& p, const std::string& prefix, const ParamVisitor& v) {
  if (p.norm) visit_params(*p.norm, prefix + "/norm", v);
  visit_params(p.down, prefix + "/down", v);
  visit_params(p.up, prefix + "/up", v);
}

void visit_params(AdapterSet& s, const std::string& prefix, const ParamVisitor& v) {
  for (auto& [site, params] : s.entries) {
    visit_params(params, prefix + "/block" + std::to_string(site.block_index) + "/" + to_string(site.site),
                 v);
  }
}

}  // namespace tpa
