#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "tpa/layers.hpp"

namespace tpa {

enum class Placement { Serial, ParallelFfn1, Tpa, ParallelConv, None };

std::string to_string(Placement p);
Placement parse_placement(const std::string& name);

enum class BiasInit { Xavier, Zero };

std::string to_string(BiasInit b);
BiasInit parse_bias_init(const std::string& name);

// Structural description of one adapter configuration: where it attaches,
// how wide the bottleneck is, and whether the input is layer-normalised.
// The activation is always ReLU.
struct AdapterSpec {
  Placement placement = Placement::Tpa;
  Index width = 8;
  bool use_layer_norm = false;
  BiasInit bias_init = BiasInit::Xavier;

  // Hook sites required per block.
  std::vector<Site> sites() const;
  void validate() const;
};

// x + up(relu(down(g(x)))): down houses the bottleneck projection, up the
// expansion back to model width. `norm` is g when layer norm is enabled.
struct AdapterParams {
  std::optional<LayerNormParams> norm;
  LinearParams down;  // [d x w]
  LinearParams up;    // [w x d]

  Index dim() const { return down.in(); }
  Index width() const { return down.out(); }
};

// One adapter per required site per block; no sharing across blocks.
struct AdapterSet {
  AdapterSpec spec;
  std::map<InsertionSite, AdapterParams> entries;

  const AdapterParams* find(const InsertionSite& site) const;
};

Var adapter_forward(const AdapterParams& p, Var x, ActivationProbe* probe = nullptr,
                    StatsSite site = {});

// Serial placement: the adapter consumes the block output; its own residual
// carries the block output through.
Var apply_serial(Var block_out, const AdapterParams& p, ActivationProbe* probe = nullptr,
                 StatsSite site = {});

// Parallel placement: sum of the input, the scaled main branch, and the
// adapter branch with the input subtracted so it is not counted twice.
template <class F>
Var apply_parallel(Var x, double c, F&& f, const AdapterParams& p, ActivationProbe* probe = nullptr,
                   StatsSite site = {}) {
  Var main = add(x, scale(std::forward<F>(f)(x), c));
  return add(main, sub(adapter_forward(p, x, probe, site), x));
}

AdapterParams make_adapter(Index d, const AdapterSpec& spec, Rng& rng);

// W_2 all zeros so every adapter starts as the identity map (plus the b_2
// offset when bias_init is Xavier); W_1, b_1, b_2 Xavier-uniform with
// fan_in = vector length, fan_out = 1 for the biases.
AdapterSet build_adapter_set(const AdapterSpec& spec, int num_blocks, Index d_model,
                             std::uint64_t seed);

struct AdapterParamCount {
  long long per_adapter = 0;
  long long total = 0;
};

// Closed-form parameter count: d*w + w + w*d + d per adapter, +2d with layer
// norm; TPA places two adapters per block, the other placements one.
AdapterParamCount count_adapter_params(const AdapterSpec& spec, int num_blocks, Index d_model);

void visit_params(AdapterParams& p, const std::string& prefix, const ParamVisitor& v);
void visit_params(AdapterSet& s, const std::string& prefix, const ParamVisitor& v);

}  // namespace tpa
