#pragma once

#include <functional>
#include <string>

#include "tpa/ops.hpp"
#include "tpa/rng.hpp"
#include "tpa/sites.hpp"

namespace tpa {

inline constexpr double kLayerNormEpsilon = 1e-6;

// Fills a tensor with Xavier-uniform draws, bound sqrt(6 / (fan_in + fan_out)).
void xavier_uniform(Tensor& t, Index fan_in, Index fan_out, Rng& rng);

struct LinearParams {
  Tensor weight;  // [in x out]
  Tensor bias;    // [out]
  Index in() const { return weight.rows(); }
  Index out() const { return weight.cols(); }
};

LinearParams make_linear(Index in, Index out, Rng& rng);

// x.W + b per row.
Var linear_forward(const LinearParams& p, Var x);

struct LayerNormParams {
  Tensor gamma;  // [d]
  Tensor beta;   // [d]
  double epsilon = kLayerNormEpsilon;
};

LayerNormParams make_layernorm(Index d, double epsilon = kLayerNormEpsilon);

// Per-row (x - mean) / sqrt(var + eps) with biased variance, then affine.
Var layernorm_forward(const LayerNormParams& p, Var x);

struct FFNParams {
  LayerNormParams pre_norm;
  LinearParams inner;  // [d x e*d]
  LinearParams outer;  // [e*d x d]
};

FFNParams make_ffn(Index d, Index expansion, Rng& rng);

// outer(swish(inner(pre_norm(x)))); the caller owns the residual and its
// 0.5 coefficient. `probe` observes the pre-swish inner activations.
Var ffn_forward(const FFNParams& p, Var x, ActivationProbe* probe = nullptr, StatsSite site = {});

struct MHSAParams {
  LayerNormParams pre_norm;
  LinearParams query, key, value, output;  // all [d x d]
  int heads = 1;
};

MHSAParams make_mhsa(Index d, int heads, Rng& rng);

// Pre-norm scaled dot-product attention over `heads` slices, residual-free.
Var mhsa_forward(const MHSAParams& p, Var x);

struct ConvModuleParams {
  LayerNormParams pre_norm;
  LinearParams pointwise_in;  // [d x 2d], gated linear unit input
  Tensor depthwise_kernel;    // [k x d], k odd
  LayerNormParams post_norm;
  LinearParams pointwise_out;  // [d x d]
};

ConvModuleParams make_conv_module(Index d, Index kernel, Rng& rng);

// pre_norm -> pointwise 2d -> GLU -> depthwise conv -> norm -> swish ->
// pointwise out; residual-free.
Var conv_forward(const ConvModuleParams& p, Var x);

using ParamVisitor = std::function<void(const std::string&, Tensor&)>;

void visit_params(LinearParams& p, const std::string& prefix, const ParamVisitor& v);
void visit_params(LayerNormParams& p, const std::string& prefix, const ParamVisitor& v);
void visit_params(FFNParams& p, const std::string& prefix, const ParamVisitor& v);
void visit_params(MHSAParams& p, const std::string& prefix, const ParamVisitor& v);
void visit_params(ConvModuleParams& p, const std::string& prefix, const ParamVisitor& v);

}  // namespace tpa
