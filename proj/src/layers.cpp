#include "tpa/layers.hpp"

#include <cmath>

namespace tpa {

void xavier_uniform(Tensor& t, Index fan_in, Index fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (Index i = 0; i < t.size(); ++i) t(i) = rng.uniform(-bound, bound);
}

LinearParams make_linear(Index in, Index out, Rng& rng) {
  LinearParams p{Tensor({in, out}), Tensor({out})};
  xavier_uniform(p.weight, in, out, rng);
  p.weight.set_requires_grad(true);
  p.bias.set_requires_grad(true);
  return p;
}

Var linear_forward(const LinearParams& p, Var x) {
  if (x.cols() != p.in()) {
    throw DimensionError("linear: input " + shape_str(x.shape()) + " does not match weight " +
                         shape_str(p.weight.shape()));
  }
  Tape& t = x.tape();
  return add_rowwise(matmul(x, t.leaf(p.weight)), t.leaf(p.bias));
}

LayerNormParams make_layernorm(Index d, double epsilon) {
  LayerNormParams p{Tensor::full({d}, 1.0), Tensor({d}), epsilon};
  p.gamma.set_requires_grad(true);
  p.beta.set_requires_grad(true);
  return p;
}

Var layernorm_forward(const LayerNormParams& p, Var x) {
  if (x.cols() != p.gamma.size()) {
    throw DimensionError("layernorm: input " + shape_str(x.shape()) + " does not match gamma " +
                         shape_str(p.gamma.shape()));
  }
  Tape& t = x.tape();
  Var centered = sub_colwise(x, row_mean(x));
  Var inv_std = rsqrt(add_scalar(row_var(x), p.epsilon));
  Var normed = mul_colwise(centered, inv_std);
  return add_rowwise(mul_rowwise(normed, t.leaf(p.gamma)), t.leaf(p.beta));
}

FFNParams make_ffn(Index d, Index expansion, Rng& rng) {
  if (expansion < 1) throw ConfigError("ffn expansion must be >= 1");
  FFNParams p;
  p.pre_norm = make_layernorm(d);
  p.inner = make_linear(d, expansion * d, rng);
  p.outer = make_linear(expansion * d, d, rng);
  return p;
}

Var ffn_forward(const FFNParams& p, Var x, ActivationProbe* probe, StatsSite site) {
  Var pre = linear_forward(p.inner, layernorm_forward(p.pre_norm, x));
  if (probe) probe->record(site, pre.value());
  return linear_forward(p.outer, swish(pre));
}

MHSAParams make_mhsa(Index d, int heads, Rng& rng) {
  if (heads < 1 || d % heads != 0) {
    throw ConfigError("attention heads " + std::to_string(heads) + " must divide width " +
                      std::to_string(d));
  }
  MHSAParams p;
  p.pre_norm = make_layernorm(d);
  p.query = make_linear(d, d, rng);
  p.key = make_linear(d, d, rng);
  p.value = make_linear(d, d, rng);
  p.output = make_linear(d, d, rng);
  p.heads = heads;
  return p;
}

Var mhsa_forward(const MHSAParams& p, Var x) {
  const Index d = p.query.in();
  if (p.heads < 1 || d % p.heads != 0) {
    throw ConfigError("attention heads " + std::to_string(p.heads) + " must divide width " +
                      std::to_string(d));
  }
  Var n = layernorm_forward(p.pre_norm, x);
  Var q = linear_forward(p.query, n);
  Var k = linear_forward(p.key, n);
  Var v = linear_forward(p.value, n);

  const Index head_dim = d / p.heads;
  const double att_scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
  std::vector<Var> heads;
  heads.reserve(static_cast<std::size_t>(p.heads));
  for (int h = 0; h < p.heads; ++h) {
    const Index lo = h * head_dim, hi = lo + head_dim;
    Var qh = slice_cols(q, lo, hi);
    Var kh = slice_cols(k, lo, hi);
    Var vh = slice_cols(v, lo, hi);
    Var attn = softmax(scale(matmul(qh, transpose(kh)), att_scale));
    heads.push_back(matmul(attn, vh));
  }
  return linear_forward(p.output, p.heads == 1 ? heads[0] : concat_cols(heads));
}

ConvModuleParams make_conv_module(Index d, Index kernel, Rng& rng) {
  if (kernel % 2 == 0) throw ConfigError("conv kernel " + std::to_string(kernel) + " must be odd");
  ConvModuleParams p;
  p.pre_norm = make_layernorm(d);
  p.pointwise_in = make_linear(d, 2 * d, rng);
  p.depthwise_kernel = Tensor({kernel, d});
  xavier_uniform(p.depthwise_kernel, kernel, 1, rng);
  p.depthwise_kernel.set_requires_grad(true);
  p.post_norm = make_layernorm(d);
  p.pointwise_out = make_linear(d, d, rng);
  return p;
}

Var conv_forward(const ConvModuleParams& p, Var x) {
  if (p.depthwise_kernel.rows() % 2 == 0) {
    throw ConfigError("conv kernel " + std::to_string(p.depthwise_kernel.rows()) + " must be odd");
  }
  const Index d = x.cols();
  Tape& t = x.tape();
  Var h = linear_forward(p.pointwise_in, layernorm_forward(p.pre_norm, x));
  Var gated = mul(slice_cols(h, 0, d), sigmoid(slice_cols(h, d, 2 * d)));
  Var conv = depthwise_conv1d(gated, t.leaf(p.depthwise_kernel));
  return linear_forward(p.pointwise_out, swish(layernorm_forward(p.post_norm, conv)));
}

void visit_params(LinearParams& p, const std::string& prefix, const ParamVisitor& v) {
  v(prefix + "/weight", p.weight);
  v(prefix + "/bias", p.bias);
}

void visit_params(LayerNormParams& p, const std::string& prefix, const ParamVisitor& v) {
  v(prefix + "/gamma", p.gamma);
  v(prefix + "/beta", p.beta);
}

void visit_params(FFNParams& p, const std::string& prefix, const ParamVisitor& v) {
  visit_params(p.pre_norm, prefix + "/pre_norm", v);
  visit_params(p.inner, prefix + "/inner", v);
  visit_params(p.outer, prefix + "/outer", v);
}

void visit_params(MHSAParams& p, const std::string& prefix, const ParamVisitor& v) {
  visit_params(p.pre_norm, prefix + "/pre_norm", v);
  visit_params(p.query, prefix + "/query", v);
  visit_params(p.key, prefix + "/key", v);
  visit_params(p.value, prefix + "/value", v);
  visit_params(p.output, prefix + "/output", v);
}

void visit_params(ConvModuleParams& p, const std::string& prefix, const ParamVisitor& v) {
  visit_params(p.pre_norm, prefix + "/pre_norm", v);
  visit_params(p.pointwise_in, prefix + "/pointwise_in", v);
  v(prefix + "/depthwise_kernel", p.depthwise_kernel);
  visit_params(p.post_norm, prefix + "/post_norm", v);
  visit_params(p.pointwise_out, prefix + "/pointwise_out", v);
}

}  // namespace tpa
