#pragma once

#include <vector>

#include "tpa/tape.hpp"

namespace tpa {

// Differentiable tensor operations. Each records itself on the tape of its
// inputs with the matching backward rule. Reductions run in fixed
// left-to-right order so equality tests can use tight tolerances.

// [m x k] . [k x n] -> [m x n]; a rank-1 left operand stays rank-1.
Var matmul(Var a, Var b);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);

Var scale(Var a, double c);
Var add_scalar(Var a, double c);

Var relu(Var a);
Var sigmoid(Var a);
Var swish(Var a);
Var rsqrt(Var a);

// Softmax over the last axis of a rank-1 or rank-2 tensor.
Var softmax(Var a);

// Per-row mean / biased variance of a [T x d] tensor -> [T x 1].
Var row_mean(Var a);
Var row_var(Var a);

Var transpose(Var a);
Var reshape(Var a, std::vector<Index> shape);

Var concat_cols(const std::vector<Var>& parts);
Var slice_cols(Var a, Index begin, Index end);

// Broadcast a length-d vector across every row of [T x d].
Var add_rowwise(Var x, Var v);
Var mul_rowwise(Var x, Var v);

// Broadcast a [T x 1] column across every column of [T x d].
Var sub_colwise(Var x, Var c);
Var mul_colwise(Var x, Var c);

Var sum_all(Var a);
Var mean_all(Var a);

// Per-channel 1-d convolution with zero same-padding; kernel is [k x d], k odd.
Var depthwise_conv1d(Var x, Var kernel);

// Mean cross-entropy of [T x C] logits against one label per row.
Var cross_entropy_mean(Var logits, const std::vector<int>& labels);

// Forward-only helpers.
std::vector<int> argmax_rows(const Tensor& t);

}  // namespace tpa
