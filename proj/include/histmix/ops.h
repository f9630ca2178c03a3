#pragma once

#include <span>

#include "histmix/graph.h"

namespace histmix {

// Differentiable primitives. Each op validates shapes and throws
// DimensionError naming the offending axes.

// Valid cross-correlation (no kernel flip), stride 1, no padding.
// input [C_in,H,W], kernels [C_out,C_in,kh,kw] -> [C_out,H-kh+1,W-kw+1].
Var conv2d_valid(Graph& g, Var input, Var kernels);

// max(0, x); the subgradient at 0 is 0.
Var relu(Graph& g, Var x);

// 2x2 non-overlapping max over the last two axes of a [C,H,W] tensor. An odd
// trailing row/column is dropped; ties route the gradient to the first
// element in row-major window order.
Var maxpool2(Graph& g, Var x);

// 2x2 non-overlapping mean over the last two axes of [H,W] or [C,H,W].
Var avgpool2(Graph& g, Var x);

// Removes `border` rows/columns from every side of the trailing two axes.
Var crop_border(Graph& g, Var x, std::size_t border);

// Elementwise product. `b` may equal `a`'s shape or be [H,W] broadcast over
// the leading channel axis of a [C,H,W] `a`.
Var mul(Graph& g, Var a, Var b);
Var add(Graph& g, Var a, Var b);
Var scale(Graph& g, Var x, double factor);

// [C,H,W] -> [C], spatial sum per channel.
Var channel_sum(Graph& g, Var x);
// Sum of all elements -> scalar.
Var sum(Graph& g, Var x);
// x / s for a scalar node s. |s| < 1e-12 raises DegenerateError.
Var div_scalar(Graph& g, Var x, Var s);
// Concatenates rank-1 tensors.
Var concat(Graph& g, std::span<const Var> parts);

// a.b / (|a||b|) for rank-1 tensors of equal length. A norm below 1e-12
// raises DegenerateError.
Var cosine_similarity(Graph& g, Var a, Var b);

}  // namespace histmix
