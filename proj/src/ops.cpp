#include "histmix/ops.h"

#include <Eigen/Core>
#include <cmath>
#include <string>

#include "histmix/errors.h"

namespace histmix {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

constexpr double kDegenerateEps = 1e-12;

void require_rank(const Tensor& t, std::size_t rank, const char* op, const char* arg) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": " + arg + " must have rank " + std::to_string(rank) +
                         ", got shape " + shape_str(t.shape()));
  }
}

// Unfolds [C,H,W] into a [C*kh*kw, Ho*Wo] row-major patch matrix.
void im2col(const double* in, std::size_t c, std::size_t h, std::size_t w, std::size_t kh,
            std::size_t kw, double* cols) {
  const std::size_t ho = h - kh + 1, wo = w - kw + 1;
  for (std::size_t ci = 0; ci < c; ++ci) {
    for (std::size_t ki = 0; ki < kh; ++ki) {
      for (std::size_t kj = 0; kj < kw; ++kj) {
        double* row = cols + ((ci * kh + ki) * kw + kj) * ho * wo;
        for (std::size_t i = 0; i < ho; ++i) {
          const double* src = in + (ci * h + i + ki) * w + kj;
          for (std::size_t j = 0; j < wo; ++j) row[i * wo + j] = src[j];
        }
      }
    }
  }
}

void col2im(const double* cols, std::size_t c, std::size_t h, std::size_t w, std::size_t kh,
            std::size_t kw, double* out) {
  const std::size_t ho = h - kh + 1, wo = w - kw + 1;
  for (std::size_t ci = 0; ci < c; ++ci) {
    for (std::size_t ki = 0; ki < kh; ++ki) {
      for (std::size_t kj = 0; kj < kw; ++kj) {
        const double* row = cols + ((ci * kh + ki) * kw + kj) * ho * wo;
        for (std::size_t i = 0; i < ho; ++i) {
          double* dst = out + (ci * h + i + ki) * w + kj;
          for (std::size_t j = 0; j < wo; ++j) dst[j] += row[i * wo + j];
        }
      }
    }
  }
}

}  // namespace

Var conv2d_valid(Graph& g, Var input, Var kernels) {
  const Tensor& x = g.value(input);
  const Tensor& k = g.value(kernels);
  require_rank(x, 3, "conv2d_valid", "input");
  require_rank(k, 4, "conv2d_valid", "kernels");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t co = k.dim(0), kh = k.dim(2), kw = k.dim(3);
  if (k.dim(1) != c) {
    throw DimensionError("conv2d_valid: kernel input-channel axis (1) is " + std::to_string(k.dim(1)) +
                         " but input channel axis (0) is " + std::to_string(c));
  }
  if (kh > h || kw > w) {
    throw DimensionError("conv2d_valid: kernel spatial axes " + std::to_string(kh) + "x" +
                         std::to_string(kw) + " exceed input spatial axes " + std::to_string(h) +
                         "x" + std::to_string(w));
  }
  const std::size_t ho = h - kh + 1, wo = w - kw + 1, patch = c * kh * kw;

  std::vector<double> cols(patch * ho * wo);
  im2col(x.ptr(), c, h, w, kh, kw, cols.data());
  Tensor out({co, ho, wo});
  MatrixMap(out.ptr(), co, ho * wo).noalias() =
      ConstMatrixMap(k.ptr(), co, patch) * ConstMatrixMap(cols.data(), patch, ho * wo);

  const bool need_cols = g.requires_grad(kernels);
  return g.record(
      std::move(out), {input, kernels},
      [input, kernels, c, h, w, kh, kw, co, ho, wo, patch,
       cols = need_cols ? std::move(cols) : std::vector<double>{}](Graph& gr, const Tensor& dy) {
        ConstMatrixMap dout(dy.ptr(), co, ho * wo);
        if (gr.requires_grad(kernels)) {
          Tensor& dk = gr.grad_buffer(kernels);
          MatrixMap(dk.ptr(), co, patch).noalias() +=
              dout * ConstMatrixMap(cols.data(), patch, ho * wo).transpose();
        }
        if (gr.requires_grad(input)) {
          const Tensor& kv = gr.value(kernels);
          RowMatrix dcols = ConstMatrixMap(kv.ptr(), co, patch).transpose() * dout;
          col2im(dcols.data(), c, h, w, kh, kw, gr.grad_buffer(input).ptr());
        }
      });
}

Var relu(Graph& g, Var x) {
  const Tensor& in = g.value(x);
  Tensor out(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
  return g.record(std::move(out), {x}, [x](Graph& gr, const Tensor& dy) {
    const Tensor& in = gr.value(x);
    Tensor& dx = gr.grad_buffer(x);
    for (std::size_t i = 0; i < in.size(); ++i) {
      if (in[i] > 0.0) dx[i] += dy[i];
    }
  });
}

Var maxpool2(Graph& g, Var x) {
  const Tensor& in = g.value(x);
  require_rank(in, 3, "maxpool2", "input");
  const std::size_t c = in.dim(0), h = in.dim(1), w = in.dim(2);
  if (h < 2 || w < 2) {
    throw DimensionError("maxpool2: spatial axes (1,2) must be >= 2, got " + shape_str(in.shape()));
  }
  const std::size_t ho = h / 2, wo = w / 2;
  Tensor out({c, ho, wo});
  std::vector<std::size_t> argmax(out.size());
  for (std::size_t ci = 0; ci < c; ++ci) {
    for (std::size_t i = 0; i < ho; ++i) {
      for (std::size_t j = 0; j < wo; ++j) {
        std::size_t best = (ci * h + 2 * i) * w + 2 * j;
        for (std::size_t di = 0; di < 2; ++di) {
          for (std::size_t dj = 0; dj < 2; ++dj) {
            const std::size_t idx = (ci * h + 2 * i + di) * w + 2 * j + dj;
            if (in[idx] > in[best]) best = idx;
          }
        }
        const std::size_t o = (ci * ho + i) * wo + j;
        out[o] = in[best];
        argmax[o] = best;
      }
    }
  }
  return g.record(std::move(out), {x}, [x, argmax = std::move(argmax)](Graph& gr, const Tensor& dy) {
    Tensor& dx = gr.grad_buffer(x);
    for (std::size_t o = 0; o < argmax.size(); ++o) dx[argmax[o]] += dy[o];
  });
}

Var avgpool2(Graph& g, Var x) {
  const Tensor& in = g.value(x);
  if (in.rank() != 2 && in.rank() != 3) {
    throw DimensionError("avgpool2: input must be [H,W] or [C,H,W], got " + shape_str(in.shape()));
  }
  const std::size_t r = in.rank();
  const std::size_t c = r == 3 ? in.dim(0) : 1, h = in.dim(r - 2), w = in.dim(r - 1);
  if (h < 2 || w < 2) {
    throw DimensionError("avgpool2: spatial axes must be >= 2, got " + shape_str(in.shape()));
  }
  const std::size_t ho = h / 2, wo = w / 2;
  Tensor out(r == 3 ? Shape{c, ho, wo} : Shape{ho, wo});
  for (std::size_t ci = 0; ci < c; ++ci) {
    for (std::size_t i = 0; i < ho; ++i) {
      for (std::size_t j = 0; j < wo; ++j) {
        const std::size_t base = (ci * h + 2 * i) * w + 2 * j;
        out[(ci * ho + i) * wo + j] = 0.25 * (in[base] + in[base + 1] + in[base + w] + in[base + w + 1]);
      }
    }
  }
  return g.record(std::move(out), {x}, [x, c, h, w, ho, wo](Graph& gr, const Tensor& dy) {
    Tensor& dx = gr.grad_buffer(x);
    for (std::size_t ci = 0; ci < c; ++ci) {
      for (std::size_t i = 0; i < ho; ++i) {
        for (std::size_t j = 0; j < wo; ++j) {
          const double q = 0.25 * dy[(ci * ho + i) * wo + j];
          const std::size_t base = (ci * h + 2 * i) * w + 2 * j;
          dx[base] += q;
          dx[base + 1] += q;
          dx[base + w] += q;
          dx[base + w + 1] += q;
        }
      }
    }
  });
}

Var crop_border(Graph& g, Var x, std::size_t border) {
  const Tensor& in = g.value(x);
  if (in.rank() != 2 && in.rank() != 3) {
    throw DimensionError("crop_border: input must be [H,W] or [C,H,W], got " + shape_str(in.shape()));
  }
  if (border == 0) return x;
  const std::size_t r = in.rank();
  const std::size_t c = r == 3 ? in.dim(0) : 1, h = in.dim(r - 2), w = in.dim(r - 1);
  if (h <= 2 * border || w <= 2 * border) {
    throw DimensionError("crop_border: border " + std::to_string(border) +
                         " leaves no pixels in spatial axes of " + shape_str(in.shape()));
  }
  const std::size_t ho = h - 2 * border, wo = w - 2 * border;
  Tensor out(r == 3 ? Shape{c, ho, wo} : Shape{ho, wo});
  for (std::size_t ci = 0; ci < c; ++ci)
    for (std::size_t i = 0; i < ho; ++i)
      for (std::size_t j = 0; j < wo; ++j)
        out[(ci * ho + i) * wo + j] = in[(ci * h + i + border) * w + j + border];
  return g.record(std::move(out), {x}, [x, c, h, w, ho, wo, border](Graph& gr, const Tensor& dy) {
    Tensor& dx = gr.grad_buffer(x);
    for (std::size_t ci = 0; ci < c; ++ci)
      for (std::size_t i = 0; i < ho; ++i)
        for (std::size_t j = 0; j < wo; ++j)
          dx[(ci * h + i + border) * w + j + border] += dy[(ci * ho + i) * wo + j];
  });
}

Var mul(Graph& g, Var a, Var b) {
  const Tensor& ta = g.value(a);
  const Tensor& tb = g.value(b);
  if (ta.shape() == tb.shape()) {
    Tensor out(ta.shape());
    for (std::size_t i = 0; i < ta.size(); ++i) out[i] = ta[i] * tb[i];
    return g.record(std::move(out), {a, b}, [a, b](Graph& gr, const Tensor& dy) {
      const Tensor& va = gr.value(a);
      const Tensor& vb = gr.value(b);
      if (gr.requires_grad(a)) {
        Tensor& da = gr.grad_buffer(a);
        for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i] * vb[i];
      }
      if (gr.requires_grad(b)) {
        Tensor& db = gr.grad_buffer(b);
        for (std::size_t i = 0; i < dy.size(); ++i) db[i] += dy[i] * va[i];
      }
    });
  }
  if (ta.rank() == 3 && tb.rank() == 2 && ta.dim(1) == tb.dim(0) && ta.dim(2) == tb.dim(1)) {
    const std::size_t c = ta.dim(0), plane = tb.size();
    Tensor out(ta.shape());
    for (std::size_t ci = 0; ci < c; ++ci)
      for (std::size_t p = 0; p < plane; ++p) out[ci * plane + p] = ta[ci * plane + p] * tb[p];
    return g.record(std::move(out), {a, b}, [a, b, c, plane](Graph& gr, const Tensor& dy) {
      const Tensor& va = gr.value(a);
      const Tensor& vb = gr.value(b);
      if (gr.requires_grad(a)) {
        Tensor& da = gr.grad_buffer(a);
        for (std::size_t ci = 0; ci < c; ++ci)
          for (std::size_t p = 0; p < plane; ++p) da[ci * plane + p] += dy[ci * plane + p] * vb[p];
      }
      if (gr.requires_grad(b)) {
        Tensor& db = gr.grad_buffer(b);
        for (std::size_t ci = 0; ci < c; ++ci)
          for (std::size_t p = 0; p < plane; ++p) db[p] += dy[ci * plane + p] * va[ci * plane + p];
      }
    });
  }
  throw DimensionError("mul: cannot broadcast " + shape_str(tb.shape()) + " onto " +
                       shape_str(ta.shape()) + " (spatial axes must match)");
}

Var add(Graph& g, Var a, Var b) {
  const Tensor& ta = g.value(a);
  const Tensor& tb = g.value(b);
  if (ta.shape() != tb.shape()) {
    throw DimensionError("add: shapes " + shape_str(ta.shape()) + " and " + shape_str(tb.shape()) +
                         " differ");
  }
  Tensor out(ta.shape());
  for (std::size_t i = 0; i < ta.size(); ++i) out[i] = ta[i] + tb[i];
  return g.record(std::move(out), {a, b}, [a, b](Graph& gr, const Tensor& dy) {
    gr.accumulate(a, dy);
    gr.accumulate(b, dy);
  });
}

Var scale(Graph& g, Var x, double factor) {
  Tensor out = g.value(x);
  out *= factor;
  return g.record(std::move(out), {x}, [x, factor](Graph& gr, const Tensor& dy) {
    Tensor& dx = gr.grad_buffer(x);
    for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += factor * dy[i];
  });
}

Var channel_sum(Graph& g, Var x) {
  const Tensor& in = g.value(x);
  require_rank(in, 3, "channel_sum", "input");
  const std::size_t c = in.dim(0), plane = in.dim(1) * in.dim(2);
  Tensor out({c});
  for (std::size_t ci = 0; ci < c; ++ci) {
    double s = 0.0;
    for (std::size_t p = 0; p < plane; ++p) s += in[ci * plane + p];
    out[ci] = s;
  }
  return g.record(std::move(out), {x}, [x, c, plane](Graph& gr, const Tensor& dy) {
    Tensor& dx = gr.grad_buffer(x);
    for (std::size_t ci = 0; ci < c; ++ci)
      for (std::size_t p = 0; p < plane; ++p) dx[ci * plane + p] += dy[ci];
  });
}

Var sum(Graph& g, Var x) {
  const Tensor& in = g.value(x);
  double s = 0.0;
  for (double v : in.data()) s += v;
  return g.record(Tensor::scalar(s), {x}, [x](Graph& gr, const Tensor& dy) {
    Tensor& dx = gr.grad_buffer(x);
    const double d = dy[0];
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += d;
  });
}

Var div_scalar(Graph& g, Var x, Var s) {
  const Tensor& ts = g.value(s);
  if (!ts.is_scalar()) throw DimensionError("div_scalar: divisor must be scalar, got " + shape_str(ts.shape()));
  const double d = ts[0];
  if (std::abs(d) < kDegenerateEps) {
    throw DegenerateError("div_scalar: degenerate denominator " + std::to_string(d));
  }
  Tensor out = g.value(x);
  out *= 1.0 / d;
  return g.record(std::move(out), {x, s}, [x, s, d](Graph& gr, const Tensor& dy) {
    if (gr.requires_grad(x)) {
      Tensor& dx = gr.grad_buffer(x);
      for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i] / d;
    }
    if (gr.requires_grad(s)) {
      const Tensor& vx = gr.value(x);
      double acc = 0.0;
      for (std::size_t i = 0; i < dy.size(); ++i) acc += dy[i] * vx[i];
      gr.grad_buffer(s)[0] -= acc / (d * d);
    }
  });
}

Var concat(Graph& g, std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  std::vector<double> data;
  std::vector<std::size_t> offsets;
  for (Var p : parts) {
    const Tensor& t = g.value(p);
    require_rank(t, 1, "concat", "part");
    offsets.push_back(data.size());
    data.insert(data.end(), t.data().begin(), t.data().end());
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return g.record(Tensor::vector(std::move(data)), inputs,
                  [inputs, offsets](Graph& gr, const Tensor& dy) {
                    for (std::size_t k = 0; k < inputs.size(); ++k) {
                      if (!gr.requires_grad(inputs[k])) continue;
                      Tensor& dx = gr.grad_buffer(inputs[k]);
                      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[offsets[k] + i];
                    }
                  });
}

Var cosine_similarity(Graph& g, Var a, Var b) {
  const Tensor& ta = g.value(a);
  const Tensor& tb = g.value(b);
  require_rank(ta, 1, "cosine_similarity", "a");
  require_rank(tb, 1, "cosine_similarity", "b");
  if (ta.size() != tb.size()) {
    throw DimensionError("cosine_similarity: lengths " + std::to_string(ta.size()) + " and " +
                         std::to_string(tb.size()) + " differ on axis 0");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < ta.size(); ++i) {
    dot += ta[i] * tb[i];
    na += ta[i] * ta[i];
    nb += tb[i] * tb[i];
  }
  na = std::sqrt(na);
  nb = std::sqrt(nb);
  if (na < kDegenerateEps || nb < kDegenerateEps) {
    throw DegenerateError("cosine_similarity: degenerate vector norm");
  }
  const double cos = dot / (na * nb);
  return g.record(Tensor::scalar(cos), {a, b}, [a, b, na, nb, cos](Graph& gr, const Tensor& dy) {
    const Tensor& va = gr.value(a);
    const Tensor& vb = gr.value(b);
    const double d = dy[0];
    // d cos / d a = b/(|a||b|) - cos * a/|a|^2
    if (gr.requires_grad(a)) {
      Tensor& da = gr.grad_buffer(a);
      for (std::size_t i = 0; i < va.size(); ++i) da[i] += d * (vb[i] / (na * nb) - cos * va[i] / (na * na));
    }
    if (gr.requires_grad(b)) {
      Tensor& db = gr.grad_buffer(b);
      for (std::size_t i = 0; i < vb.size(); ++i) db[i] += d * (va[i] / (na * nb) - cos * vb[i] / (nb * nb));
    }
  });
}

}  // namespace histmix
