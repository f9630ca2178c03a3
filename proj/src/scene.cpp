#include "histmix/scene.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "histmix/errors.h"

namespace histmix {
namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void check_code(const LatentCode& code, const SceneParams& params) {
  if (code.x >= params.shapes.size()) throw DimensionError("latent code: shape index out of range");
  if (code.y >= params.appearance.value.dim(0)) throw DimensionError("latent code: appearance index out of range");
  if (code.b >= params.backgrounds.size()) throw DimensionError("latent code: background index out of range");
}

void check_size(std::size_t height, std::size_t width) {
  if (height < 32 || width < 32) {
    throw DimensionError("render: height and width must be >= 32, got " + std::to_string(height) + "x" +
                         std::to_string(width));
  }
}

double pixel_coord(std::size_t i, std::size_t n) { return (static_cast<double>(i) + 0.5) / static_cast<double>(n) - 0.5; }

struct Stripe {
  double t;      // blend weight of colour A
  double dt_df;  // d t / d frequency
  double dt_dth; // d t / d orientation
};

Stripe stripe(double u, double v, double freq, double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  const double proj = c * u + s * v;
  const double phase = 2.0 * std::numbers::pi * freq * proj;
  const double sn = std::sin(phase);
  return {0.5 + 0.5 * std::cos(phase), -0.5 * sn * 2.0 * std::numbers::pi * proj,
          -0.5 * sn * 2.0 * std::numbers::pi * freq * (-s * u + c * v)};
}

}  // namespace

bool DomainPartition::x_in_a(std::size_t x) const {
  return std::find(x_a.begin(), x_a.end(), x) != x_a.end();
}

bool DomainPartition::y_in_a(std::size_t y) const {
  return std::find(y_a.begin(), y_a.end(), y) != y_a.end();
}

bool DomainPartition::is_hybrid(std::size_t x, std::size_t y) const { return x_in_a(x) != y_in_a(y); }

const std::vector<std::size_t>& DomainPartition::other_domain_shapes(std::size_t x) const {
  return x_in_a(x) ? x_b : x_a;
}

DomainPartition make_two_domain_dataset(const DatasetSpec& spec) {
  if (spec.n_x < 2) throw ConfigError("n_x", "need at least 2 shape codes");
  if (spec.n_y < 2) throw ConfigError("n_y", "need at least 2 appearance codes");
  if (spec.n_b < 1) throw ConfigError("n_b", "need at least 1 background code");
  if (spec.n_x >= spec.n_y) throw ConfigError("n_x", "hierarchy requires n_x < n_y");
  if (spec.n_y % spec.n_x != 0) throw ConfigError("n_y", "must be a multiple of n_x");

  DomainPartition p;
  p.spec = spec;
  const std::size_t per_x = spec.n_y / spec.n_x;
  const std::size_t split = (spec.n_x + 1) / 2;
  for (std::size_t x = 0; x < spec.n_x; ++x) (x < split ? p.x_a : p.x_b).push_back(x);
  for (std::size_t y = 0; y < spec.n_y; ++y) {
    const std::size_t parent = y / per_x;
    p.parent.push_back(parent);
    (parent < split ? p.y_a : p.y_b).push_back(y);
  }
  return p;
}

std::array<double, 2> sample_pose(Rng& rng) {
  const double u = rng.uniform(-kPoseRange, kPoseRange);
  const double v = rng.uniform(-kPoseRange, kPoseRange);
  return {u, v};
}

LatentCode sample_in_distribution(const DomainPartition& partition, Rng& rng) {
  LatentCode code;
  code.y = rng.index(partition.spec.n_y);
  code.x = partition.parent[code.y];
  code.b = rng.index(partition.spec.n_b);
  code.z = sample_pose(rng);
  return code;
}

SceneParams init_scene_params(const DomainPartition& partition, std::uint64_t seed) {
  const DatasetSpec& spec = partition.spec;
  SceneParams params;

  // Domain A: rounded and tall; domain B: boxy and wide (mirrored extents).
  auto place = [&](const std::vector<std::size_t>& xs, bool boxy) {
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double f = xs.size() > 1 ? static_cast<double>(i) / static_cast<double>(xs.size() - 1) : 0.0;
      const double narrow = 0.13 + 0.04 * f;
      const double wide = 0.28 - 0.04 * f;
      params.shapes[xs[i]] = boxy ? ShapeParams{6.0, wide, narrow} : ShapeParams{2.0, narrow, wide};
    }
  };
  params.shapes.resize(spec.n_x);
  place(partition.x_a, false);
  place(partition.x_b, true);

  for (std::size_t b = 0; b < spec.n_b; ++b) {
    const double level =
        spec.n_b > 1 ? 0.15 + 0.7 * static_cast<double>(b) / static_cast<double>(spec.n_b - 1) : 0.5;
    params.backgrounds.push_back({level, level, level});
  }

  Rng rng(seed);
  Tensor app({spec.n_y, appearance::kWidth});
  for (std::size_t y = 0; y < spec.n_y; ++y) {
    for (std::size_t c = 0; c < 3; ++c) {
      const double logit = rng.uniform(-2.0, 2.0);
      app.at(y, appearance::kColorA + c) = logit;
      app.at(y, appearance::kColorB + c) = -logit + rng.uniform(-0.5, 0.5);
    }
    app.at(y, appearance::kFrequency) = rng.uniform(0.8, 1.2);
    app.at(y, appearance::kOrientation) = rng.uniform(-0.15, 0.15);
  }
  params.appearance = Parameter(std::move(app));
  return params;
}

Tensor render_mask(const ShapeParams& shape, const std::array<double, 2>& z, double sharpness,
                   std::size_t height, std::size_t width) {
  Tensor mask({height, width});
  if (shape.half_width <= 0.0 || shape.half_height <= 0.0) return mask;
  for (std::size_t i = 0; i < height; ++i) {
    const double v = pixel_coord(i, height) - z[1];
    const double rv = std::pow(std::abs(v / shape.half_height), shape.exponent);
    for (std::size_t j = 0; j < width; ++j) {
      const double u = pixel_coord(j, width) - z[0];
      const double r = std::pow(std::abs(u / shape.half_width), shape.exponent) + rv;
      mask.at(i, j) = sigmoid(sharpness * (1.0 - r));
    }
  }
  return mask;
}

RenderOutput render(const LatentCode& code, const SceneParams& params, std::size_t height, std::size_t width) {
  Graph g;
  const RenderVars vars = render(g, g.constant(params.appearance.value), code, params, height, width);
  return {g.value(vars.image), g.value(vars.mask)};
}

RenderVars render(Graph& g, Var appearance_var, const LatentCode& code, const SceneParams& params,
                  std::size_t height, std::size_t width) {
  check_size(height, width);
  check_code(code, params);
  const Tensor& app = g.value(appearance_var);
  if (app.rank() != 2 || app.dim(1) != appearance::kWidth) {
    throw DimensionError("render: appearance must be [N_y, 8], got " + shape_str(app.shape()));
  }
  const std::size_t y = code.y;
  Tensor mask = render_mask(params.shapes[code.x], code.z, params.sharpness, height, width);

  std::array<double, 3> ca{}, cb{};
  for (std::size_t c = 0; c < 3; ++c) {
    ca[c] = sigmoid(app.at(y, appearance::kColorA + c));
    cb[c] = sigmoid(app.at(y, appearance::kColorB + c));
  }
  const double freq = app.at(y, appearance::kFrequency);
  const double theta = app.at(y, appearance::kOrientation);
  const auto& bg = params.backgrounds[code.b];
  const std::size_t plane = height * width;

  Tensor image({3, height, width});
  for (std::size_t i = 0; i < height; ++i) {
    const double v = pixel_coord(i, height) - code.z[1];
    for (std::size_t j = 0; j < width; ++j) {
      const double u = pixel_coord(j, width) - code.z[0];
      const double t = stripe(u, v, freq, theta).t;
      const double m = mask.at(i, j);
      for (std::size_t c = 0; c < 3; ++c) {
        const double fg = ca[c] * t + cb[c] * (1.0 - t);
        image[c * plane + i * width + j] = m * fg + (1.0 - m) * bg[c];
      }
    }
  }

  const Var mask_var = g.constant(mask);
  const Var image_var = g.record(
      std::move(image), {appearance_var},
      [appearance_var, mask_var, y, ca, cb, freq, theta, height, width, plane, z = code.z](
          Graph& gr, const Tensor& dy) {
        const Tensor& m = gr.value(mask_var);
        Tensor& da = gr.grad_buffer(appearance_var);
        const std::size_t row = y * appearance::kWidth;
        std::array<double, 3> acc_a{}, acc_b{};
        double acc_f = 0.0, acc_th = 0.0;
        for (std::size_t i = 0; i < height; ++i) {
          const double v = pixel_coord(i, height) - z[1];
          for (std::size_t j = 0; j < width; ++j) {
            const double mv = m.at(i, j);
            if (mv == 0.0) continue;
            const double u = pixel_coord(j, width) - z[0];
            const Stripe st = stripe(u, v, freq, theta);
            double dt = 0.0;
            for (std::size_t c = 0; c < 3; ++c) {
              const double gpix = dy[c * plane + i * width + j] * mv;
              acc_a[c] += gpix * st.t;
              acc_b[c] += gpix * (1.0 - st.t);
              dt += gpix * (ca[c] - cb[c]);
            }
            acc_f += dt * st.dt_df;
            acc_th += dt * st.dt_dth;
          }
        }
        for (std::size_t c = 0; c < 3; ++c) {
          da[row + appearance::kColorA + c] += acc_a[c] * ca[c] * (1.0 - ca[c]);
          da[row + appearance::kColorB + c] += acc_b[c] * cb[c] * (1.0 - cb[c]);
        }
        da[row + appearance::kFrequency] += acc_f;
        da[row + appearance::kOrientation] += acc_th;
      });
  return {image_var, mask_var};
}

}  // namespace histmix
