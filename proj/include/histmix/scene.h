#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "histmix/graph.h"
#include "histmix/rng.h"

namespace histmix {

// Latent code; the categorical factors are stored as their hot index.
struct LatentCode {
  std::size_t x = 0;                 // shape
  std::size_t y = 0;                 // appearance
  std::size_t b = 0;                 // background
  std::array<double, 2> z{0.0, 0.0};  // pose: (horizontal, vertical) offset in image extents

  friend bool operator==(const LatentCode&, const LatentCode&) = default;
};

inline constexpr double kPoseRange = 0.2;

struct DatasetSpec {
  std::size_t n_x = 4;
  std::size_t n_y = 8;
  std::size_t n_b = 2;
};

/// Two-domain partition of the code indices. Domain A holds the first
/// ceil(N_x/2) shapes (rounded), domain B the rest (boxy). Appearance y is
/// owned by shape y / (N_y / N_x), which is the hierarchy used for
/// in-distribution sampling.
struct DomainPartition {
  DatasetSpec spec;
  std::vector<std::size_t> x_a, y_a, x_b, y_b;
  std::vector<std::size_t> parent;  // y -> owning x

  bool x_in_a(std::size_t x) const;
  bool y_in_a(std::size_t y) const;
  // True when shape and appearance come from different domains.
  bool is_hybrid(std::size_t x, std::size_t y) const;
  // Shapes of the domain that does not contain `x`.
  const std::vector<std::size_t>& other_domain_shapes(std::size_t x) const;
};

// Throws ConfigError unless N_x >= 2, N_y >= 2, N_b >= 1, N_x < N_y and
// N_y is a multiple of N_x.
DomainPartition make_two_domain_dataset(const DatasetSpec& spec);

std::array<double, 2> sample_pose(Rng& rng);
// y uniform, x = parent(y), b uniform, z uniform in the pose range.
LatentCode sample_in_distribution(const DomainPartition& partition, Rng& rng);

struct ShapeParams {
  double exponent = 2.0;    // superellipse exponent n
  double half_width = 0.2;  // a, in image extents; <= 0 renders an empty mask
  double half_height = 0.2; // c
};

// Column layout of one appearance row.
namespace appearance {
inline constexpr std::size_t kColorA = 0;  // 3 logits
inline constexpr std::size_t kColorB = 3;  // 3 logits
inline constexpr std::size_t kFrequency = 6;
inline constexpr std::size_t kOrientation = 7;
inline constexpr std::size_t kWidth = 8;
}  // namespace appearance

/// Analytic generator parameters. Only `appearance` is trainable; shapes and
/// backgrounds are fixed by the partition.
struct SceneParams {
  Parameter appearance;  // [N_y, 8]: colour logits (squashed by a sigmoid), stripe frequency, orientation
  std::vector<ShapeParams> shapes;                // per x
  std::vector<std::array<double, 3>> backgrounds;  // per b, RGB in [0,1]
  double sharpness = 20.0;
};

SceneParams init_scene_params(const DomainPartition& partition, std::uint64_t seed);

struct RenderOutput {
  Tensor image;  // [3,H,W] in [0,1]
  Tensor mask;   // [H,W] in [0,1]
};

// Soft superellipse mask for shape x at pose z.
Tensor render_mask(const ShapeParams& shape, const std::array<double, 2>& z, double sharpness,
                   std::size_t height, std::size_t width);

/// image = mask * foreground + (1 - mask) * background. The mask depends on
/// (x, z); the foreground is a two-colour cosine stripe field in
/// object-centred coordinates from y's row; the background is b's colour.
/// Requires height, width >= 32.
RenderOutput render(const LatentCode& code, const SceneParams& params, std::size_t height,
                    std::size_t width);

struct RenderVars {
  Var image;  // differentiable w.r.t. the appearance variable
  Var mask;   // constant
};

// Graph version; `appearance` must hold `params.appearance.value`.
RenderVars render(Graph& g, Var appearance, const LatentCode& code, const SceneParams& params,
                  std::size_t height, std::size_t width);

}  // namespace histmix
