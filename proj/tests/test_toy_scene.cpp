#include <gtest/gtest.h>

#include <cmath>

#include "histmix/errors.h"
#include "histmix/histogram.h"
#include "histmix/scene.h"

using namespace histmix;

namespace {

struct World {
  DomainPartition part = make_two_domain_dataset({4, 8, 2});
  SceneParams scene = init_scene_params(part, 5);
};

double centroid_u(const Tensor& mask) {
  double s = 0.0, su = 0.0;
  for (std::size_t i = 0; i < mask.dim(0); ++i)
    for (std::size_t j = 0; j < mask.dim(1); ++j) {
      s += mask.at(i, j);
      su += mask.at(i, j) * (static_cast<double>(j) + 0.5);
    }
  return su / s;
}

std::vector<double> normalized(std::vector<double> h) {
  double s = 0.0;
  for (double v : h) s += v;
  for (double& v : h) v /= s;
  return h;
}

}  // namespace

TEST(Dataset, GroupingAndDomains) {
  const auto p = make_two_domain_dataset({4, 8, 2});
  for (std::size_t x = 0; x < 4; ++x) {
    std::size_t owned = 0;
    for (std::size_t y = 0; y < 8; ++y) owned += p.parent[y] == x;
    EXPECT_EQ(owned, 2u);
  }
  EXPECT_EQ(p.x_a.size() + p.x_b.size(), 4u);
  EXPECT_EQ(p.y_a.size() + p.y_b.size(), 8u);
  for (std::size_t y : p.y_a) EXPECT_TRUE(p.x_in_a(p.parent[y]));
  for (std::size_t y : p.y_b) EXPECT_FALSE(p.x_in_a(p.parent[y]));
  EXPECT_TRUE(p.is_hybrid(p.x_a[0], p.y_b[0]));
  EXPECT_FALSE(p.is_hybrid(p.x_a[0], p.y_a[0]));
}

TEST(Dataset, InvalidCountsAreConfigErrors) {
  EXPECT_THROW(make_two_domain_dataset({3, 8, 2}), ConfigError);
  EXPECT_THROW(make_two_domain_dataset({4, 4, 2}), ConfigError);
  EXPECT_THROW(make_two_domain_dataset({1, 4, 2}), ConfigError);
  EXPECT_THROW(make_two_domain_dataset({2, 4, 0}), ConfigError);
}

TEST(Dataset, InDistributionNeverPairsForeignShape) {
  const auto p = make_two_domain_dataset({4, 8, 2});
  Rng rng(1);
  for (int i = 0; i < 2000; ++i) {
    const LatentCode c = sample_in_distribution(p, rng);
    EXPECT_EQ(c.x, p.parent[c.y]);
    EXPECT_LT(c.b, 2u);
    EXPECT_LE(std::abs(c.z[0]), kPoseRange);
    EXPECT_LE(std::abs(c.z[1]), kPoseRange);
  }
}

TEST(Render, CompositingIdentityIsExact) {
  World w;
  const LatentCode code{1, 3, 1, {0.05, -0.1}};
  const RenderOutput out = render(code, w.scene, 40, 36);
  // Same code with the mask forced to one gives the foreground.
  SceneParams solid = w.scene;
  solid.shapes[1] = {2.0, 100.0, 100.0};
  solid.sharpness = 1e6;
  const RenderOutput fg = render(code, solid, 40, 36);
  const auto& bg = w.scene.backgrounds[1];
  const std::size_t plane = 40 * 36;
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t p = 0; p < plane; ++p) {
      const double m = out.mask[p];
      EXPECT_NEAR(out.image[c * plane + p], m * fg.image[c * plane + p] + (1 - m) * bg[c], 1e-12);
    }
}

TEST(Render, EmptyMaskShowsBackgroundExactly) {
  World w;
  w.scene.shapes[0] = {2.0, 0.0, 0.0};
  const RenderOutput out = render({0, 0, 0, {0, 0}}, w.scene, 32, 32);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t p = 0; p < 32 * 32; ++p) EXPECT_EQ(out.image[c * 1024 + p], w.scene.backgrounds[0][c]);
}

TEST(Render, PoseShiftMovesCentroid) {
  World w;
  const std::size_t W = 64;
  const Tensor m0 = render_mask(w.scene.shapes[0], {0.0, 0.0}, 20.0, 64, W);
  for (double d : {0.05, 0.1, -0.15}) {
    const Tensor m1 = render_mask(w.scene.shapes[0], {d, 0.0}, 20.0, 64, W);
    EXPECT_NEAR(centroid_u(m1) - centroid_u(m0), d * W, 0.5);
  }
}

TEST(Render, AppearanceChangesOnlyForeground) {
  World w;
  const RenderOutput a = render({2, 4, 0, {0.1, 0.1}}, w.scene, 48, 48);
  const RenderOutput b = render({2, 5, 0, {0.1, 0.1}}, w.scene, 48, 48);
  EXPECT_EQ(a.mask, b.mask);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t p = 0; p < 48 * 48; ++p) {
      if (a.mask[p] == 0.0) EXPECT_EQ(a.image[c * 2304 + p], b.image[c * 2304 + p]);
    }
}

TEST(Render, TooSmallIsRejected) {
  World w;
  EXPECT_THROW(render({0, 0, 0, {0, 0}}, w.scene, 31, 64), DimensionError);
}

TEST(Render, ConstantTextureGivesShapeIndependentHistogram) {
  World w;
  // Identical colour logits: the stripe blend collapses to one colour.
  for (std::size_t c = 0; c < 3; ++c) {
    w.scene.appearance.value.at(0, appearance::kColorB + c) = w.scene.appearance.value.at(0, appearance::kColorA + c);
  }
  w.scene.sharpness = 1e4;  // hard mask so no background bleeds into the foreground
  const FilterBank bank = init_filter_bank(FilterBankConfig::for_setting(FilterSetting::I, {16, 1, 1}), 4);
  const RenderOutput r1 = render({0, 0, 0, {0, 0}}, w.scene, 64, 64);
  const RenderOutput r2 = render({3, 0, 0, {0, 0}}, w.scene, 64, 64);
  const auto h1 = histogram_values(r1.image, r1.mask, bank), h2 = histogram_values(r2.image, r2.mask, bank);
  for (std::size_t k = 0; k < h1.size(); ++k) EXPECT_NEAR(h1[k], h2[k], 1e-6);
}

TEST(Render, PoseInvarianceOfSettingOneHistogram) {
  World w;
  const FilterBank bank = init_filter_bank(FilterBankConfig::for_setting(FilterSetting::I), 4);
  Rng rng(2);
  for (std::size_t y = 0; y < 8; ++y) {
    const LatentCode base{w.part.parent[y], y, 0, {0, 0}};
    const RenderOutput r0 = render(base, w.scene, 64, 64);
    const auto h0 = normalized(histogram_values(r0.image, r0.mask, bank));
    for (int t = 0; t < 5; ++t) {
      LatentCode moved = base;
      moved.z = sample_pose(rng);
      const RenderOutput r = render(moved, w.scene, 64, 64);
      const auto h = normalized(histogram_values(r.image, r.mask, bank));
      for (std::size_t k = 0; k < h.size(); ++k) EXPECT_NEAR(h[k], h0[k], 1e-3);
    }
  }
}

TEST(Render, GraphPathMatchesPlainRender) {
  World w;
  const LatentCode code{1, 2, 1, {-0.05, 0.12}};
  const RenderOutput plain = render(code, w.scene, 40, 40);
  Graph g;
  const RenderVars v = render(g, g.variable(w.scene.appearance.value), code, w.scene, 40, 40);
  EXPECT_EQ(g.value(v.image), plain.image);
  EXPECT_EQ(g.value(v.mask), plain.mask);
}
