#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "histmix/errors.h"
#include "histmix/grad_check.h"
#include "histmix/histogram.h"
#include "histmix/ops.h"
#include "histmix/rng.h"

using namespace histmix;

namespace {

FilterBank one_filter_bank(std::vector<double> weights) {
  FilterBank bank;
  bank.config.setting = FilterSetting::I;
  bank.config.layers = {{1, 1}};
  bank.kernels.emplace_back(Tensor({1, 3, 1, 1}, std::move(weights)));
  return bank;
}

Tensor random_image(Rng& rng, std::size_t h, std::size_t w) {
  Tensor t({3, h, w});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform();
  return t;
}

}  // namespace

TEST(FilterBankConfig, SettingsAndWidths) {
  const auto i = FilterBankConfig::for_setting(FilterSetting::I);
  ASSERT_EQ(i.layers.size(), 1u);
  EXPECT_EQ(i.layers[0].kernel_size, 1u);
  EXPECT_EQ(i.layers[0].num_filters, 64u);
  const auto ii = FilterBankConfig::for_setting(FilterSetting::II);
  ASSERT_EQ(ii.layers.size(), 1u);
  EXPECT_EQ(ii.layers[0].kernel_size, 3u);
  const auto iii = FilterBankConfig::for_setting(FilterSetting::III);
  ASSERT_EQ(iii.layers.size(), 2u);
  EXPECT_EQ(iii.histogram_length(), 64u + 128u);
  const auto iv = FilterBankConfig::for_setting(FilterSetting::IV);
  ASSERT_EQ(iv.layers.size(), 3u);
  EXPECT_EQ(iv.layers[2].num_filters, 192u);
  EXPECT_EQ(iv.histogram_length(), 64u + 128u + 192u);
  EXPECT_EQ(filter_setting_from_string("iii"), FilterSetting::III);
  EXPECT_THROW(filter_setting_from_string("v"), ConfigError);
}

TEST(InitFilterBank, SeededAndScaledByFanIn) {
  const auto cfg = FilterBankConfig::for_setting(FilterSetting::III);
  const FilterBank a = init_filter_bank(cfg, 1), b = init_filter_bank(cfg, 1), c = init_filter_bank(cfg, 2);
  EXPECT_EQ(a.kernels[0].value, b.kernels[0].value);
  EXPECT_FALSE(a.kernels[0].value == c.kernels[0].value);
  ASSERT_EQ(a.kernels[0].value.shape(), (Shape{64, 3, 3, 3}));
  ASSERT_EQ(a.kernels[1].value.shape(), (Shape{128, 64, 3, 3}));
  const double bound = std::sqrt(1.0 / 27.0);
  double max_abs = 0.0;
  for (double v : a.kernels[0].value.data()) max_abs = std::max(max_abs, std::abs(v));
  EXPECT_LE(max_abs, bound);
  EXPECT_GT(max_abs, 0.9 * bound);  // 1728 uniform draws reach close to the edge
}

TEST(MaskDownsample, Examples) {
  EXPECT_EQ(mask_downsample(Tensor({4, 4}, 1.0)), Tensor({2, 2}, 1.0));
  Tensor checker({4, 4});
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) checker.at(i, j) = (i + j) % 2;
  EXPECT_EQ(mask_downsample(checker), Tensor({2, 2}, 0.5));
  EXPECT_EQ(mask_downsample(Tensor({2, 2}, {0, 0, 1, 0})), Tensor({1, 1}, 0.25));
  EXPECT_THROW(mask_downsample(Tensor({1, 4})), DimensionError);
}

TEST(ComputeHistogram, HandArithmeticExample) {
  const FilterBank bank = one_filter_bank({2, 0, 0});
  const auto h = histogram_values(Tensor({3, 4, 4}, 0.5), Tensor({4, 4}, 1.0), bank);
  ASSERT_EQ(h.size(), 1u);
  EXPECT_DOUBLE_EQ(h[0], 1.0);
}

TEST(ComputeHistogram, EmptyMaskIsDegenerate) {
  const FilterBank bank = one_filter_bank({1, 1, 1});
  EXPECT_THROW(histogram_values(Tensor({3, 4, 4}, 0.5), Tensor({4, 4}, 0.0), bank), DegenerateError);
}

TEST(ComputeHistogram, TooSmallImageIsDimensionError) {
  const FilterBank bank = init_filter_bank(FilterBankConfig::for_setting(FilterSetting::IV, {2, 2, 2}), 0);
  EXPECT_THROW(histogram_values(Tensor({3, 8, 8}, 0.5), Tensor({8, 8}, 1.0), bank), DimensionError);
}

TEST(ComputeHistogram, SettingOneIsPositionInvariant) {
  Rng rng(4);
  const FilterBank bank = init_filter_bank(FilterBankConfig::for_setting(FilterSetting::I, {16, 1, 1}), 9);
  const Tensor img = random_image(rng, 6, 7);
  Tensor mask({6, 7});
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = rng.uniform(0.1, 1.0);

  std::vector<std::size_t> perm(42);
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.index(i)]);
  Tensor img2 = img, mask2 = mask;
  for (std::size_t p = 0; p < 42; ++p) {
    mask2[p] = mask[perm[p]];
    for (std::size_t c = 0; c < 3; ++c) img2[c * 42 + p] = img[c * 42 + perm[p]];
  }
  const auto a = histogram_values(img, mask, bank), b = histogram_values(img2, mask2, bank);
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(a[k], b[k], 1e-12);

  // Padding with masked-out border pixels leaves h unchanged.
  Tensor padded({3, 10, 11}, 0.3), pmask({10, 11}, 0.0);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 7; ++j) {
      pmask.at(i + 2, j + 2) = mask.at(i, j);
      for (std::size_t c = 0; c < 3; ++c) padded.at(c, i + 2, j + 2) = img.at(c, i, j);
    }
  const auto p = histogram_values(padded, pmask, bank);
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(a[k], p[k], 1e-12);
}

TEST(ComputeHistogram, LengthNonNegativeFinite) {
  Rng rng(8);
  for (FilterSetting s : {FilterSetting::I, FilterSetting::II, FilterSetting::III, FilterSetting::IV}) {
    const auto cfg = FilterBankConfig::for_setting(s, {8, 6, 4});
    const FilterBank bank = init_filter_bank(cfg, 3);
    const auto h = histogram_values(random_image(rng, 32, 32), Tensor({32, 32}, 1.0), bank);
    ASSERT_EQ(h.size(), cfg.histogram_length());
    for (double v : h) {
      EXPECT_TRUE(std::isfinite(v));
      EXPECT_GE(v, 0.0);
    }
  }
}

TEST(ComputeHistogram, GradientsMatchFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    Rng rng(seed);
    const auto cfg = FilterBankConfig::for_setting(FilterSetting::II, {3, 1, 1});
    FilterBank bank = init_filter_bank(cfg, seed);
    Parameter img(random_image(rng, 6, 6));
    Parameter mask(Tensor({6, 6}, 0.8));
    Parameter* p[] = {&img, &mask, &bank.kernels[0]};
    const auto r = grad_check(
        [&](Graph& g, std::span<const Var> v) {
          return sum(g, compute_histogram(g, v[0], v[1], v.subspan(2), cfg));
        },
        p);
    EXPECT_TRUE(r.pass) << r.max_rel_err << " at " << r.worst;
  }
}

TEST(ComputeHistogram, FrozenBankGetsNoGradient) {
  Rng rng(1);
  FilterBank bank = init_filter_bank(FilterBankConfig::for_setting(FilterSetting::III, {4, 4, 1}), 2);
  Graph g;
  auto ks = bind_filter_bank(g, bank, false);
  Var img = g.variable(random_image(rng, 12, 12));
  g.backward(sum(g, compute_histogram(g, img, g.constant(Tensor({12, 12}, 1.0)), ks, bank.config)));
  for (const auto& k : bank.kernels) EXPECT_EQ(k.grad, Tensor::zeros_like(k.value));
  EXPECT_FALSE(g.grad(img) == Tensor::zeros_like(g.value(img)));
}
