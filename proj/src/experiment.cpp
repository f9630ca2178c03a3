#include "histmix/experiment.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <algorithm>
#include <numeric>
#include <ostream>

#include "histmix/contrastive.h"
#include "histmix/errors.h"
#include "histmix/grad_check.h"
#include "histmix/histogram.h"
#include "histmix/image_io.h"
#include "histmix/mr8.h"
#include "histmix/ops.h"

namespace histmix {
namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string metric_row(const std::string& metric, const std::string& dataset, const std::string& setting,
                       double value, double std, std::uint64_t seed) {
  return metric + "," + dataset + "," + setting + "," + fmt(value) + "," + fmt(std) + "," + std::to_string(seed);
}

void write_text(const fs::path& path, const std::string& text) {
  write_file(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

Tensor shapes_tensor(const SceneParams& scene) {
  Tensor t({scene.shapes.size(), 3});
  for (std::size_t i = 0; i < scene.shapes.size(); ++i) {
    t.at(i, 0) = scene.shapes[i].exponent;
    t.at(i, 1) = scene.shapes[i].half_width;
    t.at(i, 2) = scene.shapes[i].half_height;
  }
  return t;
}

Tensor backgrounds_tensor(const SceneParams& scene) {
  Tensor t({scene.backgrounds.size(), 3});
  for (std::size_t i = 0; i < scene.backgrounds.size(); ++i) {
    for (std::size_t c = 0; c < 3; ++c) t.at(i, c) = scene.backgrounds[i][c];
  }
  return t;
}

void load_into(Tensor& dst, const Checkpoint& ckpt, const std::string& name) {
  const Tensor& src = ckpt.tensor(name);
  if (src.shape() != dst.shape()) {
    throw FormatError("tensor '" + name + "' has shape " + shape_str(src.shape()) + ", expected " +
                      shape_str(dst.shape()));
  }
  dst = src;
}

void add_optimizer(Checkpoint& ckpt, const std::string& prefix, const Optimizer& opt) {
  const auto slots = opt.slots();
  for (std::size_t i = 0; i < slots.size(); ++i) {
    ckpt.tensors.emplace_back(prefix + "/slot" + std::to_string(i), slots[i]);
  }
  ckpt.tensors.emplace_back(prefix + "/steps", Tensor::scalar(static_cast<double>(opt.steps())));
}

void restore_optimizer(Optimizer& opt, const Checkpoint& ckpt, const std::string& prefix) {
  std::vector<Tensor> slots = opt.slots();
  for (std::size_t i = 0; i < slots.size(); ++i) load_into(slots[i], ckpt, prefix + "/slot" + std::to_string(i));
  const double steps = ckpt.tensor(prefix + "/steps").item();
  if (!(steps >= 0.0) || steps != std::floor(steps)) throw FormatError(prefix + "/steps is not a count");
  opt.load_slots(slots, static_cast<std::uint64_t>(steps));
}

}  // namespace

// ---- run state ----

std::unique_ptr<Trainer> make_trainer(const RunConfig& config) {
  config.validate();
  DomainPartition partition = make_two_domain_dataset(config.dataset());
  FilterBank bank = init_filter_bank(config.bank_config(), derive_seed(config.seed, "bank"));
  SceneParams scene = init_scene_params(partition, derive_seed(config.seed, "scene"));
  return std::make_unique<Trainer>(std::move(partition), std::move(bank), std::move(scene),
                                   config.filter_optimizer(), config.hybrid_optimizer(),
                                   Rng(config.seed, "train"));
}

Checkpoint make_checkpoint(const Trainer& trainer, const RunConfig& config) {
  Checkpoint c;
  c.step = trainer.step();
  c.config_json = to_json(config);
  c.rng_state = trainer.rng().state();
  const FilterBank& bank = trainer.bank();
  for (std::size_t l = 0; l < bank.kernels.size(); ++l) {
    c.tensors.emplace_back("bank/layer" + std::to_string(l), bank.kernels[l].value);
  }
  const SceneParams& scene = trainer.scene();
  c.tensors.emplace_back("scene/appearance", scene.appearance.value);
  c.tensors.emplace_back("scene/shapes", shapes_tensor(scene));
  c.tensors.emplace_back("scene/backgrounds", backgrounds_tensor(scene));
  c.tensors.emplace_back("scene/sharpness", Tensor::scalar(scene.sharpness));
  add_optimizer(c, "optim/filter", trainer.filter_optimizer());
  add_optimizer(c, "optim/hybrid", trainer.hybrid_optimizer());
  return c;
}

RestoredRun restore_run(const Checkpoint& ckpt) {
  RestoredRun run;
  run.config = parse_config(ckpt.config_json);
  run.trainer = make_trainer(run.config);
  Trainer& t = *run.trainer;
  for (std::size_t l = 0; l < t.bank().kernels.size(); ++l) {
    load_into(t.bank().kernels[l].value, ckpt, "bank/layer" + std::to_string(l));
  }
  SceneParams& scene = t.scene();
  load_into(scene.appearance.value, ckpt, "scene/appearance");
  Tensor shapes = shapes_tensor(scene);
  load_into(shapes, ckpt, "scene/shapes");
  for (std::size_t i = 0; i < scene.shapes.size(); ++i) {
    scene.shapes[i] = {shapes.at(i, 0), shapes.at(i, 1), shapes.at(i, 2)};
  }
  Tensor bgs = backgrounds_tensor(scene);
  load_into(bgs, ckpt, "scene/backgrounds");
  for (std::size_t i = 0; i < scene.backgrounds.size(); ++i) {
    for (std::size_t c = 0; c < 3; ++c) scene.backgrounds[i][c] = bgs.at(i, c);
  }
  scene.sharpness = ckpt.tensor("scene/sharpness").item();
  restore_optimizer(t.filter_optimizer(), ckpt, "optim/filter");
  restore_optimizer(t.hybrid_optimizer(), ckpt, "optim/hybrid");
  t.rng().set_state(ckpt.rng_state);
  t.set_step(ckpt.step);
  return run;
}

// ---- gradient checks ----

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo, double hi) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

// Values in [-hi, -lo] u [lo, hi], clear of the ReLU kink.
Tensor away_from_zero(Shape shape, Rng& rng, double lo, double hi) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double m = rng.uniform(lo, hi);
    t[i] = rng.uniform() < 0.5 ? -m : m;
  }
  return t;
}

// Distinct values so max-pool windows have a clear winner.
Tensor shuffled_levels(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  std::vector<double> levels(t.size());
  for (std::size_t i = 0; i < levels.size(); ++i) levels[i] = 0.1 * static_cast<double>(i) + rng.uniform(0.0, 0.05);
  for (std::size_t i = levels.size(); i > 1; --i) std::swap(levels[i - 1], levels[rng.index(i)]);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = levels[i];
  return t;
}

// sum(out * weights): a scalar whose gradient reaches every output element.
Var weighted_sum(Graph& g, Var out, const Tensor& weights) {
  return sum(g, mul(g, out, g.constant(weights)));
}

// Finite differences are only meaningful away from the ReLU and max-pool
// kinks; the pipeline case redraws instances that sit closer than this.
constexpr double kKinkMargin = 1e-3;

// Smallest distance of any pre-activation from zero, or of any max-pool
// winner from its runner-up, over the bank's layers.
double kink_distance(const Tensor& image, const FilterBank& bank) {
  Graph g;
  Var x = g.constant(image);
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l < bank.kernels.size(); ++l) {
    const Var pre = conv2d_valid(g, x, g.constant(bank.kernels[l].value));
    const Tensor& v = g.value(pre);
    for (std::size_t i = 0; i < v.size(); ++i) d = std::min(d, std::abs(v[i]));
    const Var act = relu(g, pre);
    if (l + 1 == bank.kernels.size()) break;
    const Tensor& a = g.value(act);
    const std::size_t C = a.dim(0), H = a.dim(1) / 2, W = a.dim(2) / 2;
    for (std::size_t ch = 0; ch < C; ++ch) {
      for (std::size_t i = 0; i < H; ++i) {
        for (std::size_t j = 0; j < W; ++j) {
          double w[4] = {a.at(ch, 2 * i, 2 * j), a.at(ch, 2 * i, 2 * j + 1), a.at(ch, 2 * i + 1, 2 * j),
                         a.at(ch, 2 * i + 1, 2 * j + 1)};
          std::sort(w, w + 4);
          if (w[3] > 0.0) d = std::min(d, w[3] - w[2]);
        }
      }
    }
    x = maxpool2(g, act);
  }
  return d;
}

struct CheckCase {
  std::vector<Parameter> params;
  GraphBuilder build;
};

using CaseFactory = std::function<CheckCase(Rng&)>;

std::vector<std::pair<std::string, CaseFactory>> gradcheck_cases() {
  std::vector<std::pair<std::string, CaseFactory>> cases;

  cases.emplace_back("conv2d_valid", [](Rng& rng) {
    CheckCase c;
    c.params.emplace_back(random_tensor({2, 5, 5}, rng, -1, 1));
    c.params.emplace_back(random_tensor({3, 2, 3, 3}, rng, -1, 1));
    const Tensor w = random_tensor({3, 3, 3}, rng, -1, 1);
    c.build = [w](Graph& g, std::span<const Var> p) { return weighted_sum(g, conv2d_valid(g, p[0], p[1]), w); };
    return c;
  });
  cases.emplace_back("relu", [](Rng& rng) {
    CheckCase c;
    c.params.emplace_back(away_from_zero({12}, rng, 0.05, 1.0));
    const Tensor w = random_tensor({12}, rng, -1, 1);
    c.build = [w](Graph& g, std::span<const Var> p) { return weighted_sum(g, relu(g, p[0]), w); };
    return c;
  });
  cases.emplace_back("maxpool2", [](Rng& rng) {
    CheckCase c;
    c.params.emplace_back(shuffled_levels({2, 5, 4}, rng));
    const Tensor w = random_tensor({2, 2, 2}, rng, -1, 1);
    c.build = [w](Graph& g, std::span<const Var> p) { return weighted_sum(g, maxpool2(g, p[0]), w); };
    return c;
  });
  cases.emplace_back("avgpool2", [](Rng& rng) {
    CheckCase c;
    c.params.emplace_back(random_tensor({5, 6}, rng, 0, 1));
    const Tensor w = random_tensor({2, 3}, rng, -1, 1);
    c.build = [w](Graph& g, std::span<const Var> p) { return weighted_sum(g, avgpool2(g, p[0]), w); };
    return c;
  });
  cases.emplace_back("crop_border", [](Rng& rng) {
    CheckCase c;
    c.params.emplace_back(random_tensor({2, 5, 6}, rng, -1, 1));
    const Tensor w = random_tensor({2, 3, 4}, rng, -1, 1);
    c.build = [w](Graph& g, std::span<const Var> p) { return weighted_sum(g, crop_border(g, p[0], 1), w); };
    return c;
  });
  cases.emplace_back("mul", [](Rng& rng) {
    CheckCase c;
    c.params.emplace_back(random_tensor({2, 3, 4}, rng, -1, 1));
    c.params.emplace_back(random_tensor({3, 4}, rng, -1, 1));  // broadcast over channels
    c.params.emplace_back(random_tensor({2, 3, 4}, rng, -1, 1));
    const Tensor w = random_tensor({2, 3, 4}, rng, -1, 1);
    c.build = [w](Graph& g, std::span<const Var> p) {
      return weighted_sum(g, mul(g, mul(g, p[0], p[1]), p[2]), w);
    };
    return c;
  });
  cases.emplace_back("add", [](Rng& rng) {
    CheckCase c;
    c.params.emplace_back(random_tensor({3, 4}, rng, -1, 1));
    c.params.emplace_back(random_tensor({3, 4}, rng, -1, 1));
    const Tensor w = random_tensor({3, 4}, rng, -1, 1);
    c.build = [w](Graph& g, std::span<const Var> p) {
      return weighted_sum(g, mul(g, add(g, p[0], p[1]), p[0]), w);
    };
    return c;
  });
  cases.emplace_back("scale", [](Rng& rng) {
    CheckCase c;
    c.params.emplace_back(random_tensor({7}, rng, -1, 1));
    const double factor = rng.uniform(-2, 2);
    const Tensor w = random_tensor({7}, rng, -1, 1);
    c.build = [w, factor](Graph& g, std::span<const Var> p) { return weighted_sum(g, scale(g, p[0], factor), w); };
    return c;
  });
  cases.emplace_back("channel_sum", [](Rng& rng) {
    CheckCase c;
    c.params.emplace_back(random_tensor({3, 4, 4}, rng, -1, 1));
    const Tensor w = random_tensor({3}, rng, -1, 1);
    c.build = [w](Graph& g, std::span<const Var> p) { return weighted_sum(g, channel_sum(g, p[0]), w); };
    return c;
  });
  cases.emplace_back("sum", [](Rng& rng) {
    CheckCase c;
    c.params.emplace_back(random_tensor({4, 5}, rng, -1, 1));
    c.build = [](Graph& g, std::span<const Var> p) { return sum(g, mul(g, p[0], p[0])); };
    return c;
  });
  cases.emplace_back("div_scalar", [](Rng& rng) {
    CheckCase c;
    c.params.emplace_back(random_tensor({6}, rng, -1, 1));
    c.params.emplace_back(Tensor::scalar(rng.uniform(0.5, 1.5)));
    const Tensor w = random_tensor({6}, rng, -1, 1);
    c.build = [w](Graph& g, std::span<const Var> p) { return weighted_sum(g, div_scalar(g, p[0], p[1]), w); };
    return c;
  });
  cases.emplace_back("concat", [](Rng& rng) {
    CheckCase c;
    c.params.emplace_back(random_tensor({3}, rng, -1, 1));
    c.params.emplace_back(random_tensor({5}, rng, -1, 1));
    const Tensor w = random_tensor({8}, rng, -1, 1);
    c.build = [w](Graph& g, std::span<const Var> p) {
      const Var parts[] = {p[0], p[1]};
      return weighted_sum(g, concat(g, parts), w);
    };
    return c;
  });
  cases.emplace_back("cosine_similarity", [](Rng& rng) {
    CheckCase c;
    c.params.emplace_back(random_tensor({6}, rng, -1, 1));
    c.params.emplace_back(random_tensor({6}, rng, -1, 1));
    c.build = [](Graph& g, std::span<const Var> p) { return cosine_similarity(g, p[0], p[1]); };
    return c;
  });
  cases.emplace_back("nt_xent", [](Rng& rng) {
    CheckCase c;
    for (int i = 0; i < 6; ++i) c.params.emplace_back(random_tensor({5}, rng, 0.05, 1));
    const bool symmetric = rng.uniform() < 0.5;
    c.build = [symmetric](Graph& g, std::span<const Var> p) { return nt_xent(g, p, 0.5, symmetric); };
    return c;
  });
  cases.emplace_back("render", [](Rng& rng) {
    CheckCase c;
    const DomainPartition part = make_two_domain_dataset({2, 4, 2});
    auto scene = std::make_shared<SceneParams>(init_scene_params(part, rng.next_u64()));
    LatentCode code = sample_in_distribution(part, rng);
    c.params.push_back(scene->appearance);
    const Tensor w = random_tensor({3, 32, 32}, rng, -1, 1);
    c.build = [w, scene, code](Graph& g, std::span<const Var> p) {
      return weighted_sum(g, render(g, p[0], code, *scene, 32, 32).image, w);
    };
    return c;
  });
  cases.emplace_back("histogram_pipeline", [](Rng& rng) {
    CheckCase c;
    const FilterBankConfig cfg = FilterBankConfig::for_setting(FilterSetting::III, {3, 4, 1});
    Tensor image;
    FilterBank bank;
    do {
      bank = init_filter_bank(cfg, rng.next_u64());
      image = random_tensor({3, 10, 10}, rng, -1, 1);
    } while (kink_distance(image, bank) < kKinkMargin);
    c.params.emplace_back(std::move(image));
    c.params.emplace_back(random_tensor({10, 10}, rng, 0.2, 1));
    for (const Parameter& k : bank.kernels) c.params.push_back(k);
    const Tensor w = random_tensor({cfg.histogram_length()}, rng, -1, 1);
    c.build = [w, cfg](Graph& g, std::span<const Var> p) {
      return weighted_sum(g, compute_histogram(g, p[0], p[1], p.subspan(2), cfg), w);
    };
    return c;
  });
  return cases;
}

}  // namespace

std::vector<OpCheck> gradcheck_suite(std::uint64_t seed, std::size_t instances, bool corrupt) {
  GradCheckOptions options;
  options.step = 1e-4;
  options.tolerance = 1e-4;
  options.corrupt_gradient = corrupt;
  std::vector<OpCheck> report;
  for (const auto& [name, factory] : gradcheck_cases()) {
    OpCheck check;
    check.op = name;
    for (std::size_t k = 0; k < instances; ++k) {
      Rng rng(seed, "gradcheck/" + name + "/" + std::to_string(k));
      CheckCase cc = factory(rng);
      std::vector<Parameter*> ptrs;
      for (Parameter& p : cc.params) ptrs.push_back(&p);
      const GradCheckReport r = grad_check(cc.build, ptrs, options);
      if (k == 0 || r.max_rel_err > check.max_rel_err) {
        check.max_rel_err = r.max_rel_err;
        check.worst = "instance " + std::to_string(k) + ": " + r.worst;
      }
      check.pass = check.pass && r.pass;
      ++check.instances;
    }
    report.push_back(std::move(check));
  }
  return report;
}

// ---- evaluation ----

std::vector<std::pair<LatentCode, LatentCode>> cross_domain_pairs(const DomainPartition& partition,
                                                                   std::size_t count, std::uint64_t seed) {
  Rng rng(seed, "eval/pairs");
  std::vector<std::pair<LatentCode, LatentCode>> pairs;
  pairs.reserve(count);
  const std::size_t n_y = partition.spec.n_y;
  for (std::size_t k = 0; k < count; ++k) {
    LatentCode src;
    src.y = k % n_y;
    src.x = partition.parent[src.y];
    src.b = rng.index(partition.spec.n_b);
    src.z = sample_pose(rng);
    const auto& others = partition.other_domain_shapes(src.x);
    LatentCode dst = src;
    dst.x = others[(k / n_y) % others.size()];
    pairs.emplace_back(src, dst);
  }
  return pairs;
}

namespace {

std::vector<RenderOutput> codebook_renders(const SceneParams& scene, const DomainPartition& partition,
                                           const Chi2Options& o) {
  Rng rng(o.seed, "eval/codebook-codes");
  std::vector<RenderOutput> out;
  for (std::size_t i = 0; i < o.codebook_images; ++i) {
    out.push_back(render(sample_in_distribution(partition, rng), scene, o.image_size, o.image_size));
  }
  return out;
}

Chi2Summary summarize(std::vector<double> d) {
  Chi2Summary s;
  s.mean = mean_of(d);
  s.std = std_of(d);
  s.per_pair = std::move(d);
  return s;
}

}  // namespace

Chi2Summary evaluate_color_chi2(const SceneParams& scene, const DomainPartition& partition,
                                const Chi2Options& o) {
  const auto renders = codebook_renders(scene, partition, o);
  const Codebook book =
      build_color_codebook(renders, PixelSource::WholeImage, o.samples, o.k, derive_seed(o.seed, "eval/color"))
          .codebook;
  std::vector<double> d;
  for (const auto& [src, dst] : cross_domain_pairs(partition, o.pairs, o.seed)) {
    const RenderOutput a = render(src, scene, o.image_size, o.image_size);
    const RenderOutput b = render(dst, scene, o.image_size, o.image_size);
    const auto ha = assign_histogram(foreground_colors(a.image, a.mask), book);
    const auto hb = assign_histogram(foreground_colors(b.image, b.mask), book);
    d.push_back(chi2_distance(ha, hb));
  }
  return summarize(std::move(d));
}

Chi2Summary evaluate_texton_chi2(const SceneParams& scene, const DomainPartition& partition,
                                 const Chi2Options& o) {
  const auto renders = codebook_renders(scene, partition, o);
  const Codebook book =
      build_texton_codebook(renders, o.samples, o.k, derive_seed(o.seed, "eval/texton")).codebook;
  auto texton_hist = [&](const LatentCode& code) {
    const RenderOutput r = render(code, scene, o.image_size, o.image_size);
    return assign_histogram(foreground_responses(mr8_responses(to_grayscale(r.image)), r.mask), book);
  };
  std::vector<double> d;
  for (const auto& [src, dst] : cross_domain_pairs(partition, o.pairs, o.seed)) {
    d.push_back(chi2_distance(texton_hist(src), texton_hist(dst)));
  }
  return summarize(std::move(d));
}

RetrievalResult evaluate_retrieval(const FilterBank& bank, const SceneParams& scene,
                                   const DomainPartition& partition, std::size_t image_size,
                                   std::size_t batch_size, std::size_t batches, std::uint64_t seed) {
  Rng rng(seed, "eval/retrieval");
  const std::size_t n = std::min(batch_size, partition.spec.n_y);
  if (n < 2) throw ContractError("retrieval needs at least 2 pairs per batch");
  RetrievalResult result;
  std::size_t hits = 0;
  for (std::size_t t = 0; t < batches; ++t) {
    std::vector<std::size_t> ys(partition.spec.n_y);
    std::iota(ys.begin(), ys.end(), 0);
    for (std::size_t i = ys.size(); i > 1; --i) std::swap(ys[i - 1], ys[rng.index(i)]);
    std::vector<LatentCode> base;
    for (std::size_t i = 0; i < n; ++i) {
      LatentCode c;
      c.y = ys[i];
      c.x = partition.parent[c.y];
      c.b = rng.index(partition.spec.n_b);
      c.z = sample_pose(rng);
      base.push_back(c);
    }
    const ContrastiveBatch batch = build_batch(PairScheme::Filter, base, partition, rng, 0.5);
    std::vector<std::vector<double>> h;
    for (const auto* side : {&batch.anchors, &batch.positives}) {
      for (const LatentCode& code : *side) {
        const RenderOutput r = render(code, scene, image_size, image_size);
        std::vector<double> v = histogram_values(r.image, r.mask, bank);
        double norm = 0.0;
        for (double x : v) norm += x * x;
        norm = std::sqrt(norm);
        if (norm < 1e-12) throw DegenerateError("retrieval: all-zero histogram");
        for (double& x : v) x /= norm;
        h.push_back(std::move(v));
      }
    }
    const std::size_t m = h.size();
    for (std::size_t i = 0; i < m; ++i) {
      std::size_t best = i == 0 ? 1 : 0;
      double best_sim = -2.0;
      for (std::size_t j = 0; j < m; ++j) {
        if (j == i) continue;
        const double s = std::inner_product(h[i].begin(), h[i].end(), h[j].begin(), 0.0);
        if (s > best_sim) {
          best_sim = s;
          best = j;
        }
      }
      hits += best == (i + n) % m ? 1 : 0;
      ++result.queries;
    }
  }
  result.accuracy = static_cast<double>(hits) / static_cast<double>(result.queries);
  return result;
}

IouSummary evaluate_iou(const SceneParams& scene, const DomainPartition& partition, std::size_t image_size,
                        double threshold, std::size_t splits, std::uint64_t seed) {
  IouSummary s;
  std::vector<std::size_t> ys(partition.spec.n_y);
  std::iota(ys.begin(), ys.end(), 0);
  std::vector<double> means, stds;
  for (std::size_t x = 0; x < partition.spec.n_x; ++x) {
    s.per_shape.push_back(shape_iou_score(scene, x, ys, {0.0, 0.0}, 0, image_size, threshold, splits,
                                          derive_seed(seed, "eval/iou/" + std::to_string(x))));
    means.push_back(s.per_shape.back().mean);
    stds.push_back(s.per_shape.back().std);
  }
  s.mean = mean_of(means);
  s.std = mean_of(stds);
  return s;
}

// ---- commands ----

void ensure_writable_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
  const fs::path probe = dir / ".write_probe";
  {
    std::ofstream f(probe);
    if (!f || !(f << "ok")) throw IoError("output directory is not writable: " + dir.string());
  }
  fs::remove(probe, ec);
}

int cmd_gradcheck(std::uint64_t seed, bool corrupt, const std::optional<fs::path>& out, std::ostream& log) {
  if (out) ensure_writable_dir(*out);
  const auto report = gradcheck_suite(seed, 20, corrupt);
  std::string csv = "op,instances,max_rel_err,pass,worst\n";
  bool ok = true;
  for (const OpCheck& c : report) {
    log << (c.pass ? "ok   " : "FAIL ") << c.op << "  max_rel_err=" << fmt(c.max_rel_err) << "  worst=" << c.worst
        << "\n";
    csv += c.op + "," + std::to_string(c.instances) + "," + fmt(c.max_rel_err) + "," + (c.pass ? "1" : "0") + "," +
           c.worst + "\n";
    ok = ok && c.pass;
  }
  if (out) write_text(*out / "gradcheck.csv", csv);
  log << (ok ? "gradcheck passed" : "gradcheck FAILED") << " (" << report.size() << " ops)\n";
  return ok ? kExitOk : kExitCheckFailed;
}

int cmd_train(const RunConfig& config, std::ostream& log) {
  config.validate();
  const fs::path dir = config.output_dir;
  ensure_writable_dir(dir);
  write_text(dir / "config.json", to_json(config));

  auto trainer = make_trainer(config);
  std::string csv = std::string(kLossCsvHeader) + "\n";
  auto save = [&](const std::string& name) { save_checkpoint(dir / name, make_checkpoint(*trainer, config)); };

  const std::uint64_t chunk = config.checkpoint_every;
  while (trainer->step() < config.steps) {
    const std::uint64_t n = std::min(chunk - trainer->step() % chunk, config.steps - trainer->step());
    for (const LossRecord& r : trainer->run(config.schedule(), n)) csv += loss_csv_row(r) + "\n";
    if (trainer->step() % chunk == 0) {
      char name[32];
      std::snprintf(name, sizeof name, "step_%06llu.ckpt", static_cast<unsigned long long>(trainer->step()));
      save(name);
      log << "step " << trainer->step() << "/" << config.steps << "\n";
    }
  }
  save("final.ckpt");
  write_text(dir / "loss.csv", csv);
  log << "wrote " << (dir / "final.ckpt").string() << "\n";
  return kExitOk;
}

int cmd_eval(const fs::path& checkpoint, const std::string& which, const fs::path& out,
             const std::optional<RunConfig>& eval_config, std::optional<std::uint64_t> seed, std::ostream& log) {
  if (which != "chi2" && which != "iou" && which != "resistivity" && which != "retrieval") {
    throw ConfigError("which", "expected chi2, iou, resistivity or retrieval, got '" + which + "'");
  }
  ensure_writable_dir(out);
  const RestoredRun run = restore_run(load_checkpoint(checkpoint));
  const RunConfig& ec = eval_config ? *eval_config : run.config;
  const std::uint64_t s = seed.value_or(ec.seed);
  const Trainer& t = *run.trainer;
  const std::string dataset = "toy";
  const std::string setting = run.config.setting;

  std::string csv = std::string(kMetricCsvHeader) + "\n";
  auto row = [&](const std::string& metric, double value, double std) {
    csv += metric_row(metric, dataset, setting, value, std, s) + "\n";
    log << metric << " = " << fmt(value) << " +- " << fmt(std) << "\n";
  };

  if (which == "chi2") {
    Chi2Options o;
    o.image_size = ec.eval_image_size;
    o.pairs = ec.eval_pairs;
    o.samples = ec.eval_samples;
    o.k = ec.codebook_k;
    o.seed = s;
    const Chi2Summary color = evaluate_color_chi2(t.scene(), t.partition(), o);
    const Chi2Summary texton = evaluate_texton_chi2(t.scene(), t.partition(), o);
    row("chi2_color", color.mean, color.std);
    row("chi2_texton", texton.mean, texton.std);
  } else if (which == "iou") {
    const IouSummary iou =
        evaluate_iou(t.scene(), t.partition(), ec.eval_image_size, ec.iou_threshold, ec.iou_splits, s);
    row("iou", iou.mean, iou.std);
    for (std::size_t x = 0; x < iou.per_shape.size(); ++x) {
      row("iou_x" + std::to_string(x), iou.per_shape[x].mean, iou.per_shape[x].std);
    }
  } else if (which == "resistivity") {
    std::vector<std::size_t> xs(t.partition().spec.n_x), ys(t.partition().spec.n_y);
    std::iota(xs.begin(), xs.end(), 0);
    std::iota(ys.begin(), ys.end(), 0);
    const std::size_t size = ec.eval_image_size;
    const auto report = resistivity_report(
        [&](std::size_t x, std::size_t y) {
          LatentCode c;
          c.x = x;
          c.y = y;
          return render(c, t.scene(), size, size).image;
        },
        xs, ys);
    std::string hist = "bin_lo,bin_hi,count\n";
    const double width = ResistivityReport::kRange / ResistivityReport::kBins;
    for (std::size_t i = 0; i < report.histogram.size(); ++i) {
      hist += fmt(width * static_cast<double>(i)) + "," + fmt(width * static_cast<double>(i + 1)) + "," +
              std::to_string(report.histogram[i]) + "\n";
    }
    write_text(out / "resistivity_hist.csv", hist);
    std::vector<double> heat_means;
    for (std::size_t x = 0; x < report.heatmaps.size(); ++x) {
      Tensor scaled = report.heatmaps[x];
      scaled *= 1.0 / ResistivityReport::kRange;
      write_file(out / ("resistivity_x" + std::to_string(x) + ".pgm"), encode_ppm(scaled));
      write_file(out / ("resistivity_x" + std::to_string(x) + ".png"), encode_png(scaled));
      double m = 0.0;
      for (std::size_t i = 0; i < report.heatmaps[x].size(); ++i) m += report.heatmaps[x][i];
      heat_means.push_back(m / static_cast<double>(report.heatmaps[x].size()));
    }
    row("resistivity_mean_std", mean_of(heat_means), std_of(heat_means));
  } else {
    const RetrievalResult r = evaluate_retrieval(t.bank(), t.scene(), t.partition(), run.config.image_size,
                                                 run.config.batch_size, ec.retrieval_batches, s);
    row("retrieval_top1", r.accuracy, 0.0);
  }
  write_text(out / ("eval_" + which + ".csv"), csv);
  return kExitOk;
}

int cmd_render_grid(const fs::path& checkpoint, const std::vector<std::size_t>& rows,
                    const std::vector<std::size_t>& cols, bool hybrid, const fs::path& out, std::ostream& log) {
  ensure_writable_dir(out);
  const RestoredRun run = restore_run(load_checkpoint(checkpoint));
  const Trainer& t = *run.trainer;
  const DomainPartition& part = t.partition();
  std::vector<std::size_t> ys = rows, xs = cols;
  if (ys.empty()) {
    ys.resize(part.spec.n_y);
    std::iota(ys.begin(), ys.end(), 0);
  }
  if (xs.empty()) {
    xs.resize(part.spec.n_x);
    std::iota(xs.begin(), xs.end(), 0);
  }
  for (std::size_t y : ys) {
    if (y >= part.spec.n_y) throw ConfigError("rows", "appearance code " + std::to_string(y) + " out of range");
  }
  for (std::size_t x : xs) {
    if (x >= part.spec.n_x) throw ConfigError("cols", "shape code " + std::to_string(x) + " out of range");
  }

  const std::size_t tile = run.config.image_size;
  Tensor sheet({3, ys.size() * tile, xs.size() * tile}, 0.5);
  std::string manifest = "row,col,y,x,hybrid,rendered\n";
  for (std::size_t r = 0; r < ys.size(); ++r) {
    for (std::size_t c = 0; c < xs.size(); ++c) {
      LatentCode code;
      code.x = xs[c];
      code.y = ys[r];
      const bool is_hybrid = part.is_hybrid(code.x, code.y);
      const bool drawn = hybrid || !is_hybrid;
      manifest += std::to_string(r) + "," + std::to_string(c) + "," + std::to_string(code.y) + "," +
                  std::to_string(code.x) + "," + (is_hybrid ? "1" : "0") + "," + (drawn ? "1" : "0") + "\n";
      if (!drawn) continue;
      const Tensor img = render(code, t.scene(), tile, tile).image;
      for (std::size_t ch = 0; ch < 3; ++ch) {
        for (std::size_t i = 0; i < tile; ++i) {
          for (std::size_t j = 0; j < tile; ++j) sheet.at(ch, r * tile + i, c * tile + j) = img.at(ch, i, j);
        }
      }
    }
  }
  write_file(out / "grid.ppm", encode_ppm(sheet));
  write_file(out / "grid.png", encode_png(sheet));
  write_text(out / "grid_manifest.csv", manifest);
  log << "wrote " << ys.size() << "x" << xs.size() << " grid to " << out.string() << "\n";
  return kExitOk;
}

}  // namespace histmix
