#include <gtest/gtest.h>

#include <zlib.h>

#include <filesystem>
#include <set>
#include <sstream>

#include "histmix/errors.h"
#include "histmix/experiment.h"
#include "histmix/image_io.h"

using namespace histmix;
namespace fs = std::filesystem;

namespace {

RunConfig small_config(const fs::path& out) {
  RunConfig c;
  c.seed = 11;
  c.image_size = 32;
  c.layer_widths = {6, 8, 4};
  c.batch_size = 3;
  c.steps = 6;
  c.checkpoint_every = 3;
  c.output_dir = out.string();
  return c;
}

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("histmix_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  const auto b = read_file(p);
  return {b.begin(), b.end()};
}

}  // namespace

// ---- config ----

TEST(Config, DefaultsRoundTrip) {
  RunConfig c;
  c.seed = 42;
  c.tau = 0.1;
  c.lr_filter = 1.0 / 3.0;
  EXPECT_EQ(parse_config(to_json(c)), c);
  EXPECT_EQ(RunConfig{}.batch_size, 24u);
  EXPECT_EQ(RunConfig{}.hybrid_every, 4u);
  EXPECT_EQ(RunConfig{}.setting, "iii");
  EXPECT_EQ(RunConfig{}.image_size, 64u);
}

TEST(Config, UnknownKeyIsRejected) {
  try {
    parse_config(R"({"seed": 1, "batchsize": 4})");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "batchsize");
  }
}

TEST(Config, HierarchyViolationNamesField) {
  try {
    parse_config(R"({"n_x": 8, "n_y": 8})");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "n_x");
  }
}

TEST(Config, InvalidValuesNameFields) {
  auto field_of = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const ConfigError& e) {
      return e.field();
    }
    return std::string("<none>");
  };
  EXPECT_EQ(field_of(R"({"setting": "v"})"), "setting");
  EXPECT_EQ(field_of(R"({"tau": 0})"), "tau");
  EXPECT_EQ(field_of(R"({"batch_size": -3})"), "batch_size");
  EXPECT_EQ(field_of(R"({"lr_filter": "fast"})"), "lr_filter");
  EXPECT_EQ(field_of(R"({"schema_version": 2})"), "schema_version");
  EXPECT_EQ(field_of(R"({"optimizer": "rmsprop"})"), "optimizer");
  EXPECT_EQ(field_of("{not json"), "<document>");
}

// ---- checkpoint ----

TEST(Checkpoint, RoundTripIsBitExact) {
  const auto t = make_trainer(small_config("unused"));
  ScheduleConfig sc = small_config("unused").schedule();
  t->run(sc, 2);
  const Checkpoint c = make_checkpoint(*t, small_config("unused"));
  const auto bytes = encode_checkpoint(c);
  const Checkpoint d = decode_checkpoint(bytes);
  EXPECT_EQ(d, c);
  EXPECT_EQ(encode_checkpoint(d), bytes);
}

TEST(Checkpoint, VersionMismatchAndCorruptionAreFormatErrors) {
  Checkpoint c;
  c.tensors.emplace_back("a", Tensor::vector({1, 2, 3}));
  auto bytes = encode_checkpoint(c);
  auto wrong = bytes;
  wrong[4] = 2;
  try {
    decode_checkpoint(wrong);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("version"), std::string::npos);
  }
  auto magic = bytes;
  magic[0] = 'X';
  EXPECT_THROW(decode_checkpoint(magic), FormatError);
  bytes.pop_back();
  EXPECT_THROW(decode_checkpoint(bytes), FormatError);
}

TEST(Checkpoint, LittleEndianLayout) {
  Checkpoint c;
  c.step = 258;
  const auto b = encode_checkpoint(c);
  EXPECT_EQ(std::string(b.begin(), b.begin() + 4), "HMXC");
  EXPECT_EQ(b[4], kCheckpointVersion);
  EXPECT_EQ(b[8], 2);
  EXPECT_EQ(b[9], 1);
}

TEST(Checkpoint, ResumeReproducesTrajectory) {
  const RunConfig cfg = small_config("unused");
  auto full = make_trainer(cfg);
  std::string straight;
  for (const auto& r : full->run(cfg.schedule(), 6)) straight += loss_csv_row(r) + "\n";

  auto first = make_trainer(cfg);
  std::string resumed;
  for (const auto& r : first->run(cfg.schedule(), 3)) resumed += loss_csv_row(r) + "\n";
  const auto bytes = encode_checkpoint(make_checkpoint(*first, cfg));
  RestoredRun run = restore_run(decode_checkpoint(bytes));
  EXPECT_EQ(run.config, cfg);
  for (const auto& r : run.trainer->run(cfg.schedule(), 3)) resumed += loss_csv_row(r) + "\n";
  EXPECT_EQ(resumed, straight);
  EXPECT_EQ(make_checkpoint(*run.trainer, cfg), make_checkpoint(*full, cfg));
}

// ---- image output ----

TEST(ImageIo, PpmHeaderAndPixels) {
  Tensor img({3, 2, 3}, 0.0);
  img.at(0, 0, 0) = 1.0;
  img.at(2, 1, 2) = 0.5;
  const auto b = encode_ppm(img);
  const std::string header = "P6\n3 2\n255\n";
  ASSERT_EQ(std::string(b.begin(), b.begin() + header.size()), header);
  EXPECT_EQ(b.size(), header.size() + 18);
  EXPECT_EQ(b[header.size()], 255);
  EXPECT_EQ(b.back(), 128);
  const auto g = encode_ppm(Tensor({2, 2}, 1.0));
  EXPECT_EQ(std::string(g.begin(), g.begin() + 2), "P5");
}

TEST(ImageIo, PngDecodesToSamePixels) {
  Tensor img({3, 4, 5});
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = static_cast<double>(i % 7) / 6.0;
  const auto png = encode_png(img);
  ASSERT_EQ(png[0], 0x89);
  ASSERT_EQ(std::string(png.begin() + 1, png.begin() + 4), "PNG");
  // IHDR at 8, IDAT follows at 8 + 25.
  const std::size_t idat = 8 + 25;
  const std::size_t len = (png[idat] << 24) | (png[idat + 1] << 16) | (png[idat + 2] << 8) | png[idat + 3];
  ASSERT_EQ(std::string(png.begin() + idat + 4, png.begin() + idat + 8), "IDAT");
  std::vector<std::uint8_t> raw(4 * (1 + 15));
  uLongf raw_len = raw.size();
  ASSERT_EQ(uncompress(raw.data(), &raw_len, png.data() + idat + 8, len), Z_OK);
  ASSERT_EQ(raw_len, raw.size());
  const auto px = to_bytes(img);
  for (std::size_t r = 0; r < 4; ++r) {
    EXPECT_EQ(raw[r * 16], 0);
    for (std::size_t k = 0; k < 15; ++k) EXPECT_EQ(raw[r * 16 + 1 + k], px[r * 15 + k]);
  }
  EXPECT_EQ(encode_png(img), png);
}

// ---- commands ----

TEST(Gradcheck, ListsEveryOpOnceAndPasses) {
  const auto report = gradcheck_suite(0, 2);
  std::set<std::string> names;
  for (const auto& c : report) {
    EXPECT_TRUE(names.insert(c.op).second) << c.op;
    EXPECT_TRUE(c.pass) << c.op << " " << c.max_rel_err;
  }
  for (const char* op : {"conv2d_valid", "relu", "maxpool2", "avgpool2", "mul", "channel_sum", "div_scalar",
                         "cosine_similarity", "nt_xent", "render", "histogram_pipeline"}) {
    EXPECT_TRUE(names.count(op)) << op;
  }
  std::ostringstream log;
  EXPECT_EQ(cmd_gradcheck(0, true, std::nullopt, log), kExitCheckFailed);
}

TEST(Train, UnwritableOutputFailsBeforeCompute) {
  const fs::path blocker = temp_dir("blocker");
  write_file(blocker, {'x'});
  RunConfig c = small_config(blocker / "sub");
  std::ostringstream log;
  EXPECT_THROW(cmd_train(c, log), IoError);
  EXPECT_TRUE(log.str().empty());
  fs::remove(blocker);
}

TEST(Train, ZeroStepsCheckpointsInitialisation) {
  const fs::path out = temp_dir("zero");
  RunConfig c = small_config(out);
  c.steps = 0;
  std::ostringstream log;
  ASSERT_EQ(cmd_train(c, log), kExitOk);
  const Checkpoint saved = load_checkpoint(out / "final.ckpt");
  EXPECT_EQ(saved, make_checkpoint(*make_trainer(c), c));
  EXPECT_EQ(slurp(out / "loss.csv"), std::string(kLossCsvHeader) + "\n");
  fs::remove_all(out);
}

TEST(Train, SameConfigTwiceIsByteIdentical) {
  const fs::path a = temp_dir("twice_a"), b = temp_dir("twice_b");
  std::ostringstream log;
  ASSERT_EQ(cmd_train(small_config(a), log), kExitOk);
  ASSERT_EQ(cmd_train(small_config(b), log), kExitOk);
  EXPECT_EQ(slurp(a / "loss.csv"), slurp(b / "loss.csv"));
  for (const char* f : {"step_000003.ckpt", "step_000006.ckpt"}) EXPECT_TRUE(fs::exists(a / f)) << f;
  // Checkpoints embed the output directory through the config echo, so
  // compare the tensor payloads and state.
  Checkpoint ca = load_checkpoint(a / "final.ckpt"), cb = load_checkpoint(b / "final.ckpt");
  EXPECT_EQ(ca.tensors, cb.tensors);
  EXPECT_EQ(ca.rng_state, cb.rng_state);
  EXPECT_EQ(ca.step, 6u);
  fs::remove_all(a);
  fs::remove_all(b);
}

// Constant colours at the eight corners of the RGB cube and a saturated mask:
// any four distinct corners have channel-averaged std of at least 0.289, so
// the change region of every half-stack is exactly the mask.
static void paint_cube_corners(SceneParams& s) {
  for (std::size_t y = 0; y < 8; ++y)
    for (std::size_t k = 0; k < 3; ++k) {
      const double logit = (y >> k) & 1 ? 40.0 : -40.0;
      s.appearance.value.at(y, appearance::kColorA + k) = logit;
      s.appearance.value.at(y, appearance::kColorB + k) = logit;
    }
  s.sharpness = 1e9;
}

TEST(Eval, IouOnAnalyticShapesIsOne) {
  const fs::path out = temp_dir("iou");
  fs::create_directories(out);
  RunConfig c = small_config(out);
  auto t = make_trainer(c);
  paint_cube_corners(t->scene());
  save_checkpoint(out / "painted.ckpt", make_checkpoint(*t, c));
  std::ostringstream log;
  ASSERT_EQ(cmd_eval(out / "painted.ckpt", "iou", out / "eval", std::nullopt, std::nullopt, log), kExitOk);
  const std::string csv = slurp(out / "eval" / "eval_iou.csv");
  EXPECT_EQ(csv.rfind(std::string(kMetricCsvHeader) + "\n", 0), 0u);
  EXPECT_NE(csv.find("\niou,toy,iii,1,0,11\n"), std::string::npos) << csv;
  EXPECT_THROW(cmd_eval(out / "painted.ckpt", "accuracy", out / "eval", std::nullopt, std::nullopt, log), ConfigError);
  fs::remove_all(out);
}

TEST(Eval, IdenticalColourAppearancesGiveZeroChi2) {
  RunConfig c = small_config("unused");
  auto t = make_trainer(c);
  SceneParams& s = t->scene();
  for (std::size_t y = 0; y < c.n_y; ++y)
    for (std::size_t k = 0; k < 3; ++k) {
      s.appearance.value.at(y, appearance::kColorA + k) = 0.3 * static_cast<double>(k) - 0.2;
      s.appearance.value.at(y, appearance::kColorB + k) = 0.3 * static_cast<double>(k) - 0.2;
    }
  // Large enough that the sigmoid saturates to an exact 0/1 mask.
  s.sharpness = 1e9;
  Chi2Options o;
  o.image_size = 64;
  o.pairs = 16;
  o.samples = 4000;
  o.k = 8;
  o.codebook_images = 8;
  const Chi2Summary r = evaluate_color_chi2(s, t->partition(), o);
  ASSERT_EQ(r.per_pair.size(), 16u);
  for (double d : r.per_pair) EXPECT_NEAR(d, 0.0, 1e-12);
}

TEST(Eval, CrossDomainPairsKeepAppearance) {
  const auto part = make_two_domain_dataset({4, 8, 2});
  for (const auto& [src, dst] : cross_domain_pairs(part, 32, 1)) {
    EXPECT_EQ(src.x, part.parent[src.y]);
    EXPECT_NE(part.x_in_a(src.x), part.x_in_a(dst.x));
    EXPECT_EQ(src.y, dst.y);
    EXPECT_EQ(src.b, dst.b);
    EXPECT_EQ(src.z, dst.z);
  }
}

TEST(RenderGrid, TilesDeterminismAndHybridFlag) {
  const fs::path out = temp_dir("grid");
  std::ostringstream log;
  RunConfig c = small_config(out);
  c.steps = 0;
  ASSERT_EQ(cmd_train(c, log), kExitOk);
  const auto part = make_two_domain_dataset(c.dataset());
  // Rows: one appearance of each domain; cols: one shape of each domain.
  const std::vector<std::size_t> rows = {part.y_a[0], part.y_b[0]}, cols = {part.x_a[0], part.x_b[0]};
  ASSERT_EQ(cmd_render_grid(out / "final.ckpt", rows, cols, false, out / "g1", log), kExitOk);
  ASSERT_EQ(cmd_render_grid(out / "final.ckpt", rows, cols, false, out / "g2", log), kExitOk);
  ASSERT_EQ(cmd_render_grid(out / "final.ckpt", rows, cols, true, out / "g3", log), kExitOk);
  EXPECT_EQ(slurp(out / "g1" / "grid.png"), slurp(out / "g2" / "grid.png"));
  EXPECT_EQ(slurp(out / "g1" / "grid.ppm"), slurp(out / "g2" / "grid.ppm"));
  EXPECT_NE(slurp(out / "g1" / "grid.ppm"), slurp(out / "g3" / "grid.ppm"));

  const std::string m1 = slurp(out / "g1" / "grid_manifest.csv"), m3 = slurp(out / "g3" / "grid_manifest.csv");
  EXPECT_EQ(std::count(m1.begin(), m1.end(), '\n'), 5);  // header + 4 tiles
  EXPECT_NE(m1.find(",1,0\n"), std::string::npos);       // hybrid tile left blank
  EXPECT_EQ(m3.find(",1,0\n"), std::string::npos);       // every tile rendered
  const std::string header = "P6\n64 64\n255\n";
  EXPECT_EQ(slurp(out / "g1" / "grid.ppm").rfind(header, 0), 0u);
  fs::remove_all(out);
}
