// histmix command-line driver: gradcheck, train, eval, render-grid.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "histmix/errors.h"
#include "histmix/experiment.h"

namespace {

using namespace histmix;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON run configuration");
  cmd->add_option("--seed", c.seed, "root seed (overrides the config)");
  cmd->add_option("--out", c.out, "output directory");
}

RunConfig resolve_config(const Common& c) {
  RunConfig cfg = c.config.empty() ? RunConfig{} : load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.out.empty()) cfg.output_dir = c.out;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Masked feature-histogram training and evaluation on a two-domain toy scene"};
  app.require_subcommand(1);

  Common gc, tc, ec, rc;
  bool corrupt = false;
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference checks of every differentiable op");
  add_common(gradcheck, gc);
  gradcheck->add_flag("--corrupt", corrupt, "perturb analytic gradients (negative control)");

  auto* train = app.add_subcommand("train", "run the training schedule");
  add_common(train, tc);

  std::string eval_ckpt, which = "chi2";
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(eval, ec);
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  eval->add_option("--which", which, "chi2 | iou | resistivity | retrieval");

  std::string grid_ckpt;
  std::vector<std::size_t> rows, cols;
  bool hybrid = false;
  auto* grid = app.add_subcommand("render-grid", "render an appearance x shape sheet");
  add_common(grid, rc);
  grid->add_option("--checkpoint", grid_ckpt, "checkpoint file")->required();
  grid->add_option("--rows", rows, "appearance codes (default: all)");
  grid->add_option("--cols", cols, "shape codes (default: all)");
  grid->add_flag("--hybrid", hybrid, "also render cross-domain tiles");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*gradcheck) {
      std::optional<std::filesystem::path> out;
      if (!gc.out.empty()) out = gc.out;
      return cmd_gradcheck(gc.seed.value_or(0), corrupt, out, std::cout);
    }
    if (*train) return cmd_train(resolve_config(tc), std::cout);
    if (*eval) {
      std::optional<RunConfig> cfg;
      if (!ec.config.empty()) cfg = load_config(ec.config);
      return cmd_eval(eval_ckpt, which, ec.out.empty() ? "eval" : ec.out, cfg, ec.seed, std::cout);
    }
    if (*grid) return cmd_render_grid(grid_ckpt, rows, cols, hybrid, rc.out.empty() ? "grid" : rc.out, std::cout);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCheckFailed;
  }
  return kExitOk;
}
