#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "histmix/checkpoint.h"
#include "histmix/config.h"
#include "histmix/metrics.h"
#include "histmix/training.h"

namespace histmix {

// Exit codes shared by every command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;

// ---- run state ----

/// Fresh trainer for `config`. Random streams under config.seed:
/// "bank" (kernel init), "scene" (appearance init), "train" (batches).
std::unique_ptr<Trainer> make_trainer(const RunConfig& config);

Checkpoint make_checkpoint(const Trainer& trainer, const RunConfig& config);

struct RestoredRun {
  RunConfig config;
  std::unique_ptr<Trainer> trainer;
};
// Rebuilds the full training state; FormatError on missing or mis-shaped tensors.
RestoredRun restore_run(const Checkpoint& checkpoint);

// ---- gradient checks ----

struct OpCheck {
  std::string op;
  double max_rel_err = 0.0;
  bool pass = true;
  std::string worst;  // "instance k: param#p[i]"
  std::size_t instances = 0;
};

/// Checks every differentiable op and the full histogram pipeline against
/// central differences on `instances` random problems each.
std::vector<OpCheck> gradcheck_suite(std::uint64_t seed, std::size_t instances = 20, bool corrupt = false);

// ---- evaluation ----

/// Cross-domain appearance-transfer pairs: source G(x_i, y_i, z_i, b_i) with
/// x_i the owner of y_i, target G(x_j, y_i, z_i, b_i) with x_j from the other
/// domain. Pair k uses y = k mod N_y and cycles through the other domain's shapes.
std::vector<std::pair<LatentCode, LatentCode>> cross_domain_pairs(const DomainPartition& partition,
                                                                   std::size_t count, std::uint64_t seed);

struct Chi2Summary {
  double mean = 0.0;
  double std = 0.0;
  std::vector<double> per_pair;
};

struct Chi2Options {
  std::size_t image_size = 96;
  std::size_t pairs = 64;
  std::size_t codebook_images = 32;  // in-distribution renders the codebook samples from
  std::size_t samples = 50000;
  std::size_t k = 50;
  std::uint64_t seed = 0;
};

// Mean colour chi^2 over cross-domain pairs. The codebook is fitted to the
// evaluated generator's own in-distribution renders (whole images).
Chi2Summary evaluate_color_chi2(const SceneParams& scene, const DomainPartition& partition,
                                const Chi2Options& options);
// Same protocol over MR8 texton histograms.
Chi2Summary evaluate_texton_chi2(const SceneParams& scene, const DomainPartition& partition,
                                 const Chi2Options& options);

struct RetrievalResult {
  double accuracy = 0.0;
  std::size_t queries = 0;
};

/// Positive-pair top-1 retrieval under cosine similarity of the bank's
/// histograms. Each held-out batch pairs min(batch_size, N_y) codes with
/// distinct appearances against pose-only positives; every one of the 2N
/// images queries the other 2N - 1.
RetrievalResult evaluate_retrieval(const FilterBank& bank, const SceneParams& scene,
                                   const DomainPartition& partition, std::size_t image_size,
                                   std::size_t batch_size, std::size_t batches, std::uint64_t seed);

/// Shape IoU for every x (all appearance codes, z = 0, b = 0), averaged.
struct IouSummary {
  double mean = 0.0;
  double std = 0.0;
  std::vector<IouScore> per_shape;
};
IouSummary evaluate_iou(const SceneParams& scene, const DomainPartition& partition, std::size_t image_size,
                        double threshold, std::size_t splits, std::uint64_t seed);

// ---- commands ----

inline constexpr const char* kMetricCsvHeader = "metric,dataset,setting,value,std,seed";

int cmd_gradcheck(std::uint64_t seed, bool corrupt, const std::optional<std::filesystem::path>& out,
                  std::ostream& log);

/// Writes config.json, loss.csv, step_NNNNNN.ckpt every checkpoint_every
/// steps and final.ckpt into config.output_dir. The directory is created and
/// probed for writability before any compute (IoError otherwise).
int cmd_train(const RunConfig& config, std::ostream& log);

/// which: chi2 | iou | resistivity | retrieval. `eval_config` overrides the
/// evaluation fields of the checkpoint's own config when given.
int cmd_eval(const std::filesystem::path& checkpoint, const std::string& which,
             const std::filesystem::path& out, const std::optional<RunConfig>& eval_config,
             std::optional<std::uint64_t> seed, std::ostream& log);

/// Sheet of G(x_c, y_r, z0 = 0, b0 = 0) tiles, rows = appearance codes,
/// cols = shape codes. Without `hybrid`, cross-domain tiles stay neutral gray.
/// Writes grid.ppm, grid.png and grid_manifest.csv.
int cmd_render_grid(const std::filesystem::path& checkpoint, const std::vector<std::size_t>& rows,
                    const std::vector<std::size_t>& cols, bool hybrid, const std::filesystem::path& out,
                    std::ostream& log);

// Creates `dir` if needed and verifies a file can be written there.
void ensure_writable_dir(const std::filesystem::path& dir);

}  // namespace histmix
