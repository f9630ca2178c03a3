#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

#include "histmix/filter_bank.h"
#include "histmix/optimizer.h"
#include "histmix/scene.h"
#include "histmix/training.h"

namespace histmix {

inline constexpr int kConfigSchemaVersion = 1;

/// Everything a run depends on. Serialised as a flat JSON object; unknown
/// keys and a wrong schema_version are rejected.
struct RunConfig {
  int schema_version = kConfigSchemaVersion;
  std::uint64_t seed = 0;

  std::size_t image_size = 64;  // training renders are image_size x image_size
  std::size_t n_x = 4;
  std::size_t n_y = 8;
  std::size_t n_b = 2;

  std::string setting = "iii";
  std::array<std::size_t, 3> layer_widths = FilterBankConfig::kDefaultWidths;

  double tau = 0.5;
  std::size_t batch_size = 24;
  std::string optimizer = "adam";
  double lr_filter = 5e-5;
  double lr_hybrid = 3e-2;
  double momentum = 0.9;
  double beta1 = 0.5;
  double beta2 = 0.999;
  std::uint64_t steps = 2000;
  std::size_t hybrid_every = 4;
  bool train_filters = true;
  bool symmetric_loss = false;
  std::uint64_t checkpoint_every = 500;
  std::string output_dir = "runs/default";

  // Evaluation.
  std::size_t eval_image_size = 64;
  std::size_t eval_pairs = 64;
  std::size_t eval_samples = 50000;  // pixels drawn for each codebook
  std::size_t codebook_k = 50;
  double iou_threshold = 0.2;
  std::size_t iou_splits = 10;
  std::size_t retrieval_batches = 8;

  /// Throws ConfigError naming the first offending field.
  void validate() const;

  DatasetSpec dataset() const { return {n_x, n_y, n_b}; }
  FilterBankConfig bank_config() const;
  OptimizerConfig filter_optimizer() const;
  OptimizerConfig hybrid_optimizer() const;
  ScheduleConfig schedule() const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Parses and validates. Malformed JSON, wrong types, unknown keys and
/// invalid values all raise ConfigError; missing keys keep their defaults.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);  // IoError if unreadable

// Canonical form: every field, fixed key order, 2-space indent.
std::string to_json(const RunConfig& config);

}  // namespace histmix
