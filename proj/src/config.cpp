#include "histmix/config.h"

#include <fstream>
#include <set>
#include <sstream>

#include "histmix/errors.h"
#include "json.hpp"

namespace histmix {
namespace {

using nlohmann::ordered_json;

template <typename T>
void read_field(const ordered_json& j, const char* key, T& out) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(key, std::string("wrong type: ") + e.what());
  }
}

// json's get<size_t>() silently wraps negative numbers.
void read_count(const ordered_json& j, const char* key, std::size_t& out) {
  auto it = j.find(key);
  if (it == j.end()) return;
  if (!it->is_number_unsigned()) throw ConfigError(key, "must be a non-negative integer");
  out = it->get<std::size_t>();
}

void read_u64(const ordered_json& j, const char* key, std::uint64_t& out) {
  auto it = j.find(key);
  if (it == j.end()) return;
  if (!it->is_number_unsigned()) throw ConfigError(key, "must be a non-negative integer");
  out = it->get<std::uint64_t>();
}

void require_positive(const char* key, double v) {
  if (!(v > 0.0)) throw ConfigError(key, "must be positive");
}

}  // namespace

void RunConfig::validate() const {
  if (schema_version != kConfigSchemaVersion) {
    throw ConfigError("schema_version", "unsupported schema version " + std::to_string(schema_version));
  }
  require_positive("image_size", static_cast<double>(image_size));
  require_positive("n_x", static_cast<double>(n_x));
  require_positive("n_y", static_cast<double>(n_y));
  require_positive("n_b", static_cast<double>(n_b));
  if (n_x >= n_y) throw ConfigError("n_x", "N_x must be smaller than N_y");
  if (n_y % n_x != 0) throw ConfigError("n_y", "N_y must be a multiple of N_x");
  try {
    filter_setting_from_string(setting);
  } catch (const ConfigError&) {
    throw ConfigError("setting", "expected one of i, ii, iii, iv, got '" + setting + "'");
  }
  for (std::size_t w : layer_widths) require_positive("layer_widths", static_cast<double>(w));
  require_positive("tau", tau);
  require_positive("batch_size", static_cast<double>(batch_size));
  try {
    optimizer_kind_from_string(optimizer);
  } catch (const ConfigError&) {
    throw ConfigError("optimizer", "expected sgd or adam, got '" + optimizer + "'");
  }
  require_positive("lr_filter", lr_filter);
  require_positive("lr_hybrid", lr_hybrid);
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum", "must lie in [0, 1)");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1", "must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2", "must lie in [0, 1)");
  require_positive("hybrid_every", static_cast<double>(hybrid_every));
  require_positive("checkpoint_every", static_cast<double>(checkpoint_every));
  if (output_dir.empty()) throw ConfigError("output_dir", "must not be empty");

  const auto bank = bank_config();
  if (image_size < 32) throw ConfigError("image_size", "must be at least 32");
  if (image_size < bank.min_image_size()) throw ConfigError("image_size", "too small for the filter setting");
  if (eval_image_size < 64) throw ConfigError("eval_image_size", "must be at least 64 (MR8 support is 49)");
  require_positive("eval_pairs", static_cast<double>(eval_pairs));
  require_positive("eval_samples", static_cast<double>(eval_samples));
  if (codebook_k < 2) throw ConfigError("codebook_k", "must be at least 2");
  if (!(iou_threshold > 0.0 && iou_threshold < 1.0)) throw ConfigError("iou_threshold", "must lie in (0, 1)");
  require_positive("iou_splits", static_cast<double>(iou_splits));
  require_positive("retrieval_batches", static_cast<double>(retrieval_batches));
}

FilterBankConfig RunConfig::bank_config() const {
  return FilterBankConfig::for_setting(filter_setting_from_string(setting), layer_widths);
}

OptimizerConfig RunConfig::filter_optimizer() const {
  OptimizerConfig c;
  c.kind = optimizer_kind_from_string(optimizer);
  c.learning_rate = lr_filter;
  c.momentum = momentum;
  c.beta1 = beta1;
  c.beta2 = beta2;
  return c;
}

OptimizerConfig RunConfig::hybrid_optimizer() const {
  OptimizerConfig c = filter_optimizer();
  c.learning_rate = lr_hybrid;
  return c;
}

ScheduleConfig RunConfig::schedule() const {
  ScheduleConfig s;
  s.batch_size = batch_size;
  s.tau = tau;
  s.hybrid_every = hybrid_every;
  s.train_filters = train_filters;
  s.train_hybrid = true;
  s.step.image_size = image_size;
  s.step.symmetric = symmetric_loss;
  s.seed = seed;
  return s;
}

RunConfig parse_config(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("<document>", std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("<document>", "top level must be an object");

  static const std::set<std::string> known = {
      "schema_version", "seed",          "image_size",      "n_x",          "n_y",
      "n_b",            "setting",       "layer_widths",    "tau",          "batch_size",
      "optimizer",      "lr_filter",     "lr_hybrid",       "momentum",     "beta1",
      "beta2",          "steps",         "hybrid_every",    "train_filters", "symmetric_loss",
      "checkpoint_every", "output_dir",  "eval_image_size", "eval_pairs",   "eval_samples",
      "codebook_k",     "iou_threshold", "iou_splits",      "retrieval_batches"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key())) throw ConfigError(it.key(), "unknown key");
  }

  RunConfig c;
  read_field(j, "schema_version", c.schema_version);
  read_u64(j, "seed", c.seed);
  read_count(j, "image_size", c.image_size);
  read_count(j, "n_x", c.n_x);
  read_count(j, "n_y", c.n_y);
  read_count(j, "n_b", c.n_b);
  read_field(j, "setting", c.setting);
  if (auto it = j.find("layer_widths"); it != j.end()) {
    if (!it->is_array() || it->size() != 3) throw ConfigError("layer_widths", "must be an array of 3 integers");
    for (std::size_t i = 0; i < 3; ++i) {
      if (!(*it)[i].is_number_unsigned()) throw ConfigError("layer_widths", "must be an array of 3 integers");
      c.layer_widths[i] = (*it)[i].get<std::size_t>();
    }
  }
  read_field(j, "tau", c.tau);
  read_count(j, "batch_size", c.batch_size);
  read_field(j, "optimizer", c.optimizer);
  read_field(j, "lr_filter", c.lr_filter);
  read_field(j, "lr_hybrid", c.lr_hybrid);
  read_field(j, "momentum", c.momentum);
  read_field(j, "beta1", c.beta1);
  read_field(j, "beta2", c.beta2);
  read_u64(j, "steps", c.steps);
  read_count(j, "hybrid_every", c.hybrid_every);
  read_field(j, "train_filters", c.train_filters);
  read_field(j, "symmetric_loss", c.symmetric_loss);
  read_u64(j, "checkpoint_every", c.checkpoint_every);
  read_field(j, "output_dir", c.output_dir);
  read_count(j, "eval_image_size", c.eval_image_size);
  read_count(j, "eval_pairs", c.eval_pairs);
  read_count(j, "eval_samples", c.eval_samples);
  read_count(j, "codebook_k", c.codebook_k);
  read_field(j, "iou_threshold", c.iou_threshold);
  read_count(j, "iou_splits", c.iou_splits);
  read_count(j, "retrieval_batches", c.retrieval_batches);
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read config " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

std::string to_json(const RunConfig& c) {
  ordered_json j;
  j["schema_version"] = c.schema_version;
  j["seed"] = c.seed;
  j["image_size"] = c.image_size;
  j["n_x"] = c.n_x;
  j["n_y"] = c.n_y;
  j["n_b"] = c.n_b;
  j["setting"] = c.setting;
  j["layer_widths"] = c.layer_widths;
  j["tau"] = c.tau;
  j["batch_size"] = c.batch_size;
  j["optimizer"] = c.optimizer;
  j["lr_filter"] = c.lr_filter;
  j["lr_hybrid"] = c.lr_hybrid;
  j["momentum"] = c.momentum;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["steps"] = c.steps;
  j["hybrid_every"] = c.hybrid_every;
  j["train_filters"] = c.train_filters;
  j["symmetric_loss"] = c.symmetric_loss;
  j["checkpoint_every"] = c.checkpoint_every;
  j["output_dir"] = c.output_dir;
  j["eval_image_size"] = c.eval_image_size;
  j["eval_pairs"] = c.eval_pairs;
  j["eval_samples"] = c.eval_samples;
  j["codebook_k"] = c.codebook_k;
  j["iou_threshold"] = c.iou_threshold;
  j["iou_splits"] = c.iou_splits;
  j["retrieval_batches"] = c.retrieval_batches;
  return j.dump(2) + "\n";
}

}  // namespace histmix
