#include "histmix/filter_bank.h"

#include <cmath>

#include "histmix/errors.h"
#include "histmix/rng.h"

namespace histmix {

std::string to_string(FilterSetting setting) {
  switch (setting) {
    case FilterSetting::I: return "i";
    case FilterSetting::II: return "ii";
    case FilterSetting::III: return "iii";
    case FilterSetting::IV: return "iv";
  }
  return "?";
}

FilterSetting filter_setting_from_string(const std::string& name) {
  if (name == "i") return FilterSetting::I;
  if (name == "ii") return FilterSetting::II;
  if (name == "iii") return FilterSetting::III;
  if (name == "iv") return FilterSetting::IV;
  throw ConfigError("setting", "expected one of i, ii, iii, iv, got \"" + name + "\"");
}

FilterBankConfig FilterBankConfig::for_setting(FilterSetting setting, std::array<std::size_t, 3> widths) {
  FilterBankConfig cfg;
  cfg.setting = setting;
  switch (setting) {
    case FilterSetting::I: cfg.layers = {{widths[0], 1}}; break;
    case FilterSetting::II: cfg.layers = {{widths[0], 3}}; break;
    case FilterSetting::III: cfg.layers = {{widths[0], 3}, {widths[1], 3}}; break;
    case FilterSetting::IV: cfg.layers = {{widths[0], 3}, {widths[1], 3}, {widths[2], 3}}; break;
  }
  cfg.validate();
  return cfg;
}

std::size_t FilterBankConfig::histogram_length() const {
  std::size_t n = 0;
  for (const LayerSpec& l : layers) n += l.num_filters;
  return n;
}

std::size_t FilterBankConfig::min_image_size() const {
  // Walk backwards: layer l needs k_l pixels after pooling, pooling needs 2x.
  std::size_t need = 1;
  for (std::size_t l = layers.size(); l-- > 0;) {
    need = need + layers[l].kernel_size - 1;
    if (l > 0) need = 2 * need;
  }
  return need;
}

void FilterBankConfig::validate() const {
  if (layers.empty()) throw ConfigError("layers", "filter bank needs at least one layer");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (layers[l].num_filters == 0) {
      throw ConfigError("layers[" + std::to_string(l) + "].num_filters", "must be positive");
    }
    if (layers[l].kernel_size != 1 && layers[l].kernel_size != 3) {
      throw ConfigError("layers[" + std::to_string(l) + "].kernel_size", "must be 1 or 3");
    }
  }
}

std::vector<Parameter*> FilterBank::parameters() {
  std::vector<Parameter*> out;
  for (Parameter& p : kernels) out.push_back(&p);
  return out;
}

FilterBank init_filter_bank(const FilterBankConfig& config, std::uint64_t seed) {
  config.validate();
  FilterBank bank;
  bank.config = config;
  Rng rng(seed);
  std::size_t in_channels = 3;
  for (const LayerSpec& l : config.layers) {
    const std::size_t fan_in = in_channels * l.kernel_size * l.kernel_size;
    const double a = std::sqrt(1.0 / static_cast<double>(fan_in));
    Tensor k({l.num_filters, in_channels, l.kernel_size, l.kernel_size});
    for (double& v : k.data()) v = rng.uniform(-a, a);
    bank.kernels.emplace_back(std::move(k));
    in_channels = l.num_filters;
  }
  return bank;
}

}  // namespace histmix
