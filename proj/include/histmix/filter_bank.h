#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "histmix/graph.h"

namespace histmix {

// Receptive-field settings: (i) one layer of 1x1 filters, (ii) one 3x3
// layer, (iii) two 3x3 layers, (iv) three 3x3 layers.
enum class FilterSetting { I, II, III, IV };

std::string to_string(FilterSetting setting);
FilterSetting filter_setting_from_string(const std::string& name);

struct LayerSpec {
  std::size_t num_filters = 0;
  std::size_t kernel_size = 3;  // 1 or 3
};

struct FilterBankConfig {
  FilterSetting setting = FilterSetting::III;
  std::vector<LayerSpec> layers;

  static constexpr std::array<std::size_t, 3> kDefaultWidths{64, 128, 192};

  // Layer list for `setting`; layer l gets widths[l].
  static FilterBankConfig for_setting(FilterSetting setting,
                                      std::array<std::size_t, 3> widths = kDefaultWidths);

  // Sum of layer widths (every layer contributes to the histogram).
  std::size_t histogram_length() const;
  // Smallest square image every layer can process.
  std::size_t min_image_size() const;
  void validate() const;
};

// Learnable kernels, one [C_out, C_in, k, k] Parameter per layer; layer 1
// reads the 3 colour channels. No bias terms.
struct FilterBank {
  FilterBankConfig config;
  std::vector<Parameter> kernels;

  std::vector<Parameter*> parameters();
};

// Kernels i.i.d. uniform in [-a, a], a = sqrt(1 / fan_in), fan_in = C_in*k*k.
FilterBank init_filter_bank(const FilterBankConfig& config, std::uint64_t seed);

}  // namespace histmix
