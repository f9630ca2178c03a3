#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "histmix/tensor.h"

namespace histmix {

// Quantises values in [0,1] to 8 bits (clamped, rounded). [3,H,W] images
// become interleaved RGB, [H,W] images a single gray channel.
std::vector<std::uint8_t> to_bytes(const Tensor& image);

std::vector<std::uint8_t> encode_ppm(const Tensor& image);  // P6 for RGB, P5 for gray
std::vector<std::uint8_t> encode_png(const Tensor& image);  // 8-bit RGB or gray, zlib level 9

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

}  // namespace histmix
