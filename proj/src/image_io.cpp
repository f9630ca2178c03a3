#include "histmix/image_io.h"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "histmix/errors.h"

namespace histmix {
namespace {

struct Layout {
  std::size_t channels, height, width;
};

Layout layout_of(const Tensor& image) {
  if (image.rank() == 2) return {1, image.dim(0), image.dim(1)};
  if (image.rank() == 3 && image.dim(0) == 3) return {3, image.dim(1), image.dim(2)};
  throw DimensionError("image must be [3,H,W] or [H,W], got " + shape_str(image.shape()));
}

void put_u32be(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

void put_chunk(std::vector<std::uint8_t>& out, const char* type, const std::vector<std::uint8_t>& data) {
  put_u32be(out, static_cast<std::uint32_t>(data.size()));
  const std::size_t start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  const uLong crc = crc32(0L, out.data() + start, static_cast<uInt>(out.size() - start));
  put_u32be(out, static_cast<std::uint32_t>(crc));
}

}  // namespace

std::vector<std::uint8_t> to_bytes(const Tensor& image) {
  const Layout l = layout_of(image);
  const std::size_t plane = l.height * l.width;
  std::vector<std::uint8_t> out(plane * l.channels);
  for (std::size_t p = 0; p < plane; ++p) {
    for (std::size_t c = 0; c < l.channels; ++c) {
      const double v = std::clamp(image[c * plane + p], 0.0, 1.0);
      out[p * l.channels + c] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
  }
  return out;
}

std::vector<std::uint8_t> encode_ppm(const Tensor& image) {
  const Layout l = layout_of(image);
  const std::string header = std::string(l.channels == 3 ? "P6" : "P5") + "\n" + std::to_string(l.width) + " " +
                             std::to_string(l.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  const auto px = to_bytes(image);
  out.insert(out.end(), px.begin(), px.end());
  return out;
}

std::vector<std::uint8_t> encode_png(const Tensor& image) {
  const Layout l = layout_of(image);
  const auto px = to_bytes(image);
  const std::size_t stride = l.width * l.channels;
  std::vector<std::uint8_t> raw;
  raw.reserve((stride + 1) * l.height);
  for (std::size_t i = 0; i < l.height; ++i) {
    raw.push_back(0);  // filter: none
    raw.insert(raw.end(), px.begin() + i * stride, px.begin() + (i + 1) * stride);
  }
  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> packed(bound);
  if (compress2(packed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 9) != Z_OK) {
    throw IoError("png: zlib compression failed");
  }
  packed.resize(bound);

  std::vector<std::uint8_t> out = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  std::vector<std::uint8_t> ihdr;
  put_u32be(ihdr, static_cast<std::uint32_t>(l.width));
  put_u32be(ihdr, static_cast<std::uint32_t>(l.height));
  ihdr.push_back(8);                         // bit depth
  ihdr.push_back(l.channels == 3 ? 2 : 0);  // colour type: truecolour or gray
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  put_chunk(out, "IHDR", ihdr);
  put_chunk(out, "IDAT", packed);
  put_chunk(out, "IEND", {});
  return out;
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed: " + path.string());
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace histmix
