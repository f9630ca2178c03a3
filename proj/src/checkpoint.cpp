#include "histmix/checkpoint.h"

#include <bit>
#include <cstring>

#include "histmix/errors.h"
#include "histmix/image_io.h"

namespace histmix {
namespace {

constexpr char kMagic[4] = {'H', 'M', 'X', 'C'};
constexpr std::size_t kHeaderSize = 8;

class Writer {
 public:
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u64(s.size());
    out_.insert(out_.end(), s.begin(), s.end());
  }
  std::vector<std::uint8_t>& bytes() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  void need(std::uint64_t n) const {
    if (n > in_.size() - pos_) throw FormatError("checkpoint truncated at byte " + std::to_string(pos_));
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint64_t n = u64();
    need(n);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void skip(std::size_t n) {
    need(n);
    pos_ += n;
  }
  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == in_.size(); }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace

const Tensor& Checkpoint::tensor(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return t;
  }
  throw FormatError("checkpoint has no tensor '" + name + "'");
}

bool Checkpoint::has(const std::string& name) const {
  for (const auto& entry : tensors) {
    if (entry.first == name) return true;
  }
  return false;
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& c) {
  Writer w;
  auto& out = w.bytes();
  out.insert(out.end(), kMagic, kMagic + 4);
  out.push_back(c.version);
  out.insert(out.end(), 3, 0);
  w.u64(c.step);
  w.str(c.config_json);
  w.str(c.rng_state);
  w.u64(c.tensors.size());
  for (const auto& [name, t] : c.tensors) {
    w.str(name);
    w.u64(t.rank());
    for (std::size_t d : t.shape()) w.u64(d);
    for (std::size_t i = 0; i < t.size(); ++i) w.f64(t[i]);
  }
  return std::move(out);
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderSize || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError("not a checkpoint (bad magic)");
  }
  Checkpoint c;
  c.version = bytes[4];
  if (c.version != kCheckpointVersion) {
    throw FormatError("checkpoint version " + std::to_string(c.version) + " is not supported (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  Reader r(bytes);
  r.skip(kHeaderSize);
  c.step = r.u64();
  c.config_json = r.str();
  c.rng_state = r.str();
  const std::uint64_t count = r.u64();
  for (std::uint64_t k = 0; k < count; ++k) {
    std::string name = r.str();
    const std::uint64_t rank = r.u64();
    if (rank > 8) throw FormatError("tensor '" + name + "' has invalid rank");
    Shape shape(rank);
    std::uint64_t numel = 1;
    for (auto& d : shape) {
      d = r.u64();
      if (d == 0 || d > (std::uint64_t{1} << 32)) throw FormatError("tensor '" + name + "' has invalid shape");
      numel *= d;
    }
    r.need(numel * 8);
    std::vector<double> values(numel);
    for (auto& v : values) v = r.f64();
    c.tensors.emplace_back(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  if (!r.done()) throw FormatError("trailing bytes after checkpoint at byte " + std::to_string(r.pos()));
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  write_file(path, encode_checkpoint(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return decode_checkpoint(bytes);
}

}  // namespace histmix
