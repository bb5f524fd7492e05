#pragma once

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <string>
#include <utility>
#include <vector>

#include <zlib.h>

#include "lamd/error.hpp"
#include "lamd/models.hpp"

// Checkpoint layout, all integers little-endian:
//   "LAMDL1" | u16 version | u8 role | spec descriptor | u64 count |
//   count x f64 parameters | u32 CRC32 of everything before it
// Spec descriptor: u8 architecture, u32 latent_dim, u32 channels, u32 height,
// u32 width, u32 hidden count, hidden count x u32.

namespace lamd {

inline constexpr char kCheckpointMagic[] = "LAMDL1";
inline constexpr std::uint16_t kCheckpointVersion = 1;

enum class ModelRole : std::uint8_t { generator = 0, discriminator = 1, encoder = 2 };

namespace detail {

class ByteWriter {
 public:
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    bytes_.insert(bytes_.end(), b, b + n);
  }
  template <typename U>
  void uint(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) bytes_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }
  void u32_checked(std::size_t v) {
    if (v > 0xFFFFFFFFu) throw ConfigError("checkpoint field exceeds 32 bits");
    uint(static_cast<std::uint32_t>(v));
  }
  std::vector<unsigned char>& bytes() { return bytes_; }

 private:
  std::vector<unsigned char> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::vector<unsigned char>& b) : b_(b) {}
  template <typename U>
  U uint() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(U{b_[pos_ + i]} << (8 * i));
    pos_ += sizeof(U);
    return v;
  }
  double f64() { return std::bit_cast<double>(uint<std::uint64_t>()); }
  void expect(const char* s, std::size_t n) {
    need(n);
    if (!std::equal(s, s + n, b_.begin() + static_cast<std::ptrdiff_t>(pos_))) throw DataError("not a checkpoint file");
    pos_ += n;
  }
  std::size_t remaining() const { return b_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (b_.size() - pos_ < n) throw DataError("checkpoint truncated");
  }
  const std::vector<unsigned char>& b_;
  std::size_t pos_ = 0;
};

inline std::uint32_t crc32_of(const unsigned char* p, std::size_t n) {
  return static_cast<std::uint32_t>(::crc32(::crc32(0L, Z_NULL, 0), p, static_cast<uInt>(n)));
}

struct Descriptor {
  ModelRole role;
  Architecture architecture = Architecture::mlp;
  std::size_t latent_dim = 0;
  ImageShape image;
  std::vector<std::size_t> hidden;
};

inline std::vector<unsigned char> encode_checkpoint(const Descriptor& d, const std::vector<double>& flat) {
  ByteWriter w;
  w.raw(kCheckpointMagic, 6);
  w.uint(kCheckpointVersion);
  w.uint(static_cast<std::uint8_t>(d.role));
  w.uint(static_cast<std::uint8_t>(d.architecture));
  w.u32_checked(d.latent_dim);
  w.u32_checked(d.image.channels);
  w.u32_checked(d.image.height);
  w.u32_checked(d.image.width);
  w.u32_checked(d.hidden.size());
  for (std::size_t h : d.hidden) w.u32_checked(h);
  w.uint(static_cast<std::uint64_t>(flat.size()));
  for (double v : flat) w.f64(v);
  const std::uint32_t crc = crc32_of(w.bytes().data(), w.bytes().size());
  w.uint(crc);
  return std::move(w.bytes());
}

inline std::pair<Descriptor, std::vector<double>> decode_checkpoint(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 10) throw DataError("checkpoint truncated");
  const std::size_t body = bytes.size() - 4;
  std::uint32_t stored = 0;
  for (std::size_t i = 0; i < 4; ++i) stored |= std::uint32_t{bytes[body + i]} << (8 * i);
  ByteReader r(bytes);
  r.expect(kCheckpointMagic, 6);
  const auto version = r.uint<std::uint16_t>();
  if (version != kCheckpointVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
  if (crc32_of(bytes.data(), body) != stored) throw DataError("checkpoint CRC mismatch");
  Descriptor d;
  const auto role = r.uint<std::uint8_t>();
  if (role > 2) throw DataError("checkpoint has unknown model role");
  d.role = static_cast<ModelRole>(role);
  const auto arch = r.uint<std::uint8_t>();
  if (arch > 1) throw DataError("checkpoint has unknown architecture");
  d.architecture = static_cast<Architecture>(arch);
  d.latent_dim = r.uint<std::uint32_t>();
  d.image.channels = r.uint<std::uint32_t>();
  d.image.height = r.uint<std::uint32_t>();
  d.image.width = r.uint<std::uint32_t>();
  const std::size_t nh = r.uint<std::uint32_t>();
  if (nh > r.remaining() / 4) throw DataError("checkpoint hidden list truncated");
  for (std::size_t i = 0; i < nh; ++i) d.hidden.push_back(r.uint<std::uint32_t>());
  const std::uint64_t count = r.uint<std::uint64_t>();
  if (r.remaining() < 4) throw DataError("checkpoint truncated");
  if (count != (r.remaining() - 4) / 8 || (r.remaining() - 4) % 8 != 0) {
    throw DataError("checkpoint parameter count disagrees with file size");
  }
  std::vector<double> flat(count);
  for (double& v : flat) v = r.f64();
  return {d, flat};
}

inline std::vector<unsigned char> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path + "'");
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

inline void write_bytes(const std::string& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for '" + path + "'");
}

template <typename Model>
Model restore(Model m, const std::vector<double>& flat) {
  if (flat.size() != m.net.param_count()) throw DataError("checkpoint parameter count does not match its spec");
  assign_params(m.params, flat);
  return m;
}

inline Descriptor expect_role(const Descriptor& d, ModelRole role) {
  if (d.role != role) throw DataError("checkpoint holds a different model role");
  return d;
}

}  // namespace detail

inline std::vector<unsigned char> checkpoint_bytes(const GeneratorModel& m) {
  return detail::encode_checkpoint({ModelRole::generator, m.spec.architecture, m.spec.latent_dim, m.spec.image,
                                    m.spec.hidden_widths},
                                   m.flat_params());
}

inline std::vector<unsigned char> checkpoint_bytes(const DiscriminatorModel& m) {
  return detail::encode_checkpoint({ModelRole::discriminator, Architecture::mlp, 0, m.spec.image, m.spec.hidden_widths},
                                   m.flat_params());
}

inline std::vector<unsigned char> checkpoint_bytes(const EncoderModel& m) {
  return detail::encode_checkpoint(
      {ModelRole::encoder, Architecture::mlp, m.spec.latent_dim, m.spec.image, m.spec.hidden_widths}, m.flat_params());
}

template <typename Model>
void save_checkpoint(const std::string& path, const Model& m) {
  detail::write_bytes(path, checkpoint_bytes(m));
}

inline GeneratorModel generator_from_bytes(const std::vector<unsigned char>& bytes) {
  auto [d, flat] = detail::decode_checkpoint(bytes);
  detail::expect_role(d, ModelRole::generator);
  return detail::restore(init_model(GeneratorSpec{d.architecture, d.latent_dim, d.image, d.hidden}, 0), flat);
}

inline DiscriminatorModel discriminator_from_bytes(const std::vector<unsigned char>& bytes) {
  auto [d, flat] = detail::decode_checkpoint(bytes);
  detail::expect_role(d, ModelRole::discriminator);
  return detail::restore(init_model(DiscriminatorSpec{d.image, d.hidden}, 0), flat);
}

inline EncoderModel encoder_from_bytes(const std::vector<unsigned char>& bytes) {
  auto [d, flat] = detail::decode_checkpoint(bytes);
  detail::expect_role(d, ModelRole::encoder);
  return detail::restore(init_model(EncoderSpec{d.image, d.latent_dim, d.hidden}, 0), flat);
}

inline GeneratorModel load_generator(const std::string& path) { return generator_from_bytes(detail::read_bytes(path)); }
inline DiscriminatorModel load_discriminator(const std::string& path) {
  return discriminator_from_bytes(detail::read_bytes(path));
}
inline EncoderModel load_encoder(const std::string& path) { return encoder_from_bytes(detail::read_bytes(path)); }

}  // namespace lamd
