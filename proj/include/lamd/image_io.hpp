#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <iterator>
#include <string>

#include "lamd/error.hpp"
#include "lamd/tensor.hpp"

// Binary PGM (P5, one channel) and PPM (P6, three channels), maxval 255.
// Pixel values in [-1, 1] map to bytes by round-half-to-even of
// (v + 1) * 127.5; reading inverts the map exactly for quantised values.

namespace lamd {

inline unsigned char quantize_pixel(double v) {
  const double scaled = std::clamp((v + 1.0) * 127.5, 0.0, 255.0);
  return static_cast<unsigned char>(std::nearbyint(scaled));
}

inline double dequantize_pixel(unsigned char b) { return static_cast<double>(b) / 127.5 - 1.0; }

/// Encodes a (c, h, w) or (1, c, h, w) image with c in {1, 3}.
inline std::string encode_pnm(const Tensor& image) {
  Shape s = image.shape();
  if (s.size() == 4 && s[0] == 1) s.erase(s.begin());
  if (s.size() != 3 || (s[0] != 1 && s[0] != 3)) {
    throw ShapeError("encode_pnm expects 1 or 3 channels, got " + shape_str(image.shape()));
  }
  const std::size_t c = s[0], h = s[1], w = s[2];
  std::string out = (c == 1 ? "P5\n" : "P6\n") + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t ch = 0; ch < c; ++ch) out.push_back(static_cast<char>(quantize_pixel(image[(ch * h + y) * w + x])));
  return out;
}

/// Decodes to a (1, c, h, w) tensor.
inline Tensor decode_pnm(const std::string& bytes) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_uint = [&]() -> std::size_t {
    skip_space();
    if (pos >= bytes.size() || !std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      throw DataError("malformed PNM header");
    }
    std::size_t v = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      v = v * 10 + static_cast<std::size_t>(bytes[pos] - '0');
      if (v > (1u << 20)) throw DataError("PNM dimension too large");
      ++pos;
    }
    return v;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw DataError("malformed PNM header: expected P5 or P6");
  }
  const std::size_t c = bytes[1] == '5' ? 1 : 3;
  pos = 2;
  const std::size_t w = read_uint(), h = read_uint(), maxval = read_uint();
  if (maxval != 255) throw DataError("PNM maxval must be 255");
  if (w == 0 || h == 0) throw DataError("PNM has an empty dimension");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw DataError("malformed PNM header");
  }
  ++pos;
  if (bytes.size() - pos != c * h * w) throw DataError("PNM payload size mismatch");
  Tensor image({1, c, h, w});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t ch = 0; ch < c; ++ch)
        image[(ch * h + y) * w + x] = dequantize_pixel(static_cast<unsigned char>(bytes[pos++]));
  return image;
}

inline void write_pnm(const std::string& path, const Tensor& image) {
  const std::string bytes = encode_pnm(image);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for '" + path + "'");
}

inline Tensor read_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  return decode_pnm(std::string(std::istreambuf_iterator<char>(in), {}));
}

}  // namespace lamd
