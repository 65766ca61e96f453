#include "s4xbar/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "s4xbar/common.hpp"

namespace s4xbar {

namespace {

struct Reader {
  std::string path;
  std::ifstream in;

  explicit Reader(const std::string& p) : path(p), in(p, std::ios::binary) {
    if (!in) throw DataError("wav: cannot open " + path);
  }

  void read(void* dst, std::size_t n) {
    in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (!in) throw DataError("wav: truncated file " + path);
  }
  std::uint32_t u32() {
    std::uint8_t b[4];
    read(b, 4);
    return b[0] | (b[1] << 8) | (b[2] << 16) | (std::uint32_t(b[3]) << 24);
  }
  std::uint16_t u16() {
    std::uint8_t b[2];
    read(b, 2);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
  }
  std::string tag() {
    char t[5] = {};
    read(t, 4);
    return t;
  }
  void skip(std::uint32_t n) {
    in.seekg(n, std::ios::cur);
    if (!in) throw DataError("wav: truncated file " + path);
  }
};

}  // namespace

std::vector<double> read_wav16_mono(const std::string& path) {
  Reader r(path);
  if (r.tag() != "RIFF") throw DataError("wav: not a RIFF file: " + path);
  r.u32();  // riff size
  if (r.tag() != "WAVE") throw DataError("wav: not a WAVE file: " + path);

  bool have_fmt = false;
  while (true) {
    std::string id;
    {
      char t[5] = {};
      r.in.read(t, 4);
      if (!r.in) throw DataError("wav: missing data chunk in " + path);
      id = t;
    }
    std::uint32_t size = r.u32();
    if (id == "fmt ") {
      const std::uint16_t format = r.u16();
      const std::uint16_t channels = r.u16();
      r.u32();  // sample rate
      r.u32();  // byte rate
      r.u16();  // block align
      const std::uint16_t bits = r.u16();
      if (size > 16) r.skip(size - 16);
      if (format != 1) throw DataError("wav: not PCM: " + path);
      if (channels != 1) throw DataError("wav: stereo/multichannel not supported: " + path);
      if (bits != 16) throw DataError("wav: expected 16-bit samples: " + path);
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw DataError("wav: data chunk before fmt in " + path);
      const std::size_t count = size / 2;
      std::vector<double> out(count);
      std::vector<std::uint8_t> raw(size);
      r.read(raw.data(), size);
      for (std::size_t i = 0; i < count; ++i) {
        const std::int16_t v =
            static_cast<std::int16_t>(raw[2 * i] | (raw[2 * i + 1] << 8));
        out[i] = static_cast<double>(v) / 32768.0;
      }
      return out;
    } else {
      r.skip(size + (size & 1));  // chunks are word-aligned
    }
  }
}

void write_wav16_mono(const std::string& path, const std::vector<double>& samples,
                      int sample_rate) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("wav: cannot write " + path);

  auto u32 = [&](std::uint32_t v) {
    std::uint8_t b[4] = {std::uint8_t(v), std::uint8_t(v >> 8), std::uint8_t(v >> 16),
                         std::uint8_t(v >> 24)};
    out.write(reinterpret_cast<char*>(b), 4);
  };
  auto u16 = [&](std::uint16_t v) {
    std::uint8_t b[2] = {std::uint8_t(v), std::uint8_t(v >> 8)};
    out.write(reinterpret_cast<char*>(b), 2);
  };

  const std::uint32_t data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  out.write("RIFF", 4);
  u32(36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  u32(16);
  u16(1);  // PCM
  u16(1);  // mono
  u32(static_cast<std::uint32_t>(sample_rate));
  u32(static_cast<std::uint32_t>(sample_rate * 2));
  u16(2);
  u16(16);
  out.write("data", 4);
  u32(data_bytes);
  for (double s : samples) {
    const double clipped = std::clamp(s, -1.0, 1.0);
    const auto v = static_cast<std::int16_t>(
        std::clamp(std::lround(clipped * 32767.0), -32768L, 32767L));
    u16(static_cast<std::uint16_t>(v));
  }
  if (!out) throw DataError("wav: write failed for " + path);
}

}  // namespace s4xbar
