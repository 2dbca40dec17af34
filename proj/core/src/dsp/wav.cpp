#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <string>

#include "common/binary_io.hpp"
#include "vevo/common/error.hpp"
#include "vevo/dsp/waveform.hpp"

namespace vevo::dsp {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xfffe;

struct FmtChunk {
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits = 0;
};

std::string chunk_id(std::istream& in) {
  std::string id(4, '\0');
  in.read(id.data(), 4);
  if (!in) throw FormatError("wav: truncated chunk header");
  return id;
}

}  // namespace

Waveform read_wav(const std::filesystem::path& path, int target_rate) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("wav: cannot open " + path.string());

  if (chunk_id(in) != "RIFF") throw FormatError("wav: missing RIFF tag in " + path.string());
  io::read_le<std::uint32_t>(in);
  if (chunk_id(in) != "WAVE") throw FormatError("wav: missing WAVE tag in " + path.string());

  FmtChunk fmt;
  bool have_fmt = false;
  std::vector<char> payload;
  bool have_data = false;
  while (!have_data) {
    std::string id;
    try {
      id = chunk_id(in);
    } catch (const FormatError&) {
      break;
    }
    const auto size = io::read_le<std::uint32_t>(in);
    if (id == "fmt ") {
      if (size < 16) throw FormatError("wav: fmt chunk too small");
      fmt.format = io::read_le<std::uint16_t>(in);
      fmt.channels = io::read_le<std::uint16_t>(in);
      fmt.sample_rate = io::read_le<std::uint32_t>(in);
      io::read_le<std::uint32_t>(in);  // byte rate
      io::read_le<std::uint16_t>(in);  // block align
      fmt.bits = io::read_le<std::uint16_t>(in);
      std::uint32_t rest = size - 16;
      if (fmt.format == kFormatExtensible && rest >= 10) {
        io::read_le<std::uint16_t>(in);  // cb size
        io::read_le<std::uint16_t>(in);  // valid bits
        io::read_le<std::uint32_t>(in);  // channel mask
        fmt.format = io::read_le<std::uint16_t>(in);
        rest -= 10;
      }
      in.ignore(rest + (size & 1u));
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw FormatError("wav: data chunk before fmt chunk");
      payload.resize(size);
      in.read(payload.data(), size);
      if (static_cast<std::uint32_t>(in.gcount()) != size) throw FormatError("wav: truncated data");
      have_data = true;
    } else {
      in.ignore(size + (size & 1u));
    }
  }
  if (!have_fmt || !have_data) throw FormatError("wav: missing fmt or data chunk");
  if (fmt.channels != 1) {
    throw ChannelError("wav: expected mono audio, got " + std::to_string(fmt.channels) +
                       " channels in " + path.string());
  }
  if (fmt.sample_rate == 0) throw FormatError("wav: zero sample rate");

  Waveform w;
  w.sample_rate = static_cast<int>(fmt.sample_rate);
  if (fmt.format == kFormatPcm && fmt.bits == 16) {
    const std::size_t n = payload.size() / 2;
    w.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto lo = static_cast<std::uint8_t>(payload[2 * i]);
      const auto hi = static_cast<std::uint8_t>(payload[2 * i + 1]);
      const auto v = static_cast<std::int16_t>(static_cast<std::uint16_t>(lo | (hi << 8)));
      w.samples[i] = static_cast<float>(v) / 32768.0f;
    }
  } else if (fmt.format == kFormatFloat && fmt.bits == 32) {
    const std::size_t n = payload.size() / 4;
    w.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t u = 0;
      for (int b = 0; b < 4; ++b) {
        u |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(payload[4 * i + b])) << (8 * b);
      }
      const float v = std::bit_cast<float>(u);
      if (!std::isfinite(v)) throw FormatError("wav: non-finite float sample");
      w.samples[i] = std::clamp(v, -1.0f, 1.0f);
    }
  } else {
    throw FormatError("wav: unsupported encoding (format " + std::to_string(fmt.format) + ", " +
                      std::to_string(fmt.bits) + " bits)");
  }

  if (target_rate > 0 && w.sample_rate != target_rate) w = resample(w, target_rate);
  return w;
}

void write_wav(const std::filesystem::path& path, const Waveform& w, WavEncoding encoding) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("wav: cannot write " + path.string());
  const bool pcm = encoding == WavEncoding::kPcm16;
  const std::uint16_t bits = pcm ? 16 : 32;
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(w.samples.size() * (bits / 8));

  io::write_magic(out, "RIFF");
  io::write_le<std::uint32_t>(out, 36 + data_bytes);
  io::write_magic(out, "WAVE");
  io::write_magic(out, "fmt ");
  io::write_le<std::uint32_t>(out, 16);
  io::write_le<std::uint16_t>(out, pcm ? kFormatPcm : kFormatFloat);
  io::write_le<std::uint16_t>(out, 1);
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(w.sample_rate));
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(w.sample_rate) * (bits / 8));
  io::write_le<std::uint16_t>(out, bits / 8);
  io::write_le<std::uint16_t>(out, bits);
  io::write_magic(out, "data");
  io::write_le<std::uint32_t>(out, data_bytes);
  for (float s : w.samples) {
    const float c = std::clamp(s, -1.0f, 1.0f);
    if (pcm) {
      const auto q = static_cast<std::int16_t>(
          std::clamp(std::lround(static_cast<double>(c) * 32768.0), -32768L, 32767L));
      io::write_le<std::int16_t>(out, q);
    } else {
      io::write_f32(out, c);
    }
  }
  if (!out) throw IoError("wav: write failed for " + path.string());
}

Waveform make_tone(double frequency_hz, double seconds, double amplitude, int sample_rate) {
  Waveform w;
  w.sample_rate = sample_rate;
  const auto n = static_cast<std::size_t>(std::llround(seconds * sample_rate));
  w.samples.resize(n);
  const double step = 2.0 * std::numbers::pi * frequency_hz / sample_rate;
  for (std::size_t i = 0; i < n; ++i) {
    w.samples[i] = static_cast<float>(amplitude * std::sin(step * static_cast<double>(i)));
  }
  return w;
}

}  // namespace vevo::dsp
