#pragma once

#include <filesystem>
#include <span>
#include <vector>

namespace vevo::dsp {

inline constexpr int kSampleRate = 24000;

/// Mono PCM audio with samples in [-1, 1].
struct Waveform {
  std::vector<float> samples;
  int sample_rate = kSampleRate;

  [[nodiscard]] double duration_seconds() const {
    return static_cast<double>(samples.size()) / static_cast<double>(sample_rate);
  }
  [[nodiscard]] bool empty() const { return samples.empty(); }
};

enum class WavEncoding { kPcm16, kFloat32 };

/// Reads a mono 16-bit PCM or 32-bit float RIFF/WAVE file. Audio at any rate
/// other than `target_rate` is resampled; pass 0 to keep the file's rate.
/// Throws FormatError on a malformed header, ChannelError on multichannel input.
Waveform read_wav(const std::filesystem::path& path, int target_rate = kSampleRate);

void write_wav(const std::filesystem::path& path, const Waveform& w,
               WavEncoding encoding = WavEncoding::kPcm16);

/// Band-limited (windowed-sinc) resampling. Output length is
/// round(len * out_rate / in_rate).
std::vector<float> resample(std::span<const float> x, double in_rate, double out_rate);

Waveform resample(const Waveform& w, int out_rate);

/// Sine tone helper used throughout tests and corpus tooling.
Waveform make_tone(double frequency_hz, double seconds, double amplitude = 0.5,
                   int sample_rate = kSampleRate);

}  // namespace vevo::dsp
