#include <fstream>

#include "common/binary_io.hpp"
#include "vevo/common/error.hpp"
#include "vevo/dsp/feature_io.hpp"

namespace vevo::dsp {

void write_features(std::ostream& out, const FeatureMatrix& f) {
  io::write_magic(out, "VVFM");
  io::write_le<std::uint32_t>(out, 1);
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(f.kind));
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(f.num_frames));
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(f.dim));
  io::write_le<std::int64_t>(out, f.frame_rate.num);
  io::write_le<std::int64_t>(out, f.frame_rate.den);
  for (float v : f.data) io::write_f32(out, v);
}

FeatureMatrix read_features(std::istream& in) {
  io::expect_magic(in, "VVFM", "feature container");
  if (io::read_le<std::uint32_t>(in) != 1) throw FormatError("feature container: unsupported version");
  const auto kind = io::read_le<std::uint32_t>(in);
  if (kind > static_cast<std::uint32_t>(FeatureKind::kPseudoContent)) {
    throw FormatError("feature container: unknown kind tag");
  }
  const auto frames = io::read_le<std::uint32_t>(in);
  const auto dim = io::read_le<std::uint32_t>(in);
  const auto num = io::read_le<std::int64_t>(in);
  const auto den = io::read_le<std::int64_t>(in);
  if (den <= 0) throw FormatError("feature container: bad frame rate");
  FeatureMatrix f(frames, dim, static_cast<FeatureKind>(kind), Rational(num, den));
  for (auto& v : f.data) v = io::read_f32(in);
  return f;
}

void save_features(const std::filesystem::path& path, const FeatureMatrix& f) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_features(out, f);
}

FeatureMatrix load_features(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_features(in);
}

}  // namespace vevo::dsp
