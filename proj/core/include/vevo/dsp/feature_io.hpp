#pragma once

#include <filesystem>
#include <iosfwd>

#include "vevo/dsp/features.hpp"

namespace vevo::dsp {

// Little-endian feature container:
//   bytes 0..3   magic "VVFM"
//   u32          version (1)
//   u32          kind (FeatureKind)
//   u32          num_frames
//   u32          dim
//   i64, i64     frame_rate numerator, denominator
//   f32[...]     row-major payload, num_frames * dim values
void write_features(std::ostream& out, const FeatureMatrix& f);
FeatureMatrix read_features(std::istream& in);
void save_features(const std::filesystem::path& path, const FeatureMatrix& f);
FeatureMatrix load_features(const std::filesystem::path& path);

}  // namespace vevo::dsp
