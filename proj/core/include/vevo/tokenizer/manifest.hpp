#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace vevo::tokenizer {

/// One JSONL line: {"audio_path": ..., "text": ..., "language": ...}.
struct ManifestEntry {
  std::filesystem::path audio_path;
  std::string text;
  std::string language;
};

/// Relative audio paths are resolved against the manifest's directory.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);

}  // namespace vevo::tokenizer
