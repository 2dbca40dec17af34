#include "vevo/tokenizer/manifest.hpp"

#include <fstream>
#include <json.hpp>

#include "vevo/common/error.hpp"

namespace vevo::tokenizer {

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  const auto base = path.parent_path();
  std::vector<ManifestEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ManifestEntry e;
      e.audio_path = j.at("audio_path").get<std::string>();
      if (e.audio_path.is_relative()) e.audio_path = base / e.audio_path;
      e.text = j.value("text", "");
      e.language = j.value("language", "");
      entries.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + ex.what());
    }
  }
  return entries;
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest " + path.string());
  const auto base = path.parent_path();
  for (const auto& e : entries) {
    auto audio = e.audio_path;
    if (!base.empty() && audio.is_absolute()) {
      const auto rel = audio.lexically_relative(base);
      if (!rel.empty() && *rel.begin() != "..") audio = rel;
    }
    nlohmann::json j{{"audio_path", audio.generic_string()}, {"text", e.text}, {"language", e.language}};
    out << j.dump() << '\n';
  }
}

}  // namespace vevo::tokenizer
