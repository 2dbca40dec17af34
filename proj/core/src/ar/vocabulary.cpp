#include "vevo/ar/vocabulary.hpp"

#include <cstdio>

#include "vevo/common/error.hpp"

namespace vevo::ar {

Vocabulary::Vocabulary(std::size_t prosody_size, std::size_t cs_size)
    : prosody_size_(prosody_size),
      cs_size_(cs_size),
      prosody_offset_(kTextSize + kNumSpecials),
      cs_offset_(kTextSize + kNumSpecials + prosody_size) {
  if (prosody_size == 0 || cs_size == 0) throw ParameterError("Vocabulary: token ranges must be non-empty");
}

std::int32_t Vocabulary::special(Special s) const {
  return static_cast<std::int32_t>(kTextSize) + static_cast<std::int32_t>(s);
}

std::vector<std::int32_t> Vocabulary::encode_text(std::string_view text) const {
  std::vector<std::int32_t> ids;
  ids.reserve(text.size());
  std::string bad;
  for (char c : text) {
    if (c < kFirstChar || c > kLastChar) {
      char buf[8];
      std::snprintf(buf, sizeof buf, "0x%02x", static_cast<unsigned char>(c));
      if (bad.find(buf) == std::string::npos) bad += (bad.empty() ? "" : ", ") + std::string(buf);
      continue;
    }
    ids.push_back(c - kFirstChar);
  }
  if (!bad.empty()) throw VocabularyError("text contains characters outside the alphabet: " + bad);
  return ids;
}

std::string Vocabulary::decode_text(std::span<const std::int32_t> ids) const {
  std::string out;
  out.reserve(ids.size());
  for (auto id : ids) {
    if (classify(id) != TokenClass::kText) throw VocabularyError("decode_text: id " + std::to_string(id) + " is not text");
    out.push_back(static_cast<char>(kFirstChar + id));
  }
  return out;
}

std::int32_t Vocabulary::prosody_id(std::int32_t code) const {
  if (code < 0 || static_cast<std::size_t>(code) >= prosody_size_) {
    throw VocabularyError("prosody code " + std::to_string(code) + " out of range");
  }
  return static_cast<std::int32_t>(prosody_offset_) + code;
}

std::int32_t Vocabulary::cs_id(std::int32_t code) const {
  if (code < 0 || static_cast<std::size_t>(code) >= cs_size_) {
    throw VocabularyError("content-style code " + std::to_string(code) + " out of range");
  }
  return static_cast<std::int32_t>(cs_offset_) + code;
}

std::int32_t Vocabulary::prosody_code(std::int32_t id) const {
  if (classify(id) != TokenClass::kProsody) throw VocabularyError("id " + std::to_string(id) + " is not prosody");
  return id - static_cast<std::int32_t>(prosody_offset_);
}

std::int32_t Vocabulary::cs_code(std::int32_t id) const {
  if (classify(id) != TokenClass::kContentStyle) {
    throw VocabularyError("id " + std::to_string(id) + " is not content-style");
  }
  return id - static_cast<std::int32_t>(cs_offset_);
}

TokenClass Vocabulary::classify(std::int32_t id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= size()) throw VocabularyError("id " + std::to_string(id) + " out of range");
  const auto u = static_cast<std::size_t>(id);
  if (u < kTextSize) return TokenClass::kText;
  if (u < prosody_offset_) return TokenClass::kSpecial;
  if (u < cs_offset_) return TokenClass::kProsody;
  return TokenClass::kContentStyle;
}

}  // namespace vevo::ar
