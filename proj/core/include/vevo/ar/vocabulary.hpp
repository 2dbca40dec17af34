#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vevo::ar {

enum class Special : std::int32_t { kPad = 0, kBos, kEos, kStartOfP, kEndOfP, kStartOfCs, kEndOfCs };
inline constexpr std::size_t kNumSpecials = 7;

enum class TokenClass { kText, kSpecial, kProsody, kContentStyle };

/// Unified id space laid out as
///   [printable ASCII text | specials | prosody codes | content-style codes].
/// Text is tokenized one character per id.
class Vocabulary {
 public:
  static constexpr char kFirstChar = ' ';
  static constexpr char kLastChar = '~';
  static constexpr std::size_t kTextSize = static_cast<std::size_t>(kLastChar - kFirstChar) + 1;

  Vocabulary(std::size_t prosody_size, std::size_t cs_size);

  [[nodiscard]] std::size_t size() const { return cs_offset_ + cs_size_; }
  [[nodiscard]] std::size_t prosody_size() const { return prosody_size_; }
  [[nodiscard]] std::size_t cs_size() const { return cs_size_; }
  [[nodiscard]] std::int32_t prosody_offset() const { return static_cast<std::int32_t>(prosody_offset_); }
  [[nodiscard]] std::int32_t cs_offset() const { return static_cast<std::int32_t>(cs_offset_); }
  [[nodiscard]] std::int32_t special(Special s) const;

  /// Throws VocabularyError naming every character outside the alphabet.
  [[nodiscard]] std::vector<std::int32_t> encode_text(std::string_view text) const;
  [[nodiscard]] std::string decode_text(std::span<const std::int32_t> ids) const;

  [[nodiscard]] std::int32_t prosody_id(std::int32_t code) const;
  [[nodiscard]] std::int32_t cs_id(std::int32_t code) const;
  [[nodiscard]] std::int32_t prosody_code(std::int32_t id) const;
  [[nodiscard]] std::int32_t cs_code(std::int32_t id) const;

  [[nodiscard]] TokenClass classify(std::int32_t id) const;
  [[nodiscard]] bool is_cs(std::int32_t id) const { return classify(id) == TokenClass::kContentStyle; }

  friend bool operator==(const Vocabulary&, const Vocabulary&) = default;

 private:
  std::size_t prosody_size_;
  std::size_t cs_size_;
  std::size_t prosody_offset_;
  std::size_t cs_offset_;
};

}  // namespace vevo::ar
