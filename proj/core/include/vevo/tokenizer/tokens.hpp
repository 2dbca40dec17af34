#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "vevo/common/rational.hpp"

namespace vevo::tokenizer {

enum class TokenKind : std::uint32_t { kProsody = 0, kContentStyle = 1 };

std::string_view to_string(TokenKind kind);
TokenKind token_kind_from_string(std::string_view name);

struct TokenSequence {
  std::vector<std::int32_t> ids;
  Rational frame_rate{1, 1};
  TokenKind kind = TokenKind::kProsody;

  [[nodiscard]] std::size_t size() const { return ids.size(); }
  [[nodiscard]] double duration_seconds() const;
  /// Throws if any id falls outside [0, vocab_size).
  void check_range(std::size_t vocab_size) const;
};

// Binary container, little-endian:
//   "VVTK" | u32 version=1 | u32 kind | i64 rate_num | i64 rate_den | u32 count | u32 ids[count]
void write_tokens(std::ostream& out, const TokenSequence& seq);
TokenSequence read_tokens(std::istream& in);
void save_tokens(const std::filesystem::path& path, const TokenSequence& seq);
TokenSequence load_tokens(const std::filesystem::path& path);

/// {"kind": "prosody", "frame_rate": [25, 4], "ids": [...]}
std::string tokens_to_json(const TokenSequence& seq);
TokenSequence tokens_from_json(std::string_view text);

}  // namespace vevo::tokenizer
