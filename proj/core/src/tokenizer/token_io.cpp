#include <fstream>
#include <json.hpp>

#include "common/binary_io.hpp"
#include "vevo/common/error.hpp"
#include "vevo/tokenizer/tokens.hpp"

namespace vevo::tokenizer {

std::string_view to_string(TokenKind kind) {
  switch (kind) {
    case TokenKind::kProsody: return "prosody";
    case TokenKind::kContentStyle: return "content_style";
  }
  return "unknown";
}

TokenKind token_kind_from_string(std::string_view name) {
  if (name == "prosody") return TokenKind::kProsody;
  if (name == "content_style") return TokenKind::kContentStyle;
  throw FormatError("unknown token kind '" + std::string(name) + "'");
}

double TokenSequence::duration_seconds() const {
  return static_cast<double>(ids.size()) / frame_rate.value();
}

void TokenSequence::check_range(std::size_t vocab_size) const {
  for (auto id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab_size) {
      throw VocabularyError("token id " + std::to_string(id) + " outside vocabulary of size " +
                           std::to_string(vocab_size));
    }
  }
}

void write_tokens(std::ostream& out, const TokenSequence& seq) {
  io::write_magic(out, "VVTK");
  io::write_le<std::uint32_t>(out, 1);
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(seq.kind));
  io::write_le<std::int64_t>(out, seq.frame_rate.num);
  io::write_le<std::int64_t>(out, seq.frame_rate.den);
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(seq.ids.size()));
  for (auto id : seq.ids) {
    if (id < 0) throw ParameterError("write_tokens: negative token id");
    io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(id));
  }
}

TokenSequence read_tokens(std::istream& in) {
  io::expect_magic(in, "VVTK", "token container");
  if (io::read_le<std::uint32_t>(in) != 1) throw FormatError("token container: unsupported version");
  const auto kind = io::read_le<std::uint32_t>(in);
  if (kind > static_cast<std::uint32_t>(TokenKind::kContentStyle)) throw FormatError("token container: bad kind");
  TokenSequence seq;
  seq.kind = static_cast<TokenKind>(kind);
  const auto num = io::read_le<std::int64_t>(in);
  const auto den = io::read_le<std::int64_t>(in);
  if (den <= 0 || num <= 0) throw FormatError("token container: bad frame rate");
  seq.frame_rate = Rational(num, den);
  seq.ids.resize(io::read_le<std::uint32_t>(in));
  for (auto& id : seq.ids) {
    const auto v = io::read_le<std::uint32_t>(in);
    if (v > static_cast<std::uint32_t>(INT32_MAX)) throw FormatError("token container: id overflow");
    id = static_cast<std::int32_t>(v);
  }
  return seq;
}

void save_tokens(const std::filesystem::path& path, const TokenSequence& seq) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_tokens(out, seq);
}

TokenSequence load_tokens(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_tokens(in);
}

std::string tokens_to_json(const TokenSequence& seq) {
  nlohmann::json j;
  j["kind"] = to_string(seq.kind);
  j["frame_rate"] = {seq.frame_rate.num, seq.frame_rate.den};
  j["ids"] = seq.ids;
  return j.dump();
}

TokenSequence tokens_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    TokenSequence seq;
    seq.kind = token_kind_from_string(j.at("kind").get<std::string>());
    const auto& rate = j.at("frame_rate");
    seq.frame_rate = Rational(rate.at(0).get<std::int64_t>(), rate.at(1).get<std::int64_t>());
    seq.ids = j.at("ids").get<std::vector<std::int32_t>>();
    return seq;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("token json: ") + e.what());
  }
}

}  // namespace vevo::tokenizer
