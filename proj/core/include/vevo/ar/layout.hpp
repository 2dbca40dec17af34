#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "vevo/ar/vocabulary.hpp"
#include "vevo/tokenizer/tokens.hpp"

namespace vevo::ar {

enum class Mode { kIpl, kEpl };

enum class SpanType { kInstruction, kText, kProsody, kContentStyle };

/// Which input a span was taken from: the training target itself, the
/// conversion source, a style/timbre reference, or a melody input (MIDI,
/// humming, instrument).
enum class SpanRole { kTarget, kSource, kReference, kMelody };

struct Span {
  SpanType type = SpanType::kText;
  SpanRole role = SpanRole::kTarget;
  std::size_t begin = 0;  // half-open [begin, end)
  std::size_t end = 0;
  friend bool operator==(const Span&, const Span&) = default;
};

struct SequenceLayout {
  std::vector<std::int32_t> ids;
  std::vector<std::uint8_t> loss_mask;
  Mode mode = Mode::kIpl;
  std::vector<Span> spans;

  [[nodiscard]] std::size_t size() const { return ids.size(); }
  [[nodiscard]] std::size_t mask_count() const;
  friend bool operator==(const SequenceLayout&, const SequenceLayout&) = default;
};

inline constexpr std::string_view kIplInstruction =
    "User will provide you with a text. Please vocalize it with natural expression.";
inline constexpr std::string_view kEplInstruction =
    "User will provide you with a text. Please first generate a good prosodic instruction, then vocalize the "
    "text based on it.";
/// Joins multiple text inputs (for example reference and target transcripts).
inline constexpr char kTextSeparator = ' ';

std::string_view to_string(Mode mode);
std::string_view to_string(SpanType type);
std::string_view to_string(SpanRole role);

/// [I_ipl, text, <start_of_cs>, cs..., <end_of_cs>]; loss on the cs span only.
SequenceLayout build_ipl(std::string_view text, const tokenizer::TokenSequence& cs, const Vocabulary& vocab);

/// [I_epl, text, <start_of_p>, p..., <end_of_p>, <start_of_cs>, cs..., <end_of_cs>].
SequenceLayout build_epl(std::string_view text, const tokenizer::TokenSequence& p,
                         const tokenizer::TokenSequence& cs, const Vocabulary& vocab);

/// One text or prosody input of an inference prefix.
template <typename Payload>
struct Part {
  Payload value;
  SpanRole role = SpanRole::kSource;
};

/// Inference prefix ending inside an open cs span: texts are joined with
/// kTextSeparator, all prosody runs share one delimited span (EPL only), and
/// `cs_prompt` tokens follow <start_of_cs> for continuation.
struct PrefixSpec {
  Mode mode = Mode::kIpl;
  std::vector<Part<std::string>> texts;
  std::vector<Part<tokenizer::TokenSequence>> prosody;
  std::vector<std::int32_t> cs_prompt;  // content-style codes, without offsets
  SpanRole cs_prompt_role = SpanRole::kReference;
};

SequenceLayout build_prefix(const PrefixSpec& spec, const Vocabulary& vocab);

/// Copy of `layout` cut right after <start_of_cs>; the mask is cleared.
SequenceLayout truncate_before_cs(const SequenceLayout& layout);

/// Spans ignoring the instruction, each as a (type, role) pair.
std::vector<std::pair<SpanType, SpanRole>> span_signature(const SequenceLayout& layout);

struct ParsedLayout {
  Mode mode = Mode::kIpl;
  std::string text;
  std::vector<std::int32_t> prosody;  // codes, without offsets
  std::vector<std::int32_t> cs;
  bool cs_closed = false;
};

/// Inverse of the builders; validates delimiters and span tiling.
ParsedLayout parse_layout(const SequenceLayout& layout, const Vocabulary& vocab);

/// Fair coin per sample, independent of the sample's domain.
Mode choose_mode(std::mt19937_64& rng);

/// Stable JSON snapshot used for golden comparisons.
std::string layout_to_json(const SequenceLayout& layout);
SequenceLayout layout_from_json(std::string_view text);

}  // namespace vevo::ar
