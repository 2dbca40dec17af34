#include "vevo/ar/layout.hpp"

#include <algorithm>
#include <json.hpp>

#include "vevo/common/error.hpp"

namespace vevo::ar {
namespace {

using tokenizer::TokenKind;
using tokenizer::TokenSequence;

class Builder {
 public:
  Builder(const Vocabulary& vocab, Mode mode) : vocab_(vocab) { layout_.mode = mode; }

  void push(SpanType type, SpanRole role, const std::vector<std::int32_t>& ids, bool loss) {
    const std::size_t begin = layout_.ids.size();
    layout_.ids.insert(layout_.ids.end(), ids.begin(), ids.end());
    layout_.loss_mask.insert(layout_.loss_mask.end(), ids.size(), loss ? 1 : 0);
    layout_.spans.push_back({type, role, begin, layout_.ids.size()});
  }

  void instruction() {
    const auto text = layout_.mode == Mode::kIpl ? kIplInstruction : kEplInstruction;
    push(SpanType::kInstruction, SpanRole::kTarget, vocab_.encode_text(text), false);
  }

  std::vector<std::int32_t> prosody_ids(const TokenSequence& p) const {
    if (p.kind != TokenKind::kProsody) throw ParameterError("layout: prosody span needs prosody tokens");
    std::vector<std::int32_t> ids;
    for (auto c : p.ids) ids.push_back(vocab_.prosody_id(c));
    return ids;
  }

  std::vector<std::int32_t> cs_ids(std::span<const std::int32_t> codes) const {
    std::vector<std::int32_t> ids;
    for (auto c : codes) ids.push_back(vocab_.cs_id(c));
    return ids;
  }

  SequenceLayout take() { return std::move(layout_); }

 private:
  const Vocabulary& vocab_;
  SequenceLayout layout_;
};

void require_text(std::string_view text) {
  if (text.empty()) throw ParameterError("layout: text must be non-empty");
}

void require_cs(const TokenSequence& cs) {
  if (cs.kind != TokenKind::kContentStyle) throw ParameterError("layout: cs span needs content-style tokens");
}

void closed_cs_span(Builder& b, const Vocabulary& vocab, const TokenSequence& cs) {
  auto ids = b.cs_ids(cs.ids);
  ids.insert(ids.begin(), vocab.special(Special::kStartOfCs));
  ids.push_back(vocab.special(Special::kEndOfCs));
  b.push(SpanType::kContentStyle, SpanRole::kTarget, ids, true);
}

template <typename E>
E lookup(std::string_view name, std::initializer_list<E> all, const char* what) {
  for (E e : all) {
    if (to_string(e) == name) return e;
  }
  throw FormatError(std::string("layout json: unknown ") + what + " '" + std::string(name) + "'");
}

}  // namespace

std::size_t SequenceLayout::mask_count() const {
  return static_cast<std::size_t>(std::count(loss_mask.begin(), loss_mask.end(), std::uint8_t{1}));
}

std::string_view to_string(Mode mode) { return mode == Mode::kIpl ? "ipl" : "epl"; }

std::string_view to_string(SpanType type) {
  switch (type) {
    case SpanType::kInstruction: return "instruction";
    case SpanType::kText: return "text";
    case SpanType::kProsody: return "prosody";
    case SpanType::kContentStyle: return "cs";
  }
  return "?";
}

std::string_view to_string(SpanRole role) {
  switch (role) {
    case SpanRole::kTarget: return "target";
    case SpanRole::kSource: return "source";
    case SpanRole::kReference: return "reference";
    case SpanRole::kMelody: return "melody";
  }
  return "?";
}

SequenceLayout build_ipl(std::string_view text, const TokenSequence& cs, const Vocabulary& vocab) {
  require_text(text);
  require_cs(cs);
  Builder b(vocab, Mode::kIpl);
  b.instruction();
  b.push(SpanType::kText, SpanRole::kTarget, vocab.encode_text(text), false);
  closed_cs_span(b, vocab, cs);
  return b.take();
}

SequenceLayout build_epl(std::string_view text, const TokenSequence& p, const TokenSequence& cs,
                         const Vocabulary& vocab) {
  require_text(text);
  require_cs(cs);
  Builder b(vocab, Mode::kEpl);
  b.instruction();
  b.push(SpanType::kText, SpanRole::kTarget, vocab.encode_text(text), false);
  auto pids = b.prosody_ids(p);
  pids.insert(pids.begin(), vocab.special(Special::kStartOfP));
  pids.push_back(vocab.special(Special::kEndOfP));
  b.push(SpanType::kProsody, SpanRole::kTarget, pids, false);
  closed_cs_span(b, vocab, cs);
  return b.take();
}

SequenceLayout build_prefix(const PrefixSpec& spec, const Vocabulary& vocab) {
  if (spec.texts.empty()) throw ParameterError("build_prefix: at least one text input is required");
  if (spec.mode == Mode::kEpl && spec.prosody.empty()) throw ParameterError("build_prefix: EPL needs prosody input");
  if (spec.mode == Mode::kIpl && !spec.prosody.empty()) throw ParameterError("build_prefix: IPL takes no prosody");
  Builder b(vocab, spec.mode);
  b.instruction();
  for (std::size_t i = 0; i < spec.texts.size(); ++i) {
    require_text(spec.texts[i].value);
    auto ids = vocab.encode_text(spec.texts[i].value);
    if (i + 1 < spec.texts.size()) ids.push_back(vocab.encode_text(std::string(1, kTextSeparator))[0]);
    b.push(SpanType::kText, spec.texts[i].role, ids, false);
  }
  for (std::size_t i = 0; i < spec.prosody.size(); ++i) {
    auto ids = b.prosody_ids(spec.prosody[i].value);
    if (i == 0) ids.insert(ids.begin(), vocab.special(Special::kStartOfP));
    if (i + 1 == spec.prosody.size()) ids.push_back(vocab.special(Special::kEndOfP));
    b.push(SpanType::kProsody, spec.prosody[i].role, ids, false);
  }
  auto cs = b.cs_ids(spec.cs_prompt);
  cs.insert(cs.begin(), vocab.special(Special::kStartOfCs));
  b.push(SpanType::kContentStyle, spec.cs_prompt.empty() ? SpanRole::kTarget : spec.cs_prompt_role, cs, false);
  return b.take();
}

SequenceLayout truncate_before_cs(const SequenceLayout& layout) {
  SequenceLayout out;
  out.mode = layout.mode;
  for (const auto& s : layout.spans) {
    if (s.type == SpanType::kContentStyle) {
      out.spans.push_back({s.type, SpanRole::kTarget, s.begin, s.begin + 1});
      out.ids.assign(layout.ids.begin(), layout.ids.begin() + static_cast<std::ptrdiff_t>(s.begin + 1));
      out.loss_mask.assign(out.ids.size(), 0);
      return out;
    }
    out.spans.push_back(s);
  }
  throw ParameterError("truncate_before_cs: layout has no cs span");
}

std::vector<std::pair<SpanType, SpanRole>> span_signature(const SequenceLayout& layout) {
  std::vector<std::pair<SpanType, SpanRole>> sig;
  for (const auto& s : layout.spans) {
    if (s.type != SpanType::kInstruction) sig.emplace_back(s.type, s.role);
  }
  return sig;
}

ParsedLayout parse_layout(const SequenceLayout& layout, const Vocabulary& vocab) {
  if (layout.loss_mask.size() != layout.ids.size()) throw FormatError("layout: mask length differs from ids");
  std::size_t expected = 0;
  for (const auto& s : layout.spans) {
    if (s.begin != expected || s.end < s.begin) throw FormatError("layout: spans do not tile the sequence");
    expected = s.end;
  }
  if (expected != layout.ids.size()) throw FormatError("layout: spans do not cover the sequence");

  ParsedLayout out;
  out.mode = layout.mode;
  std::vector<std::int32_t> instr, text, prosody, cs;
  int stage = 0;  // 0 instruction, 1 text, 2 prosody, 3 cs
  for (const auto& s : layout.spans) {
    const int st = static_cast<int>(s.type);
    if (st < stage) throw FormatError("layout: spans out of order");
    stage = st;
    auto& dst = s.type == SpanType::kInstruction ? instr
                : s.type == SpanType::kText      ? text
                : s.type == SpanType::kProsody   ? prosody
                                                 : cs;
    dst.insert(dst.end(), layout.ids.begin() + static_cast<std::ptrdiff_t>(s.begin),
               layout.ids.begin() + static_cast<std::ptrdiff_t>(s.end));
  }
  const auto want = layout.mode == Mode::kIpl ? kIplInstruction : kEplInstruction;
  if (vocab.decode_text(instr) != want) throw FormatError("layout: instruction does not match the mode");
  out.text = vocab.decode_text(text);

  if (layout.mode == Mode::kEpl) {
    if (prosody.size() < 2 || prosody.front() != vocab.special(Special::kStartOfP) ||
        prosody.back() != vocab.special(Special::kEndOfP)) {
      throw FormatError("layout: prosody span lacks its delimiters");
    }
    for (std::size_t i = 1; i + 1 < prosody.size(); ++i) out.prosody.push_back(vocab.prosody_code(prosody[i]));
  } else if (!prosody.empty()) {
    throw FormatError("layout: IPL layout carries a prosody span");
  }

  if (cs.empty() || cs.front() != vocab.special(Special::kStartOfCs)) throw FormatError("layout: missing <start_of_cs>");
  std::size_t end = cs.size();
  if (cs.size() >= 2 && cs.back() == vocab.special(Special::kEndOfCs)) {
    out.cs_closed = true;
    --end;
  }
  for (std::size_t i = 1; i < end; ++i) out.cs.push_back(vocab.cs_code(cs[i]));
  return out;
}

Mode choose_mode(std::mt19937_64& rng) {
  return std::bernoulli_distribution(0.5)(rng) ? Mode::kEpl : Mode::kIpl;
}

std::string layout_to_json(const SequenceLayout& layout) {
  nlohmann::ordered_json j;
  j["mode"] = to_string(layout.mode);
  j["ids"] = layout.ids;
  j["loss_mask"] = layout.loss_mask;
  auto spans = nlohmann::ordered_json::array();
  for (const auto& s : layout.spans) {
    spans.push_back({{"type", to_string(s.type)}, {"role", to_string(s.role)}, {"begin", s.begin}, {"end", s.end}});
  }
  j["spans"] = std::move(spans);
  return j.dump() + "\n";
}

SequenceLayout layout_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    SequenceLayout l;
    l.mode = lookup<Mode>(j.at("mode").get<std::string>(), {Mode::kIpl, Mode::kEpl}, "mode");
    l.ids = j.at("ids").get<std::vector<std::int32_t>>();
    l.loss_mask = j.at("loss_mask").get<std::vector<std::uint8_t>>();
    for (const auto& s : j.at("spans")) {
      Span span;
      span.type = lookup<SpanType>(s.at("type").get<std::string>(),
                                   {SpanType::kInstruction, SpanType::kText, SpanType::kProsody, SpanType::kContentStyle},
                                   "span type");
      span.role = lookup<SpanRole>(s.at("role").get<std::string>(),
                                   {SpanRole::kTarget, SpanRole::kSource, SpanRole::kReference, SpanRole::kMelody},
                                   "span role");
      span.begin = s.at("begin").get<std::size_t>();
      span.end = s.at("end").get<std::size_t>();
      l.spans.push_back(span);
    }
    return l;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("layout json: ") + e.what());
  }
}

}  // namespace vevo::ar
