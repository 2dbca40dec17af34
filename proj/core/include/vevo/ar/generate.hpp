#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "vevo/ar/layout.hpp"
#include "vevo/ar/transformer.hpp"
#include "vevo/tokenizer/tokens.hpp"

namespace vevo::ar {

struct SamplingConfig {
  double temperature = 0.9;  // 0 selects the argmax
  std::size_t top_k = 32;    // 0 disables the cut
  std::size_t max_len = 512; // cs tokens, excluding the closing delimiter
  bool constrained = true;   // sample only cs codes and <end_of_cs>
  /// When set, <end_of_cs> is masked until exactly this many tokens exist and
  /// then forced.
  std::optional<std::size_t> forced_length;
  std::uint64_t seed = 0;
};

struct GenerationResult {
  tokenizer::TokenSequence cs;
  std::vector<std::int32_t> completion;  // vocabulary ids appended to the prefix
  bool truncated = false;                // max_len hit before <end_of_cs>
  bool length_warning = false;           // EPL output strays >25% from twice the prosody length
  std::size_t expected_length = 0;       // 0 when the prefix carries no prosody
};

/// Samples content-style tokens after a prefix that ends inside an open cs
/// span (right after <start_of_cs> or after prompt tokens).
GenerationResult generate(const SequenceLayout& prefix, const ArModel& model, const SamplingConfig& cfg);

/// Counts calls; the pipeline uses it to prove that FM-only recipes never
/// touch the AR stage.
class ArStage {
 public:
  explicit ArStage(const ArModel& model) : model_(&model) {}
  GenerationResult operator()(const SequenceLayout& prefix, const SamplingConfig& cfg);
  [[nodiscard]] std::size_t calls() const { return calls_; }
  [[nodiscard]] const ArModel& model() const { return *model_; }

 private:
  const ArModel* model_;
  std::size_t calls_ = 0;
};

}  // namespace vevo::ar
