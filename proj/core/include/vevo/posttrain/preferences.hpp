#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "vevo/tokenizer/tokens.hpp"

namespace vevo::posttrain {

enum class Perturbation { kSubstitution, kDeletion, kRepetition };

std::string_view to_string(Perturbation p);

struct PreferencePair {
  std::string text;
  tokenizer::TokenSequence positive;
  tokenizer::TokenSequence negative;
  std::optional<tokenizer::TokenSequence> prosody;
  Perturbation kind = Perturbation::kSubstitution;
};

/// One ground-truth utterance to derive pairs from.
struct PreferenceSource {
  std::string text;
  tokenizer::TokenSequence cs;
  std::optional<tokenizer::TokenSequence> prosody;
};

inline constexpr double kPerturbFraction = 0.2;
inline constexpr std::size_t kMinPerturbLength = 5;

/// Applies one perturbation to 20% of the tokens (at least one):
/// substitution replaces that many positions with different codes, deletion
/// removes a contiguous span, repetition duplicates a contiguous span in place.
tokenizer::TokenSequence perturb(const tokenizer::TokenSequence& cs, Perturbation kind, std::size_t vocab_size,
                                 std::mt19937_64& rng);

/// `count` pairs drawn round-robin over sources with uniformly random
/// perturbation kinds. Sources shorter than kMinPerturbLength are skipped.
std::vector<PreferencePair> make_synthetic_preferences(const std::vector<PreferenceSource>& sources,
                                                       std::size_t vocab_size, std::size_t count,
                                                       std::mt19937_64& rng);

void save_preferences(const std::filesystem::path& path, const std::vector<PreferencePair>& pairs);
std::vector<PreferencePair> load_preferences(const std::filesystem::path& path);

}  // namespace vevo::posttrain
