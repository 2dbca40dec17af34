#include "vevo/posttrain/preferences.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numeric>

#include "vevo/common/error.hpp"

namespace vevo::posttrain {

std::string_view to_string(Perturbation p) {
  switch (p) {
    case Perturbation::kSubstitution: return "substitution";
    case Perturbation::kDeletion: return "deletion";
    case Perturbation::kRepetition: return "repetition";
  }
  return "?";
}

namespace {

Perturbation perturbation_from_string(std::string_view s) {
  for (auto p : {Perturbation::kSubstitution, Perturbation::kDeletion, Perturbation::kRepetition}) {
    if (to_string(p) == s) return p;
  }
  throw FormatError("unknown perturbation '" + std::string(s) + "'");
}

nlohmann::json tokens_json(const tokenizer::TokenSequence& t) {
  return {{"kind", tokenizer::to_string(t.kind)}, {"frame_rate", {t.frame_rate.num, t.frame_rate.den}}, {"ids", t.ids}};
}

tokenizer::TokenSequence tokens_from(const nlohmann::json& j) {
  tokenizer::TokenSequence t;
  t.kind = tokenizer::token_kind_from_string(j.at("kind").get<std::string>());
  t.frame_rate = Rational(j.at("frame_rate").at(0).get<std::int64_t>(), j.at("frame_rate").at(1).get<std::int64_t>());
  t.ids = j.at("ids").get<std::vector<std::int32_t>>();
  return t;
}

}  // namespace

tokenizer::TokenSequence perturb(const tokenizer::TokenSequence& cs, Perturbation kind, std::size_t vocab_size,
                                 std::mt19937_64& rng) {
  const std::size_t n = cs.ids.size();
  if (n < kMinPerturbLength) throw ParameterError("perturb: sequence too short");
  if (vocab_size < 2) throw ParameterError("perturb: vocabulary needs at least two codes");
  const std::size_t span = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(kPerturbFraction * n)));
  auto out = cs;
  switch (kind) {
    case Perturbation::kSubstitution: {
      std::vector<std::size_t> pos(n);
      std::iota(pos.begin(), pos.end(), std::size_t{0});
      std::shuffle(pos.begin(), pos.end(), rng);
      std::uniform_int_distribution<std::int32_t> other(1, static_cast<std::int32_t>(vocab_size) - 1);
      for (std::size_t i = 0; i < span; ++i) {
        // Adding a non-zero offset modulo K guarantees a different code.
        auto& id = out.ids[pos[i]];
        id = (id + other(rng)) % static_cast<std::int32_t>(vocab_size);
      }
      break;
    }
    case Perturbation::kDeletion: {
      const auto start = std::uniform_int_distribution<std::size_t>(0, n - span)(rng);
      out.ids.erase(out.ids.begin() + static_cast<std::ptrdiff_t>(start),
                    out.ids.begin() + static_cast<std::ptrdiff_t>(start + span));
      break;
    }
    case Perturbation::kRepetition: {
      const auto start = std::uniform_int_distribution<std::size_t>(0, n - span)(rng);
      const std::vector<std::int32_t> dup(cs.ids.begin() + static_cast<std::ptrdiff_t>(start),
                                          cs.ids.begin() + static_cast<std::ptrdiff_t>(start + span));
      out.ids.insert(out.ids.begin() + static_cast<std::ptrdiff_t>(start + span), dup.begin(), dup.end());
      break;
    }
  }
  return out;
}

std::vector<PreferencePair> make_synthetic_preferences(const std::vector<PreferenceSource>& sources,
                                                       std::size_t vocab_size, std::size_t count,
                                                       std::mt19937_64& rng) {
  std::vector<const PreferenceSource*> usable;
  for (const auto& s : sources) {
    if (s.cs.ids.size() >= kMinPerturbLength) usable.push_back(&s);
  }
  if (usable.empty() && count > 0) throw ParameterError("make_synthetic_preferences: no source is long enough");
  std::vector<PreferencePair> pairs;
  pairs.reserve(count);
  std::uniform_int_distribution<int> pick_kind(0, 2);
  for (std::size_t i = 0; i < count; ++i) {
    const auto& src = *usable[i % usable.size()];
    PreferencePair p;
    p.text = src.text;
    p.positive = src.cs;
    p.prosody = src.prosody;
    p.kind = static_cast<Perturbation>(pick_kind(rng));
    p.negative = perturb(src.cs, p.kind, vocab_size, rng);
    pairs.push_back(std::move(p));
  }
  return pairs;
}

void save_preferences(const std::filesystem::path& path, const std::vector<PreferencePair>& pairs) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& p : pairs) {
    nlohmann::ordered_json j;
    j["text"] = p.text;
    j["kind"] = to_string(p.kind);
    j["positive"] = tokens_json(p.positive);
    j["negative"] = tokens_json(p.negative);
    if (p.prosody) j["prosody"] = tokens_json(*p.prosody);
    out << j.dump() << '\n';
  }
}

std::vector<PreferencePair> load_preferences(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<PreferencePair> pairs;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      PreferencePair p;
      p.text = j.at("text").get<std::string>();
      p.kind = perturbation_from_string(j.at("kind").get<std::string>());
      p.positive = tokens_from(j.at("positive"));
      p.negative = tokens_from(j.at("negative"));
      if (j.contains("prosody")) p.prosody = tokens_from(j.at("prosody"));
      pairs.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path.string() + ": " + e.what());
    }
  }
  return pairs;
}

}  // namespace vevo::posttrain
