#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "vevo/ar/layout.hpp"
#include "vevo/pipeline/recipes.hpp"

// Snapshots of the sequence formats. Set VEVO_UPDATE_GOLDENS=1 to rewrite
// the files after an intended format change.

using namespace vevo;

namespace {

const std::filesystem::path kGoldenDir = VEVO_GOLDEN_DIR;

bool updating() {
  const char* v = std::getenv("VEVO_UPDATE_GOLDENS");
  return v && std::string(v) == "1";
}

void check_golden(const std::string& name, const std::string& actual) {
  const auto path = kGoldenDir / name;
  if (updating()) {
    std::ofstream(path) << actual;
    GTEST_SKIP() << "rewrote " << path;
  }
  std::ifstream in(path);
  ASSERT_TRUE(in) << "missing golden " << path;
  std::stringstream want;
  want << in.rdbuf();
  EXPECT_EQ(actual, want.str()) << name;
}

tokenizer::TokenSequence prosody(std::vector<std::int32_t> ids) {
  return {std::move(ids), {25, 4}, tokenizer::TokenKind::kProsody};
}
tokenizer::TokenSequence cs(std::vector<std::int32_t> ids) {
  return {std::move(ids), {25, 2}, tokenizer::TokenKind::kContentStyle};
}

}  // namespace

TEST(Golden, IplLayout) {
  const ar::Vocabulary v(512, 1024);
  check_golden("ipl_layout.json", ar::layout_to_json(ar::build_ipl("la sun", cs({0, 17, 1023, 5}), v)) + "\n");
}

TEST(Golden, EplLayout) {
  const ar::Vocabulary v(512, 1024);
  const auto l = ar::build_epl("oh sky", prosody({3, 511, 0}), cs({9, 8, 7, 6, 5, 4}), v);
  check_golden("epl_layout.json", ar::layout_to_json(l) + "\n");
}

TEST(Golden, RecipeSignatures) {
  const ar::Vocabulary v(512, 1024);
  pipeline::RecipeTokens tk;
  tk.text = "edited words";
  tk.source = {"source words", prosody({1, 2}), cs({1, 2, 3, 4})};
  tk.reference = {"reference words", prosody({3}), cs({5, 6})};
  tk.melody.prosody = prosody({4, 5, 6});
  tk.edited_prosody = prosody({7, 8, 9});
  std::string out;
  for (auto t : pipeline::kAllTasks) {
    out += std::string(pipeline::to_string(t)) + "\t";
    if (pipeline::recipe_spec(t).uses_ar) {
      out += pipeline::signature_string(ar::span_signature(pipeline::build_recipe_prefix(t, tk, v)));
    } else {
      out += "-";
    }
    out += "\n";
  }
  check_golden("recipe_signatures.tsv", out);
}
