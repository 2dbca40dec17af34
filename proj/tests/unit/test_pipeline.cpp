#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "oracles.hpp"
#include "temp_dir.hpp"
#include "vevo/common/error.hpp"
#include "vevo/dsp/features.hpp"
#include "vevo/dsp/pitch.hpp"
#include "vevo/pipeline/corpus.hpp"
#include "vevo/pipeline/metrics.hpp"
#include "vevo/pipeline/midi.hpp"
#include "vevo/pipeline/recipes.hpp"
#include "vevo/pipeline/runner.hpp"
#include "vevo/pipeline/training.hpp"

using namespace vevo;
using namespace vevo::pipeline;

namespace {

MidiScore scale_score() {
  MidiScore s;
  double t = 0.0;
  for (int p : {60, 62, 64, 65, 67}) {
    s.notes.push_back({p, t, 0.2, 90});
    t += 0.2;
  }
  return s;
}

/// Untrained toy models shared by the runner tests; behaviour is structural,
/// not perceptual.
struct ToyModels {
  tokenizer::Tokenizer prosody;
  tokenizer::Tokenizer cs;
  ar::ArModel ar;
  fm::FlowModel<float> fm;

  ToyModels()
      : prosody(tiny(tokenizer::prosody_config(16)), 1),
        cs(tiny(tokenizer::content_style_config(32)), 2),
        ar(ar_config(), 3),
        fm(fm_config(), 4) {}

  static tokenizer::TokenizerConfig tiny(tokenizer::TokenizerConfig c) {
    c.hidden = 8;
    c.code_dim = 4;
    c.num_blocks = 1;
    return c;
  }
  static ar::ArConfig ar_config() {
    ar::ArConfig c;
    c.prosody_size = 16;
    c.cs_size = 32;
    c.width = 16;
    c.layers = 1;
    c.heads = 2;
    c.max_len = 640;
    return c;
  }
  static fm::FmConfig fm_config() {
    fm::FmConfig c;
    c.cs_size = 32;
    c.width = 16;
    c.layers = 1;
    c.heads = 2;
    c.max_frames = 1024;
    return c;
  }
};

class Runner : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    models_ = std::make_unique<ToyModels>();
    corpus_ = std::make_unique<std::vector<Utterance>>(synthesize_corpus(5, 4));
  }
  static void TearDownTestSuite() {
    models_.reset();
    corpus_.reset();
  }

  static AudioInput input(std::size_t i) { return {(*corpus_)[i].wav, (*corpus_)[i].text}; }

  static TaskRecipe full_recipe(Task task) {
    TaskRecipe r;
    r.task = task;
    r.text = "hello golden sun";
    r.source = input(0);
    r.reference = input(1);
    r.melody = input(2);
    r.midi = scale_score();
    return r;
  }

  Models bind(ar::ArStage& stage) const {
    return {&models_->prosody, &models_->cs, &stage, &models_->fm};
  }

  static RunConfig fast() {
    RunConfig c;
    c.fm_steps = 2;
    c.griffin_lim_iters = 2;
    c.sampling.max_len = 40;
    c.seed = 7;
    return c;
  }

  static std::unique_ptr<ToyModels> models_;
  static std::unique_ptr<std::vector<Utterance>> corpus_;
};

std::unique_ptr<ToyModels> Runner::models_;
std::unique_ptr<std::vector<Utterance>> Runner::corpus_;

}  // namespace

TEST(Midi, ValidationRules) {
  EXPECT_NO_THROW(scale_score().validate());
  EXPECT_NEAR(scale_score().end_seconds(), 1.0, 1e-12);
  EXPECT_THROW(MidiScore{}.validate(), ParameterError);
  auto overlap = scale_score();
  overlap.notes[1].onset = 0.1;
  EXPECT_THROW(overlap.validate(), ParameterError);
  auto backwards = scale_score();
  std::swap(backwards.notes[0], backwards.notes[1]);
  EXPECT_THROW(backwards.validate(), ParameterError);
  auto pitch = scale_score();
  pitch.notes[0].pitch = 128;
  EXPECT_THROW(pitch.validate(), ParameterError);
  auto vel = scale_score();
  vel.notes[0].velocity = 0;
  EXPECT_THROW(vel.validate(), ParameterError);
  auto dur = scale_score();
  dur.notes[4].duration = 0.0;
  EXPECT_THROW(dur.validate(), ParameterError);
}

TEST(Midi, RenderLengthAndPitch) {
  EXPECT_DOUBLE_EQ(midi_to_hz(69), 440.0);
  EXPECT_NEAR(midi_to_hz(60), 261.6255653, 1e-6);
  MidiScore one;
  one.notes.push_back({57, 0.0, 0.8, 100});
  for (auto inst : kAllInstruments) {
    EXPECT_EQ(instrument_from_string(to_string(inst)), inst);
    const auto w = render_midi(one, inst);
    EXPECT_EQ(w.samples.size(), static_cast<std::size_t>(std::lround(0.8 * dsp::kSampleRate)));
    EXPECT_NEAR(dsp::median_voiced(dsp::estimate_f0(w)), 220.0, 220.0 * 0.03) << to_string(inst);
  }
  EXPECT_THROW(instrument_from_string("kazoo"), ParameterError);
  // Rests render as silence.
  MidiScore gap;
  gap.notes = {{60, 0.0, 0.2, 100}, {60, 0.5, 0.2, 100}};
  const auto w = render_midi(gap, Instrument::kFlute);
  for (std::size_t i = 5000; i < 7500; ++i) ASSERT_EQ(w.samples[i], 0.0f) << i;
}

TEST(Midi, JsonRoundTrip) {
  const auto s = scale_score();
  const auto back = parse_midi_json(midi_to_json(s));
  ASSERT_EQ(back.notes.size(), s.notes.size());
  for (std::size_t i = 0; i < s.notes.size(); ++i) {
    EXPECT_EQ(back.notes[i].pitch, s.notes[i].pitch);
    EXPECT_DOUBLE_EQ(back.notes[i].onset, s.notes[i].onset);
    EXPECT_DOUBLE_EQ(back.notes[i].duration, s.notes[i].duration);
    EXPECT_EQ(back.notes[i].velocity, s.notes[i].velocity);
  }
  EXPECT_EQ(parse_midi_json(R"({"notes": [{"pitch": 60, "onset": 0, "duration": 1}]})").notes[0].velocity, 100);
  EXPECT_THROW(parse_midi_json("{\"notes\": 3}"), FormatError);
  vevo::testing::TempDir dir;
  save_midi_json(dir / "m.json", s);
  EXPECT_EQ(load_midi_json(dir / "m.json").notes.size(), 5u);
}

TEST(Corpus, FramesAreWholeTokensAndMatchTheStft) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 50; ++i) {
    const auto text = random_text(rng);
    const auto frames = utterance_frames(text);
    EXPECT_EQ(frames % 8, 0u) << text;
    EXPECT_EQ(vevo::testing::reference_frames(utterance_samples(text), 1920, 480), frames) << text;
  }
  EXPECT_EQ(word_segments("la"), 1u);
  EXPECT_EQ(word_segments("golden"), 2u);
  EXPECT_EQ(word_segments("morning"), 2u);
  EXPECT_THROW(utterance_frames("la xylophone"), ParameterError);
}

TEST(Corpus, BalancedKindsAndDeterminism) {
  for (std::size_t n : {1u, 6u, 9u}) {
    const auto c = synthesize_corpus(3, n);
    ASSERT_EQ(c.size(), n);
    std::size_t speech = 0;
    for (const auto& u : c) {
      speech += u.kind == UtteranceKind::kSpeech;
      EXPECT_EQ(u.wav.samples.size(), utterance_samples(u.text));
      EXPECT_EQ(dsp::chromagram(u.wav).num_frames, utterance_frames(u.text));
    }
    EXPECT_EQ(speech, n / 2);
  }
  const auto a = synthesize_corpus(4, 3), b = synthesize_corpus(4, 3);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(a[i].text, b[i].text);
    EXPECT_EQ(a[i].wav.samples, b[i].wav.samples);
  }
}

TEST(Corpus, ManifestRoundTrip) {
  vevo::testing::TempDir dir;
  const auto manifest = make_toy_corpus(8, 4, dir.path());
  const auto entries = read_corpus(manifest);
  ASSERT_EQ(entries.size(), 4u);
  const auto audio = load_corpus_audio(entries);
  const auto direct = synthesize_corpus(8, 4);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(entries[i].text, direct[i].text);
    EXPECT_EQ(entries[i].kind, direct[i].kind);
    EXPECT_TRUE(std::filesystem::exists(entries[i].audio_path));
    ASSERT_EQ(audio[i].wav.samples.size(), direct[i].wav.samples.size());
    for (std::size_t s = 0; s < direct[i].wav.samples.size(); s += 97) {
      ASSERT_NEAR(audio[i].wav.samples[s], direct[i].wav.samples[s], 1.0 / 32768.0 + 1e-6);
    }
  }
}

TEST(Metrics, FpcProperties) {
  std::vector<double> a(40), b(40);
  for (std::size_t i = 0; i < 40; ++i) {
    a[i] = 200.0 + 20.0 * std::sin(0.3 * static_cast<double>(i));
    b[i] = 2.0 * a[i] + 13.0;
  }
  EXPECT_NEAR(fpc(a, b), 1.0, 1e-12);
  auto neg = a;
  for (auto& x : neg) x = 500.0 - x;
  EXPECT_NEAR(fpc(a, neg), -1.0, 1e-12);
  // Unvoiced frames on either side are ignored.
  auto holes = b;
  for (std::size_t i = 0; i < 40; i += 3) holes[i] = 0.0;
  EXPECT_NEAR(fpc(a, holes), 1.0, 1e-12);
  std::vector<double> sparse(40, 0.0);
  for (std::size_t i = 0; i < 7; ++i) sparse[i] = a[i];
  EXPECT_THROW(fpc(a, sparse), ParameterError);
  EXPECT_THROW(fpc(a, std::vector<double>(40, 150.0)), ParameterError);
  const auto tone = dsp::make_tone(330.0, 0.5);
  EXPECT_NEAR(chroma_similarity(tone, tone), 1.0, 1e-9);
  EXPECT_LT(chroma_similarity(tone, dsp::make_tone(330.0 * std::pow(2.0, 6.0 / 12.0), 0.5)), 0.5);
}

TEST(Recipes, SpecTableCoversEveryTask) {
  for (auto t : kAllTasks) {
    const auto& spec = recipe_spec(t);
    EXPECT_EQ(spec.task, t);
    EXPECT_EQ(task_from_string(to_string(t)), t);
    EXPECT_EQ(spec.uses_ar, t != Task::kVcStylePreserved && t != Task::kSvcStylePreserved);
  }
  EXPECT_THROW(task_from_string("karaoke"), RecipeError);
}

TEST(Recipes, ValidationNamesTheMissingSlot) {
  const dsp::Waveform w = dsp::make_tone(200.0, 0.3);
  for (auto t : kAllTasks) {
    TaskRecipe full;
    full.task = t;
    full.text = "la";
    full.source = AudioInput{w, "la"};
    full.reference = AudioInput{w, "oh"};
    full.melody = AudioInput{w, ""};
    full.midi = scale_score();
    EXPECT_NO_THROW(validate_recipe(full)) << to_string(t);
    for (auto slot : recipe_spec(t).required) {
      auto r = full;
      switch (slot) {
        case Slot::kText: r.text.reset(); break;
        case Slot::kSource: r.source.reset(); break;
        case Slot::kReference: r.reference.reset(); break;
        case Slot::kMidi: r.midi.reset(); break;
        case Slot::kMelody: r.melody.reset(); break;
      }
      try {
        validate_recipe(r);
        ADD_FAILURE() << to_string(t) << " accepted a recipe without " << to_string(slot);
      } catch (const RecipeError& e) {
        EXPECT_NE(std::string(e.what()).find(std::string(to_string(slot))), std::string::npos) << e.what();
      }
    }
    auto bad = full;
    bad.target_seconds = -1.0;
    EXPECT_THROW(validate_recipe(bad), RecipeError);
  }
  TaskRecipe tts;
  tts.text = "la";
  tts.reference = AudioInput{w, ""};
  EXPECT_THROW(validate_recipe(tts), RecipeError);
}

TEST(Recipes, PrefixRolesPerRow) {
  const ar::Vocabulary v(16, 32);
  RecipeTokens tk;
  tk.text = "sun sky";
  tk.source.text = "la";
  tk.reference.text = "oh";
  tk.source.prosody.ids = {1, 2};
  tk.reference.prosody.ids = {3};
  tk.melody.prosody.ids = {4, 5, 6};
  tk.source.cs.ids = {1, 2, 3, 4};
  tk.reference.cs.ids = {5, 6};
  tk.edited_prosody = tokenizer::TokenSequence{{7, 8, 9}, {25, 4}, tokenizer::TokenKind::kProsody};
  const auto hum = build_recipe_prefix(Task::kHummingToSinging, tk, v);
  const auto parsed = ar::parse_layout(hum, v);
  EXPECT_TRUE(parsed.cs.empty());
  EXPECT_EQ(parsed.prosody, (std::vector<std::int32_t>{4, 5, 6}));
  EXPECT_EQ(signature_string(ar::span_signature(hum)), "text:target prosody:melody cs:target");
  const auto edit = ar::parse_layout(build_recipe_prefix(Task::kSpeechEdit, tk, v), v);
  EXPECT_EQ(edit.prosody, (std::vector<std::int32_t>{1, 2, 7, 8, 9}));
  EXPECT_EQ(edit.cs, tk.source.cs.ids);
  const auto tts = ar::parse_layout(build_recipe_prefix(Task::kTts, tk, v), v);
  EXPECT_EQ(tts.text, "oh sun sky");
  EXPECT_EQ(tts.cs, tk.reference.cs.ids);
  EXPECT_THROW(build_recipe_prefix(Task::kVcStylePreserved, tk, v), RecipeError);
  EXPECT_THROW(build_recipe_prefix(Task::kSvcStylePreserved, tk, v), RecipeError);
}

TEST_F(Runner, StylePreservedRowsNeverCallTheArStage) {
  for (auto t : {Task::kVcStylePreserved, Task::kSvcStylePreserved}) {
    ar::ArStage stage(models_->ar);
    const auto out = run_task(full_recipe(t), bind(stage), fast());
    EXPECT_EQ(stage.calls(), 0u);
    EXPECT_FALSE(out.report.ar_used);
    EXPECT_TRUE(out.report.signature.empty());
    EXPECT_GT(out.report.cs_tokens, 0u);
    // Without an AR stage the source tokens are rendered one-for-one.
    EXPECT_EQ(out.report.mel_frames, fm::kFramesPerToken * out.report.cs_tokens);
    Models no_ar{&models_->prosody, &models_->cs, nullptr, &models_->fm};
    EXPECT_NO_THROW(run_task(full_recipe(t), no_ar, fast()));
  }
}

TEST_F(Runner, EveryArRowCallsTheStageOnce) {
  for (auto t : kAllTasks) {
    if (!recipe_spec(t).uses_ar) continue;
    ar::ArStage stage(models_->ar);
    auto cfg = fast();
    cfg.vocode = false;
    const auto out = run_task(full_recipe(t), bind(stage), cfg);
    EXPECT_EQ(stage.calls(), 1u) << to_string(t);
    EXPECT_TRUE(out.report.ar_used);
    ASSERT_TRUE(out.report.prefix.has_value());
    EXPECT_EQ(out.report.signature, signature_string(ar::span_signature(*out.report.prefix)));
    const auto p = ar::parse_layout(*out.report.prefix, models_->ar.vocab());
    EXPECT_EQ(p.mode, recipe_spec(t).mode) << to_string(t);
  }
}

TEST_F(Runner, DurationControlOnEplRows) {
  for (double d : {0.7, 1.3}) {
    ar::ArStage stage(models_->ar);
    auto r = full_recipe(Task::kHummingToSinging);
    r.target_seconds = d;
    auto cfg = fast();
    cfg.vocode = true;
    const auto out = run_task(r, bind(stage), cfg);
    EXPECT_EQ(out.report.expected_cs_tokens, 2 * ((static_cast<std::size_t>(std::lround(d * 50)) + 7) / 8));
    EXPECT_EQ(out.report.cs_tokens, out.report.expected_cs_tokens);
    EXPECT_EQ(out.report.mel_frames, static_cast<std::size_t>(std::lround(d * 50)));
    EXPECT_NEAR(out.report.output_seconds, d, 1e-9);
  }
  ar::ArStage stage(models_->ar);
  auto tts = full_recipe(Task::kTts);
  tts.target_seconds = 1.0;
  EXPECT_THROW(run_task(tts, bind(stage), fast()), RecipeError);
}

TEST_F(Runner, FixedSeedIsDeterministic) {
  ar::ArStage s1(models_->ar), s2(models_->ar);
  const auto r = full_recipe(Task::kSvs);
  const auto a = run_task(r, bind(s1), fast());
  const auto b = run_task(r, bind(s2), fast());
  EXPECT_EQ(a.cs.ids, b.cs.ids);
  EXPECT_EQ(a.mel.data, b.mel.data);
  EXPECT_EQ(a.wav.samples, b.wav.samples);
  Models missing{&models_->prosody, &models_->cs, &s1, nullptr};
  EXPECT_THROW(run_task(r, missing, fast()), ParameterError);
}

TEST_F(Runner, TrainingHelpersShapeTheData) {
  const auto enc = encode_corpus(*corpus_, models_->prosody, models_->cs);
  ASSERT_EQ(enc.size(), corpus_->size());
  for (std::size_t i = 0; i < enc.size(); ++i) {
    const auto frames = utterance_frames((*corpus_)[i].text);
    EXPECT_EQ(enc[i].prosody.size(), frames / 8);
    EXPECT_EQ(enc[i].cs.size(), frames / 4);
    EXPECT_EQ(enc[i].chroma.num_frames, frames);
  }
  const auto& v = models_->ar.vocab();
  const auto all = ar_all_layouts(enc, v);
  EXPECT_EQ(all.size(), 2 * enc.size());
  std::mt19937_64 rng(1);
  EXPECT_EQ(ar_training_layouts(enc, v, rng).size(), enc.size());
  const auto items = fm_training_items(enc);
  ASSERT_EQ(items.size(), enc.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    EXPECT_GE(items[i].cond.ref_cs.size(), 1u);
    EXPECT_EQ(items[i].cond.ref_cs.size() + items[i].cond.cs.size(), enc[i].cs.size());
    EXPECT_NO_THROW(items[i].cond.validate(80));
  }
  EXPECT_THROW(fm_training_items(enc, 1.0), ParameterError);
  const auto prompts = grpo_prompts(enc, v);
  ASSERT_EQ(prompts.size(), enc.size());
  for (const auto& p : prompts) {
    EXPECT_EQ(p.prefix.mode, ar::Mode::kEpl);
    EXPECT_EQ(p.prefix.ids.back(), v.special(ar::Special::kStartOfCs));
    EXPECT_TRUE(p.prosody.has_value());
  }
  EXPECT_EQ(preference_sources(enc).size(), enc.size());
}
