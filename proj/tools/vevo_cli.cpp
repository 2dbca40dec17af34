#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "vevo/ar/generate.hpp"
#include "vevo/ar/trainer.hpp"
#include "vevo/common/error.hpp"
#include "vevo/control/duration.hpp"
#include "vevo/fm/flow_trainer.hpp"
#include "vevo/pipeline/metrics.hpp"
#include "vevo/pipeline/runner.hpp"
#include "vevo/pipeline/training.hpp"
#include "vevo/posttrain/grpo.hpp"
#include "vevo/posttrain/prosody_reward.hpp"
#include "vevo/posttrain/reward_model.hpp"

namespace {

using namespace vevo;

struct ModelPaths {
  std::string prosody, content_style, ar, fm, reward;
};

void add_model_paths(CLI::App* cmd, ModelPaths& p, bool prosody, bool cs, bool ar, bool fm, bool reward) {
  if (prosody) cmd->add_option("--prosody-tokenizer", p.prosody, "Prosody tokenizer checkpoint")->required();
  if (cs) cmd->add_option("--cs-tokenizer", p.content_style, "Content-style tokenizer checkpoint")->required();
  if (ar) cmd->add_option("--ar", p.ar, "AR model checkpoint")->required();
  if (fm) cmd->add_option("--fm", p.fm, "Flow-matching model checkpoint")->required();
  if (reward) cmd->add_option("--reward", p.reward, "Reward model checkpoint")->required();
}

std::vector<pipeline::Utterance> load_manifest_audio(const std::string& manifest) {
  return pipeline::load_corpus_audio(pipeline::read_corpus(manifest));
}

std::vector<pipeline::EncodedUtterance> encode_manifest(const std::string& manifest, const ModelPaths& p) {
  const auto ptk = tokenizer::load_tokenizer(p.prosody);
  const auto ctk = tokenizer::load_tokenizer(p.content_style);
  return pipeline::encode_corpus(load_manifest_audio(manifest), ptk, ctk);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << text;
}

std::optional<pipeline::AudioInput> audio_input(const std::string& wav, const std::string& transcript) {
  if (wav.empty()) return std::nullopt;
  return pipeline::AudioInput{dsp::read_wav(wav), transcript};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unified speech and singing voice generation toolkit"};
  app.require_subcommand(1);
  ModelPaths paths;

  // make-corpus
  auto* corpus_cmd = app.add_subcommand("make-corpus", "Synthesize the toy speech/singing corpus");
  std::string corpus_out;
  std::size_t corpus_n = 20;
  std::uint64_t corpus_seed = 7;
  corpus_cmd->add_option("--out", corpus_out, "Output directory")->required();
  corpus_cmd->add_option("-n,--count", corpus_n, "Number of utterances");
  corpus_cmd->add_option("--seed", corpus_seed, "Random seed");
  corpus_cmd->callback([&] {
    const auto manifest = pipeline::make_toy_corpus(corpus_seed, corpus_n, corpus_out);
    std::cout << manifest.string() << "\n";
  });

  // train-tokenizer
  auto* tk_cmd = app.add_subcommand("train-tokenizer", "Train a prosody or content-style VQ-VAE tokenizer");
  std::string tk_manifest, tk_kind = "prosody", tk_out;
  std::size_t tk_codebook = 0;
  tokenizer::TokenizerTrainConfig tk_hyper;
  tk_cmd->add_option("--manifest", tk_manifest, "Corpus manifest (JSONL)")->required();
  tk_cmd->add_option("--kind", tk_kind, "prosody or content-style")
      ->check(CLI::IsMember({"prosody", "content-style"}));
  tk_cmd->add_option("--codebook-size", tk_codebook, "Codebook entries (default per kind)");
  tk_cmd->add_option("--steps", tk_hyper.steps, "Optimizer steps");
  tk_cmd->add_option("--lr", tk_hyper.lr, "Peak learning rate");
  tk_cmd->add_option("--seed", tk_hyper.seed, "Random seed");
  tk_cmd->add_option("--out", tk_out, "Output checkpoint")->required();
  tk_cmd->callback([&] {
    auto cfg = tk_kind == "prosody" ? tokenizer::prosody_config() : tokenizer::content_style_config();
    if (tk_codebook > 0) cfg.codebook_size = tk_codebook;
    tokenizer::Tokenizer model(cfg, tk_hyper.seed);
    const auto data = pipeline::tokenizer_dataset(load_manifest_audio(tk_manifest), cfg);
    const auto rep = tokenizer::train_tokenizer(model, data, tk_hyper);
    for (const auto& e : rep.log) std::printf("step %lld loss %.5f recon %.5f\n", static_cast<long long>(e.step), e.loss, e.recon);
    std::printf("recon %.5f -> %.5f, codebook usage %.3f, bitrate %.2f bps\n", rep.initial_recon, rep.final_recon,
                rep.codebook_usage, tokenizer::bitrate(cfg));
    tokenizer::save_tokenizer(tk_out, model);
  });

  // tokenize
  auto* enc_cmd = app.add_subcommand("tokenize", "Encode a WAV file into tokens");
  std::string enc_tokenizer, enc_wav, enc_out;
  enc_cmd->add_option("--tokenizer", enc_tokenizer, "Tokenizer checkpoint")->required();
  enc_cmd->add_option("--wav", enc_wav, "Input audio")->required();
  enc_cmd->add_option("--out", enc_out, "Output tokens (.json or binary)")->required();
  enc_cmd->callback([&] {
    const auto tokens = tokenizer::encode(dsp::read_wav(enc_wav), tokenizer::load_tokenizer(enc_tokenizer));
    if (enc_out.ends_with(".json")) {
      write_text(enc_out, tokenizer::tokens_to_json(tokens));
    } else {
      tokenizer::save_tokens(enc_out, tokens);
    }
  });

  // train-ar
  auto* ar_cmd = app.add_subcommand("train-ar", "Train the AR model on mixed EPL/IPL layouts");
  std::string ar_manifest, ar_out;
  ar::ArConfig ar_cfg;
  ar::ArTrainConfig ar_hyper;
  add_model_paths(ar_cmd, paths, true, true, false, false, false);
  ar_cmd->add_option("--manifest", ar_manifest, "Corpus manifest (JSONL)")->required();
  ar_cmd->add_option("--width", ar_cfg.width, "Model width");
  ar_cmd->add_option("--layers", ar_cfg.layers, "Transformer blocks");
  ar_cmd->add_option("--heads", ar_cfg.heads, "Attention heads");
  ar_cmd->add_option("--steps", ar_hyper.steps, "Optimizer steps");
  ar_cmd->add_option("--lr", ar_hyper.lr, "Peak learning rate");
  ar_cmd->add_option("--seed", ar_hyper.seed, "Random seed");
  ar_cmd->add_option("--out", ar_out, "Output checkpoint")->required();
  ar_cmd->callback([&] {
    const auto ptk = tokenizer::load_tokenizer(paths.prosody);
    const auto ctk = tokenizer::load_tokenizer(paths.content_style);
    ar_cfg.prosody_size = ptk.config().codebook_size;
    ar_cfg.cs_size = ctk.config().codebook_size;
    const auto data = pipeline::encode_corpus(load_manifest_audio(ar_manifest), ptk, ctk);
    std::mt19937_64 rng(ar_hyper.seed);
    const auto layouts = pipeline::ar_training_layouts(data, ar_cfg.vocabulary(), rng);
    ar::ArModel model(ar_cfg, ar_hyper.seed);
    const auto rep = ar::train_ar(model, layouts, ar_hyper);
    for (const auto& [s, l] : rep.log) std::printf("step %lld loss %.5f\n", static_cast<long long>(s), l);
    std::printf("final loss %.5f\n", rep.final_loss);
    ar::save_ar_model(ar_out, model);
  });

  // generate
  auto* gen_cmd = app.add_subcommand("generate", "Sample content-style tokens for a text");
  std::string gen_text, gen_prosody_wav, gen_out;
  double gen_duration = 0.0;
  ar::SamplingConfig gen_sampling;
  add_model_paths(gen_cmd, paths, false, false, true, false, false);
  gen_cmd->add_option("--prosody-tokenizer", paths.prosody, "Prosody tokenizer checkpoint (EPL)");
  gen_cmd->add_option("--text", gen_text, "Target text")->required();
  gen_cmd->add_option("--prosody-wav", gen_prosody_wav, "Prosody source audio; selects EPL");
  gen_cmd->add_option("--target-duration", gen_duration, "Rescale the prosody to this many seconds");
  gen_cmd->add_option("--temperature", gen_sampling.temperature, "Sampling temperature (0 = greedy)");
  gen_cmd->add_option("--top-k", gen_sampling.top_k, "Top-k cut (0 = off)");
  gen_cmd->add_option("--max-len", gen_sampling.max_len, "Maximum generated tokens");
  gen_cmd->add_option("--seed", gen_sampling.seed, "Random seed");
  gen_cmd->add_option("--out", gen_out, "Output tokens (.json or binary)")->required();
  gen_cmd->callback([&] {
    const auto model = ar::load_ar_model(paths.ar);
    ar::PrefixSpec spec;
    spec.texts = {{gen_text, ar::SpanRole::kTarget}};
    if (!gen_prosody_wav.empty()) {
      if (paths.prosody.empty()) throw ParameterError("--prosody-wav needs --prosody-tokenizer");
      const auto ptk = tokenizer::load_tokenizer(paths.prosody);
      auto feats = tokenizer::extract_inputs(dsp::read_wav(gen_prosody_wav), ptk.config());
      if (gen_duration > 0.0) {
        for (auto& f : feats) f = control::scale_prosody_for_duration(f, gen_duration);
        gen_sampling.forced_length = control::expected_cs_tokens(gen_duration);
      }
      spec.mode = ar::Mode::kEpl;
      spec.prosody = {{tokenizer::encode(feats, ptk), ar::SpanRole::kMelody}};
    }
    const auto res = ar::generate(ar::build_prefix(spec, model.vocab()), model, gen_sampling);
    if (res.truncated) std::fprintf(stderr, "warning: generation hit --max-len\n");
    if (res.length_warning) std::fprintf(stderr, "warning: %zu tokens, expected about %zu\n", res.cs.size(), res.expected_length);
    if (gen_out.ends_with(".json")) {
      write_text(gen_out, tokenizer::tokens_to_json(res.cs));
    } else {
      tokenizer::save_tokens(gen_out, res.cs);
    }
  });

  // train-fm
  auto* fm_cmd = app.add_subcommand("train-fm", "Train the flow-matching acoustic model");
  std::string fm_manifest, fm_out;
  fm::FmConfig fm_cfg;
  fm::FmTrainConfig fm_hyper;
  add_model_paths(fm_cmd, paths, false, true, false, false, false);
  fm_cmd->add_option("--manifest", fm_manifest, "Corpus manifest (JSONL)")->required();
  fm_cmd->add_option("--width", fm_cfg.width, "Model width");
  fm_cmd->add_option("--layers", fm_cfg.layers, "Transformer blocks");
  fm_cmd->add_option("--max-frames", fm_cfg.max_frames, "Longest reference plus target, in frames");
  fm_cmd->add_option("--steps", fm_hyper.steps, "Optimizer steps");
  fm_cmd->add_option("--lr", fm_hyper.lr, "Peak learning rate");
  fm_cmd->add_option("--seed", fm_hyper.seed, "Random seed");
  fm_cmd->add_option("--out", fm_out, "Output checkpoint")->required();
  fm_cmd->callback([&] {
    const auto ctk = tokenizer::load_tokenizer(paths.content_style);
    fm_cfg.cs_size = ctk.config().codebook_size;
    std::vector<pipeline::EncodedUtterance> data;
    for (const auto& u : load_manifest_audio(fm_manifest)) {
      pipeline::EncodedUtterance e;
      e.cs = tokenizer::encode(u.wav, ctk);
      e.mel = dsp::mel_spectrogram(u.wav);
      data.push_back(std::move(e));
    }
    fm::FlowModel<float> model(fm_cfg, fm_hyper.seed);
    const auto rep = fm::train_fm(model, pipeline::fm_training_items(data), fm_hyper);
    for (const auto& [s, l] : rep.log) std::printf("step %lld loss %.5f\n", static_cast<long long>(s), l);
    fm::save_flow_model(fm_out, model);
  });

  // train-reward
  auto* rm_cmd = app.add_subcommand("train-reward", "Train the Bradley-Terry intelligibility reward model");
  std::string rm_manifest, rm_out, rm_pairs_out, rm_pairs_in;
  std::size_t rm_count = 3000;
  posttrain::RewardTrainConfig rm_hyper;
  add_model_paths(rm_cmd, paths, true, true, true, false, false);
  rm_cmd->add_option("--manifest", rm_manifest, "Corpus manifest the pairs derive from");
  rm_cmd->add_option("--pairs", rm_pairs_in, "Existing preference pairs (JSONL)");
  rm_cmd->add_option("--num-pairs", rm_count, "Synthetic pairs to generate");
  rm_cmd->add_option("--save-pairs", rm_pairs_out, "Write the generated pairs here");
  rm_cmd->add_option("--epochs", rm_hyper.epochs, "Passes over the pairs");
  rm_cmd->add_option("--lr", rm_hyper.lr, "Peak learning rate");
  rm_cmd->add_option("--seed", rm_hyper.seed, "Random seed");
  rm_cmd->add_option("--out", rm_out, "Output checkpoint")->required();
  rm_cmd->callback([&] {
    std::vector<posttrain::PreferencePair> pairs;
    if (!rm_pairs_in.empty()) {
      pairs = posttrain::load_preferences(rm_pairs_in);
    } else {
      if (rm_manifest.empty()) throw ParameterError("train-reward needs --manifest or --pairs");
      const auto data = encode_manifest(rm_manifest, paths);
      const auto ctk = tokenizer::load_tokenizer(paths.content_style);
      std::mt19937_64 rng(rm_hyper.seed);
      pairs = posttrain::make_synthetic_preferences(pipeline::preference_sources(data), ctk.config().codebook_size,
                                                    rm_count, rng);
      if (!rm_pairs_out.empty()) posttrain::save_preferences(rm_pairs_out, pairs);
    }
    posttrain::RewardModel<float> rm(ar::load_ar_model(paths.ar));
    const auto rep = posttrain::train_reward_model(rm, pairs, rm_hyper);
    for (std::size_t e = 0; e < rep.epoch_loss.size(); ++e) std::printf("epoch %zu loss %.5f\n", e + 1, rep.epoch_loss[e]);
    std::printf("train ranking accuracy %.3f\n", rep.train_accuracy);
    posttrain::save_reward_model(rm_out, rm);
  });

  // grpo
  auto* grpo_cmd = app.add_subcommand("grpo", "Multi-objective GRPO post-training of the AR model");
  std::string grpo_manifest, grpo_out;
  std::int64_t grpo_steps = 200;
  posttrain::GrpoConfig grpo_cfg;
  add_model_paths(grpo_cmd, paths, true, true, true, false, true);
  grpo_cmd->add_option("--manifest", grpo_manifest, "Prompt corpus manifest")->required();
  grpo_cmd->add_option("--steps", grpo_steps, "GRPO steps");
  grpo_cmd->add_option("--k-completions", grpo_cfg.group_size, "Completions per prompt");
  grpo_cmd->add_option("--prompts-per-step", grpo_cfg.prompts_per_step, "Prompts per step");
  grpo_cmd->add_option("--clip", grpo_cfg.clip_eps, "Ratio clip epsilon");
  grpo_cmd->add_option("--kl-coef", grpo_cfg.kl_coef, "KL penalty coefficient");
  grpo_cmd->add_option("--lr", grpo_cfg.lr, "Learning rate");
  grpo_cmd->add_option("--temperature", grpo_cfg.sampling.temperature, "Rollout temperature");
  grpo_cmd->add_option("--seed", grpo_cfg.seed, "Random seed");
  grpo_cmd->add_option("--out", grpo_out, "Output AR checkpoint")->required();
  grpo_cmd->callback([&] {
    const auto data = encode_manifest(grpo_manifest, paths);
    const auto ctk = tokenizer::load_tokenizer(paths.content_style);
    const auto rm = posttrain::load_reward_model(paths.reward);
    const auto ref = ar::load_ar_model(paths.ar);
    auto policy = ar::load_ar_model(paths.ar);
    const auto prompts = pipeline::grpo_prompts(data, policy.vocab());
    const auto& vocab = policy.vocab();
    posttrain::RewardFn r_int = [&](const posttrain::GrpoPrompt& p, const tokenizer::TokenSequence& cs) {
      return rm.score_value(posttrain::reward_layout(p.text, cs, std::nullopt, ar::Mode::kIpl, vocab));
    };
    posttrain::RewardFn r_pro = [&](const posttrain::GrpoPrompt& p, const tokenizer::TokenSequence& cs) {
      return posttrain::prosody_reward(cs, p.gt_chroma, ctk);
    };
    const auto rep = posttrain::run_grpo(policy, ref, prompts, r_int, r_pro, grpo_steps, grpo_cfg);
    for (std::size_t i = 0; i < rep.steps.size(); ++i) {
      const auto& s = rep.steps[i];
      std::printf("step %zu reward %.4f kl %.5f clip %.3f loss %.5f\n", i + 1, s.mean_reward, s.kl, s.clip_fraction, s.loss);
    }
    ar::save_ar_model(grpo_out, policy);
  });

  // synthesize
  auto* syn_cmd = app.add_subcommand("synthesize", "Run one synthesis, conversion or editing task");
  std::string syn_task, syn_text, syn_source, syn_source_text, syn_reference, syn_reference_text, syn_midi,
      syn_melody, syn_instrument = "piano", syn_out, syn_prefix_out;
  double syn_duration = 0.0, syn_shift = 0.0;
  bool syn_auto_shift = false;
  pipeline::RunConfig syn_cfg;
  add_model_paths(syn_cmd, paths, false, true, false, true, false);
  syn_cmd->add_option("--prosody-tokenizer", paths.prosody, "Prosody tokenizer checkpoint");
  syn_cmd->add_option("--ar", paths.ar, "AR model checkpoint");
  syn_cmd->add_option("--task", syn_task, "Task name")->required();
  syn_cmd->add_option("--text", syn_text, "Target or edited text");
  syn_cmd->add_option("--source", syn_source, "Source (or raw) WAV");
  syn_cmd->add_option("--source-text", syn_source_text, "Transcript of the source");
  syn_cmd->add_option("--reference", syn_reference, "Reference (timbre/style/singer) WAV");
  syn_cmd->add_option("--reference-text", syn_reference_text, "Transcript of the reference");
  syn_cmd->add_option("--midi", syn_midi, "MIDI note list (JSON)");
  syn_cmd->add_option("--melody", syn_melody, "Humming or instrument WAV");
  syn_cmd->add_option("--instrument", syn_instrument, "Instrument used to render --midi");
  syn_cmd->add_option("--target-duration", syn_duration, "Target duration in seconds");
  syn_cmd->add_option("--pitch-shift", syn_shift, "Semitones applied to the source before extraction");
  syn_cmd->add_flag("--auto-pitch-shift", syn_auto_shift, "Match the source pitch region to the reference");
  syn_cmd->add_option("--temperature", syn_cfg.sampling.temperature, "AR sampling temperature");
  syn_cmd->add_option("--seed", syn_cfg.seed, "Random seed");
  syn_cmd->add_option("--prefix-out", syn_prefix_out, "Write the AR prefix layout as JSON");
  syn_cmd->add_option("--out", syn_out, "Output WAV")->required();
  syn_cmd->callback([&] {
    pipeline::TaskRecipe recipe;
    recipe.task = pipeline::task_from_string(syn_task);
    if (!syn_text.empty()) recipe.text = syn_text;
    recipe.source = audio_input(syn_source, syn_source_text);
    recipe.reference = audio_input(syn_reference, syn_reference_text);
    recipe.melody = audio_input(syn_melody, "");
    if (!syn_midi.empty()) recipe.midi = pipeline::load_midi_json(syn_midi);
    recipe.instrument = pipeline::instrument_from_string(syn_instrument);
    if (syn_duration > 0.0) recipe.target_seconds = syn_duration;
    recipe.pitch_shift = syn_shift;
    recipe.auto_pitch_shift = syn_auto_shift;
    syn_cfg.sampling.seed = syn_cfg.seed;

    const auto ctk = tokenizer::load_tokenizer(paths.content_style);
    const auto fmm = fm::load_flow_model(paths.fm);
    std::optional<tokenizer::Tokenizer> ptk;
    if (!paths.prosody.empty()) ptk = tokenizer::load_tokenizer(paths.prosody);
    std::optional<ar::ArModel> arm;
    std::optional<ar::ArStage> stage;
    if (!paths.ar.empty()) {
      arm = ar::load_ar_model(paths.ar);
      stage.emplace(*arm);
    }
    pipeline::Models models{ptk ? &*ptk : nullptr, &ctk, stage ? &*stage : nullptr, &fmm};
    const auto out = pipeline::run_task(recipe, models, syn_cfg);
    dsp::write_wav(syn_out, out.wav);
    if (!syn_prefix_out.empty() && out.report.prefix) write_text(syn_prefix_out, ar::layout_to_json(*out.report.prefix));
    const auto& r = out.report;
    std::printf("task %s\n", std::string(pipeline::to_string(r.task)).c_str());
    if (r.ar_used) std::printf("prefix %s\n", r.signature.c_str());
    std::printf("cs tokens %zu, mel frames %zu, output %.3f s\n", r.cs_tokens, r.mel_frames, r.output_seconds);
    if (r.target_seconds) std::printf("target %.3f s, expected cs tokens %zu\n", *r.target_seconds, r.expected_cs_tokens);
    if (r.pitch_shift != 0.0) std::printf("pitch shift %.1f semitones\n", r.pitch_shift);
    if (r.truncated) std::fprintf(stderr, "warning: generation truncated\n");
    if (r.length_warning) std::fprintf(stderr, "warning: generated length strays from the prosody length\n");
  });

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Objective metrics");
  std::string eval_metric, eval_pairs;
  std::vector<std::string> eval_inputs;
  double eval_target = 0.0;
  eval_cmd->add_option("--metric", eval_metric, "fpc, chroma-cos or ddur")
      ->required()
      ->check(CLI::IsMember({"fpc", "chroma-cos", "ddur"}));
  eval_cmd->add_option("--target", eval_target, "Target duration for ddur over WAV inputs");
  eval_cmd->add_option("--pairs", eval_pairs, "ddur: text file of 'target achieved' lines");
  eval_cmd->add_option("inputs", eval_inputs, "WAV files");
  eval_cmd->callback([&] {
    if (eval_metric == "ddur") {
      std::vector<control::DurationTarget> pairs;
      if (!eval_pairs.empty()) {
        std::ifstream in(eval_pairs);
        if (!in) throw IoError("cannot open " + eval_pairs);
        double d = 0.0, a = 0.0;
        while (in >> d >> a) pairs.push_back({d, a});
      }
      for (const auto& f : eval_inputs) pairs.push_back({eval_target, dsp::read_wav(f).duration_seconds()});
      const auto m = control::duration_metrics(pairs);
      std::printf("ddur %.4f s\nconsistency %.2f%%\n", m.ddur, 100.0 * m.consistency);
      return;
    }
    if (eval_inputs.size() != 2) throw ParameterError("eval: expected two WAV files");
    const auto a = dsp::read_wav(eval_inputs[0]), b = dsp::read_wav(eval_inputs[1]);
    if (eval_metric == "fpc") {
      std::printf("fpc %.4f\n", pipeline::fpc(a, b));
    } else {
      std::printf("chroma-cos %.4f\n", pipeline::chroma_similarity(a, b));
    }
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const vevo::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
