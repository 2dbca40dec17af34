#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"
#include "vevo/common/error.hpp"
#include "vevo/dsp/features.hpp"
#include "vevo/tokenizer/codebook.hpp"
#include "vevo/tokenizer/manifest.hpp"
#include "vevo/tokenizer/tokens.hpp"
#include "vevo/tokenizer/trainer.hpp"
#include "vevo/tokenizer/vqvae.hpp"

using namespace vevo;
using namespace vevo::tokenizer;
using vevo::testing::gradcheck;
using vevo::testing::random_leaf;

namespace {

TokenizerConfig tiny_config(TokenKind kind) {
  auto cfg = kind == TokenKind::kProsody ? prosody_config(16) : content_style_config(16);
  cfg.hidden = 8;
  cfg.code_dim = 4;
  cfg.num_blocks = 1;
  return cfg;
}

dsp::Waveform chirp(double f0, double f1, double seconds) {
  dsp::Waveform w;
  const auto n = static_cast<std::size_t>(seconds * dsp::kSampleRate);
  w.samples.resize(n);
  double phase = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double f = f0 + (f1 - f0) * static_cast<double>(i) / static_cast<double>(n);
    phase += 2.0 * M_PI * f / dsp::kSampleRate;
    w.samples[i] = static_cast<float>(0.4 * std::sin(phase) + 0.2 * std::sin(2.0 * phase));
  }
  return w;
}

}  // namespace

TEST(Bitrate, FullScaleConfigurations) {
  EXPECT_EQ(bitrate(prosody_config(512)), 56.25);
  EXPECT_EQ(bitrate(content_style_config(16384)), 175.0);
  EXPECT_EQ(prosody_config().token_rate(), Rational(25, 4));
  EXPECT_EQ(content_style_config().token_rate(), Rational(25, 2));
  EXPECT_EQ(content_style_config().codebook_size, kDeskContentStyleCodebookSize);
  EXPECT_EQ(kContentStyleCodebookSize, 16384u);
}

TEST(Config, InputsPerKind) {
  const auto p = prosody_config(), c = content_style_config();
  ASSERT_EQ(p.input_kinds.size(), 1u);
  EXPECT_EQ(p.input_kinds[0], dsp::FeatureKind::kChromagram);
  EXPECT_EQ(p.input_width(), 24u);
  ASSERT_EQ(c.input_kinds.size(), 2u);
  EXPECT_EQ(c.input_width(), 24u + static_cast<std::size_t>(dsp::kPseudoContentDim));
  auto bad = p;
  bad.codebook_size = 0;
  EXPECT_THROW(bad.validate(), ParameterError);
}

TEST(TokenLength, ContractOverFrameCounts) {
  const auto p = prosody_config(), c = content_style_config();
  for (std::size_t frames = 1; frames < 2000; ++frames) {
    const auto np = p.num_tokens(frames), nc = c.num_tokens(frames);
    EXPECT_EQ(np, (frames + 7) / 8);
    if (frames % 8 == 0) {
      EXPECT_EQ(nc, 2 * np) << frames;
    } else {
      EXPECT_LE(std::abs(static_cast<long>(nc) - 2 * static_cast<long>(np)), 1) << frames;
    }
  }
}

TEST(Codebook, RandomEntriesAreUnitNorm) {
  nn::Rng rng(1);
  const auto cb = Codebook<float>::random(64, 8, rng);
  for (std::size_t j = 0; j < cb.size(); ++j) {
    double s = 0.0;
    for (float v : cb.entry(j)) s += v * v;
    EXPECT_NEAR(std::sqrt(s), 1.0, 1e-5);
  }
}

TEST(Codebook, NearestMatchesBruteForceIncludingTies) {
  nn::Rng rng(2);
  std::uniform_int_distribution<int> grid(-2, 2);
  for (std::size_t k : {4u, 64u, 257u}) {
    // Dyadic grid values make many exact ties, with duplicated rows on top.
    std::vector<float> e(k * 3);
    for (auto& v : e) v = static_cast<float>(grid(rng)) * 0.5f;
    for (std::size_t j = 1; j < k; j += 3) std::copy_n(e.begin(), 3, e.begin() + static_cast<long>(j * 3));
    const Codebook<float> cb(nn::Tensor<float>::from_vector(e, {k, 3}));
    std::vector<float> z(500 * 3);
    for (auto& v : z) v = static_cast<float>(grid(rng)) * 0.25f;
    const auto ids = nearest_ids<float>(z, 500, cb);
    for (std::size_t i = 0; i < 500; ++i) {
      const auto want = vevo::testing::brute_force_nearest<float>(std::span<const float>(z).subspan(i * 3, 3), e, 3);
      ASSERT_EQ(ids[i], want) << "k=" << k << " row " << i;
    }
  }
}

TEST(Codebook, QuantizerIsIdempotentOnEntries) {
  nn::Rng rng(3);
  const auto cb = Codebook<float>::random(128, 8, rng);
  const auto q = quantize(cb.entries.detach(), cb);
  for (std::size_t j = 0; j < cb.size(); ++j) EXPECT_EQ(q.ids[j], static_cast<std::int32_t>(j));
  const auto again = quantize(q.z_q.detach(), cb);
  EXPECT_EQ(again.ids, q.ids);
}

TEST(Codebook, QuantizeRejectsWidthMismatch) {
  nn::Rng rng(4);
  const auto cb = Codebook<float>::random(8, 4, rng);
  EXPECT_THROW(quantize(nn::Tensor<float>::zeros({2, 5}), cb), ShapeError);
}

TEST(Tokens, BinaryAndJsonRoundTrip) {
  const TokenSequence seq{{3, 1, 4, 1, 5, 9, 2, 6}, Rational(25, 2), TokenKind::kContentStyle};
  std::stringstream ss;
  write_tokens(ss, seq);
  const auto b = read_tokens(ss);
  EXPECT_EQ(b.ids, seq.ids);
  EXPECT_EQ(b.frame_rate, seq.frame_rate);
  EXPECT_EQ(b.kind, seq.kind);
  const auto j = tokens_from_json(tokens_to_json(seq));
  EXPECT_EQ(j.ids, seq.ids);
  EXPECT_EQ(j.frame_rate, seq.frame_rate);
  EXPECT_EQ(j.kind, seq.kind);
  EXPECT_DOUBLE_EQ(seq.duration_seconds(), 8.0 / 12.5);
  std::stringstream bad("VVXX");
  EXPECT_THROW(read_tokens(bad), FormatError);
  EXPECT_THROW(tokens_from_json("{\"kind\": \"melody\"}"), FormatError);
}

TEST(Tokens, RangeCheck) {
  const TokenSequence seq{{0, 7, 8}, Rational(25, 4), TokenKind::kProsody};
  EXPECT_THROW(seq.check_range(8), VocabularyError);
  EXPECT_NO_THROW(seq.check_range(9));
}

TEST(Manifest, RoundTripResolvesRelativePaths) {
  vevo::testing::TempDir dir;
  write_manifest(dir / "m.jsonl", {{"a.wav", "hello", "en"}, {"sub/b.wav", "la la", "en"}});
  const auto m = read_manifest(dir / "m.jsonl");
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m[0].audio_path, dir.path() / "a.wav");
  EXPECT_EQ(m[1].text, "la la");
  EXPECT_EQ(m[1].language, "en");
}

TEST(VqVae, ShapesAndTokenRate) {
  for (auto kind : {TokenKind::kProsody, TokenKind::kContentStyle}) {
    const Tokenizer model(tiny_config(kind), 5);
    const auto w = chirp(150.0, 400.0, 0.77);
    const auto feats = extract_inputs(w, model.config());
    const auto frames = feats[0].num_frames;
    const auto out = model.forward(stack_inputs(feats, model.config()));
    EXPECT_EQ(out.ids.size(), model.config().num_tokens(frames));
    ASSERT_EQ(out.recon.size(), model.config().input_kinds.size());
    for (std::size_t i = 0; i < out.recon.size(); ++i) {
      EXPECT_EQ(out.recon[i].rows(), frames);
      EXPECT_EQ(out.recon[i].cols(), model.config().input_dims()[i]);
    }
    for (std::size_t r = 0; r < out.z_e.rows(); ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < out.z_e.cols(); ++c) s += out.z_e.data()[r * out.z_e.cols() + c] * out.z_e.data()[r * out.z_e.cols() + c];
      EXPECT_NEAR(std::sqrt(s), 1.0, 1e-5);
    }
    const auto tokens = encode(w, model);
    EXPECT_EQ(tokens.ids, out.ids);
    EXPECT_EQ(tokens.kind, kind);
    EXPECT_EQ(tokens.frame_rate, model.config().token_rate());
    const auto dec = decode(tokens, model);
    EXPECT_EQ(dec[0].num_frames, tokens.size() * model.config().downsample_ratio);
  }
}

TEST(VqVae, StackInputsChecksKindsAndFrames) {
  const auto cfg = tiny_config(TokenKind::kContentStyle);
  auto feats = extract_inputs(chirp(200, 300, 0.3), cfg);
  std::swap(feats[0], feats[1]);
  EXPECT_THROW(stack_inputs(feats, cfg), Error);
}

TEST(VqVaeGradient, CompositeLossWrtInputs) {
  std::mt19937_64 rng(6);
  const auto x1 = random_leaf({8, 3}, rng), x2 = random_leaf({8, 2}, rng);
  auto h1 = random_leaf({8, 3}, rng), h2 = random_leaf({8, 2}, rng), ze = random_leaf({2, 4}, rng);
  const auto zq = random_leaf({2, 4}, rng);
  const nn::ParameterList<double> p{{"x_hat0", h1}, {"x_hat1", h2}, {"z_e", ze}};
  const auto r = gradcheck(p, [&] { return vqvae_loss<double>({x1, x2}, {h1, h2}, ze, zq, 1.0, 0.25); });
  EXPECT_LE(r.max_rel_error, 1e-4) << r.worst;
  const nn::ParameterList<double> q{{"z_q", zq}};
  EXPECT_LE(gradcheck(q, [&] { return codebook_loss(ze, zq); }).max_rel_error, 1e-4);
}

TEST(VqVaeGradient, LossValueMatchesDefinition) {
  const auto x = nn::Tensor<double>::from_vector({1, 2, 3, 4}, {2, 2});
  const auto xh = nn::Tensor<double>::from_vector({1, 1, 3, 3}, {2, 2});
  const auto ze = nn::Tensor<double>::from_vector({1, 0}, {1, 2});
  const auto zq = nn::Tensor<double>::from_vector({0, 1}, {1, 2});
  // recon = (0 + 1 + 0 + 1) / 4, commit = (1 + 1) / 2
  EXPECT_DOUBLE_EQ(vqvae_loss(x, xh, ze, zq, 2.0, 0.25).item(), 2.0 * 0.5 + 0.25 * 1.0);
}

TEST(VqVaeGradient, EncoderDecoderBlocks) {
  auto cfg = tiny_config(TokenKind::kContentStyle);
  cfg.hidden = 4;
  cfg.code_dim = 3;
  VqVae<double> model(cfg, 7);
  std::mt19937_64 rng(8);
  // Larger weights than the 0.02 init keep gradients well above difference noise.
  std::normal_distribution<double> normal(0.0, 0.3);
  for (const auto& p : model.parameters()) {
    if (p.name == "codebook") continue;
    auto t = p.tensor;
    for (auto& v : t.mutable_data()) v += normal(rng);
  }
  const auto x = random_leaf({16, cfg.input_width()}, rng, 0.5);
  // Quantisation is piecewise constant, so the encoder is checked through the
  // continuous path and the decoder through the full quantised forward.
  nn::ParameterList<double> enc, dec;
  for (const auto& p : model.parameters()) {
    if (p.name.rfind("enc.", 0) == 0) enc.push_back(p);
    if (p.name.rfind("dec.", 0) == 0) dec.push_back(p);
  }
  const auto r_enc = gradcheck(enc, [&] {
    const auto heads = model.decode_latent(model.encode_latent(x));
    return vevo::testing::project_to_scalar(nn::concat_cols<double>(heads));
  });
  EXPECT_LE(r_enc.max_rel_error, 1e-4) << r_enc.worst;
  const auto r_dec = gradcheck(dec, [&] {
    const auto out = model.forward(x);
    return vqvae_loss(split_inputs(x, cfg), out.recon, out.z_e, out.z_q, 1.0, 0.25);
  });
  EXPECT_LE(r_dec.max_rel_error, 1e-4) << r_dec.worst;
}

TEST(Trainer, ReducesReconstructionAndKeepsUnitCodebook) {
  const auto cfg = tiny_config(TokenKind::kProsody);
  Tokenizer model(cfg, 9);
  std::vector<std::vector<dsp::FeatureMatrix>> utts;
  for (int i = 0; i < 4; ++i) utts.push_back(extract_inputs(chirp(120.0 + 40 * i, 300.0 + 60 * i, 0.64), cfg));
  const auto data = make_dataset(utts, cfg);
  TokenizerTrainConfig h;
  h.steps = 150;
  h.lr = 5e-3;
  h.warmup_steps = 10;
  h.revive_every = 50;
  h.log_every = 50;
  const auto rep = train_tokenizer(model, data, h);
  EXPECT_LT(rep.final_recon, rep.initial_recon);
  EXPECT_NEAR(rep.final_recon, reconstruction_error(model, data), 1e-9);
  EXPECT_GT(rep.codebook_usage, 0.0);
  EXPECT_LE(rep.codebook_usage, 1.0);
  EXPECT_FALSE(rep.log.empty());
  for (std::size_t j = 0; j < model.codebook.size(); ++j) {
    double s = 0.0;
    for (float v : model.codebook.entry(j)) s += v * v;
    EXPECT_NEAR(std::sqrt(s), 1.0, 1e-5);
  }
}

TEST(Trainer, FixedSeedIsDeterministic) {
  const auto cfg = tiny_config(TokenKind::kProsody);
  const auto data = make_dataset({extract_inputs(chirp(200, 500, 0.5), cfg)}, cfg);
  TokenizerTrainConfig h;
  h.steps = 20;
  h.seed = 3;
  Tokenizer a(cfg, 1), b(cfg, 1);
  train_tokenizer(a, data, h);
  train_tokenizer(b, data, h);
  const auto pa = a.parameters(), pb = b.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    ASSERT_TRUE(std::equal(pa[i].tensor.data().begin(), pa[i].tensor.data().end(), pb[i].tensor.data().begin()))
        << pa[i].name;
  }
}

TEST(Checkpoint, TokenizerRoundTripEncodesIdentically) {
  vevo::testing::TempDir dir;
  const Tokenizer model(tiny_config(TokenKind::kContentStyle), 11);
  save_tokenizer(dir / "t.ckpt", model);
  const auto back = load_tokenizer(dir / "t.ckpt");
  EXPECT_EQ(back.config().codebook_size, model.config().codebook_size);
  EXPECT_EQ(back.config().kind, model.config().kind);
  const auto w = chirp(180.0, 260.0, 0.9);
  EXPECT_EQ(encode(w, back).ids, encode(w, model).ids);
  const auto da = decode(encode(w, model), model), db = decode(encode(w, back), back);
  EXPECT_EQ(da[1].data, db[1].data);
}
