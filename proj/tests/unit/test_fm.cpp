#include <gtest/gtest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "temp_dir.hpp"
#include "vevo/common/error.hpp"
#include "vevo/fm/flow_model.hpp"
#include "vevo/fm/flow_trainer.hpp"
#include "vevo/nn/ops.hpp"

using namespace vevo;
using namespace vevo::fm;
using dsp::FeatureKind;
using dsp::FeatureMatrix;
using tokenizer::TokenKind;
using tokenizer::TokenSequence;

namespace {

TokenSequence cs(std::vector<std::int32_t> ids) { return {std::move(ids), Rational(25, 2), TokenKind::kContentStyle}; }

FmConfig small_config() {
  FmConfig c;
  c.cs_size = 6;
  c.mel_bins = 8;
  c.width = 16;
  c.layers = 1;
  c.heads = 2;
  c.max_frames = 128;
  return c;
}

FeatureMatrix ramp_mel(std::size_t frames, std::size_t bins, float base) {
  FeatureMatrix m(frames, bins, FeatureKind::kMel);
  for (std::size_t i = 0; i < frames; ++i) {
    for (std::size_t j = 0; j < bins; ++j) m.at(i, j) = base + 0.1f * static_cast<float>(j) - 0.05f * static_cast<float>(i % 4);
  }
  return m;
}

FmCondition condition(std::vector<std::int32_t> target, std::vector<std::int32_t> ref, std::size_t bins) {
  FmCondition c;
  c.cs = cs(std::move(target));
  c.ref_cs = cs(std::move(ref));
  c.ref_mel = ramp_mel(kFramesPerToken * c.ref_cs.size(), bins, -5.0f);
  return c;
}

}  // namespace

TEST(Upsample, RepeatsEachTokenPerFrame) {
  const std::vector<std::int32_t> ids = {4, 0, 2};
  const auto up = upsample_ids(ids);
  ASSERT_EQ(up.size(), ids.size() * kFramesPerToken);
  for (std::size_t i = 0; i < up.size(); ++i) EXPECT_EQ(up[i], ids[i / kFramesPerToken]);
  const auto table = nn::Tensor<double>::from_vector({0, 1, 10, 11, 20, 21, 30, 31, 40, 41}, {5, 2});
  const auto frames = upsample_tokens_to_frames(cs({4, 0, 2}), table);
  ASSERT_EQ(frames.rows(), 12u);
  EXPECT_EQ(frames.data()[0], 40.0);
  EXPECT_EQ(frames.data()[2 * 3 + 1], 41.0);
  EXPECT_EQ(frames.data()[2 * 4], 0.0);
  EXPECT_EQ(frames.data()[2 * 11 + 1], 21.0);
}

TEST(Condition, ValidationRules) {
  auto c = condition({1, 2}, {3}, 8);
  EXPECT_NO_THROW(c.validate(8));
  EXPECT_EQ(c.target_frames(), 8u);
  EXPECT_THROW(c.validate(7), ShapeError);
  auto misaligned = c;
  misaligned.ref_mel = ramp_mel(5, 8, 0.0f);
  EXPECT_THROW(misaligned.validate(8), ShapeError);
  auto empty = c;
  empty.cs.ids.clear();
  EXPECT_THROW(empty.validate(8), ParameterError);
  auto wrong_kind = c;
  wrong_kind.cs.kind = TokenKind::kProsody;
  EXPECT_THROW(wrong_kind.validate(8), ParameterError);
  auto no_ref = condition({1}, {}, 8);
  EXPECT_NO_THROW(no_ref.validate(8));
  auto bad = small_config();
  bad.width = 15;
  EXPECT_THROW(bad.validate(), ParameterError);
}

TEST(MelNormalisation, RoundTrips) {
  const auto m = ramp_mel(6, 8, -7.0f);
  const auto n = normalize_mel<float>(m);
  EXPECT_NEAR(n.data()[0], (-7.0f - kMelShift) / kMelScale, 1e-6f);
  const auto back = denormalize_mel(n.data(), 6, 8);
  for (std::size_t i = 0; i < m.data.size(); ++i) EXPECT_NEAR(back.data[i], m.data[i], 1e-5f);
}

TEST(FlowModel, VelocityShapeAndChecks) {
  const FlowModel<float> model(small_config(), 1);
  const auto c = condition({1, 2, 3}, {4, 5}, 8);
  const auto v = model.velocity(nn::Tensor<float>::zeros({12, 8}), 0.5f, c);
  EXPECT_EQ(v.rows(), 12u);
  EXPECT_EQ(v.cols(), 8u);
  EXPECT_THROW((void)model.velocity(nn::Tensor<float>::zeros({11, 8}), 0.5f, c), ShapeError);
  auto long_c = condition(std::vector<std::int32_t>(40, 1), {}, 8);
  EXPECT_THROW((void)model.velocity(nn::Tensor<float>::zeros({160, 8}), 0.5f, long_c), ShapeError);
  auto bad_id = condition({6}, {}, 8);
  EXPECT_THROW((void)model.velocity(nn::Tensor<float>::zeros({4, 8}), 0.5f, bad_id), ParameterError);
}

TEST(FlowModel, ReferenceConditioningChangesTheVelocity) {
  const FlowModel<float> model(small_config(), 2);
  auto a = condition({1, 2}, {3, 4}, 8);
  auto b = a;
  for (auto& v : b.ref_mel.data) v += 1.0f;
  const auto x = nn::Tensor<float>::full({8, 8}, 0.1f);
  const auto va = model.velocity(x, 0.3f, a), vb = model.velocity(x, 0.3f, b);
  double d = 0.0;
  for (std::size_t i = 0; i < va.numel(); ++i) d += std::abs(va.data()[i] - vb.data()[i]);
  EXPECT_GT(d, 1e-4);
}

TEST(CfmLoss, MatchesDefinitionAndEndpoints) {
  const FlowModel<double> model([] {
    auto c = small_config();
    c.mel_bins = 4;
    return c;
  }(), 3);
  const auto c = condition({1, 2}, {0}, 4);
  std::mt19937_64 rng(4);
  const auto x1 = vevo::testing::random_leaf({8, 4}, rng), x0 = vevo::testing::random_leaf({8, 4}, rng);
  for (double t : {0.0, 0.37, 1.0}) {
    const double got = cfm_loss_at(x1, x0, t, c, model).item();
    // Hand-built interpolation and target.
    std::vector<double> xt(32), target(32);
    for (std::size_t i = 0; i < 32; ++i) {
      xt[i] = (1.0 - t) * x0.data()[i] + t * x1.data()[i];
      target[i] = x1.data()[i] - x0.data()[i];
    }
    const auto v = model.velocity(nn::Tensor<double>::from_vector(xt, {8, 4}), t, c);
    double want = 0.0;
    for (std::size_t i = 0; i < 32; ++i) want += (v.data()[i] - target[i]) * (v.data()[i] - target[i]);
    EXPECT_NEAR(got, want / 32.0, 1e-12) << t;
  }
  EXPECT_THROW(cfm_loss_at(x1, x0, 1.5, c, model), ParameterError);
  // At t = 0 the state is pure noise, so x1 only enters through the target.
  const auto x1b = nn::add(x1, nn::Tensor<double>::full({8, 4}, 1.0));
  const auto v0 = model.velocity(x0, 0.0, c);
  double want = 0.0;
  for (std::size_t i = 0; i < 32; ++i) {
    const double r = v0.data()[i] - (x1b.data()[i] - x0.data()[i]);
    want += r * r;
  }
  EXPECT_NEAR(cfm_loss_at(x1b, x0, 0.0, c, model).item(), want / 32.0, 1e-12);
}

TEST(CfmLoss, GradientOnTinyDoubleModel) {
  FmConfig cfg = small_config();
  cfg.mel_bins = 3;
  cfg.width = 8;
  cfg.cs_size = 4;
  FlowModel<double> model(cfg, 5);
  std::mt19937_64 rng(6);
  std::normal_distribution<double> normal(0.0, 0.3);
  for (const auto& p : model.parameters()) {
    auto t = p.tensor;
    for (auto& v : t.mutable_data()) v += normal(rng);
  }
  const auto c = condition({1, 3}, {2}, 3);
  const auto x1 = vevo::testing::random_leaf({8, 3}, rng), x0 = vevo::testing::random_leaf({8, 3}, rng);
  const auto r = vevo::testing::gradcheck(model.parameters(), [&] { return cfm_loss_at(x1, x0, 0.6, c, model); }, 1e-5);
  EXPECT_LE(r.max_rel_error, 1e-4) << r.worst;
}

TEST(Sampling, EulerStepAndDeterminism) {
  const FlowModel<float> model(small_config(), 7);
  const auto c = condition({1, 2, 3}, {4}, 8);
  std::vector<float> x0(12 * 8);
  std::mt19937_64 rng(8);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  for (auto& v : x0) v = normal(rng);
  // One Euler step is x0 + v(x0, 0).
  const auto one = sample_from(c, 1, model, x0);
  const auto v = model.velocity(nn::Tensor<float>::from_vector(x0, {12, 8}), 0.0f, c);
  std::vector<float> x1(x0.size());
  for (std::size_t i = 0; i < x1.size(); ++i) x1[i] = x0[i] + v.data()[i];
  const auto want = denormalize_mel(x1, 12, 8);
  for (std::size_t i = 0; i < x1.size(); ++i) EXPECT_NEAR(one.data[i], want.data[i], 1e-5f);
  EXPECT_EQ(one.num_frames, 12u);
  std::mt19937_64 ra(9), rb(9);
  EXPECT_EQ(sample(c, 4, model, ra).data, sample(c, 4, model, rb).data);
  EXPECT_THROW(sample_from(c, 0, model, x0), ParameterError);
  x0.pop_back();
  EXPECT_THROW(sample_from(c, 2, model, x0), ShapeError);
}

TEST(Items, AlignAndSplit) {
  const auto mel = ramp_mel(10, 8, 0.0f);
  const auto a = align_mel(mel, 4);
  EXPECT_EQ(a.num_frames, 16u);
  for (std::size_t i = 10; i < 16; ++i) {
    for (std::size_t j = 0; j < 8; ++j) EXPECT_EQ(a.at(i, j), mel.at(9, j));
  }
  EXPECT_EQ(align_mel(mel, 2).num_frames, 8u);
  const auto item = make_fm_item(cs({0, 1, 2, 3, 4}), mel, 2);
  EXPECT_EQ(item.cond.ref_cs.ids, (std::vector<std::int32_t>{0, 1}));
  EXPECT_EQ(item.cond.cs.ids, (std::vector<std::int32_t>{2, 3, 4}));
  EXPECT_EQ(item.cond.ref_mel.num_frames, 8u);
  EXPECT_EQ(item.mel.num_frames, 12u);
  EXPECT_NO_THROW(item.cond.validate(8));
  EXPECT_EQ(item.mel.at(0, 3), mel.at(8, 3));
  EXPECT_THROW(make_fm_item(cs({0, 1}), mel, 2), ParameterError);
  EXPECT_THROW(mel_mse(mel, a), ShapeError);
  EXPECT_DOUBLE_EQ(mel_mse(mel, mel), 0.0);
}

TEST(Training, LearnsTokenConditionedTargets) {
  // Two token ids map to two distinct flat mels; after training, samples for
  // each id land nearer their own target than the other one.
  auto cfg = small_config();
  cfg.width = 32;
  FlowModel<float> model(cfg, 10);
  std::vector<FmItem> items;
  const FeatureMatrix low = ramp_mel(8, 8, -9.0f), high = ramp_mel(8, 8, -3.0f);
  for (int k = 0; k < 4; ++k) {
    items.push_back({condition({1, 1}, {}, 8), low});
    items.push_back({condition({2, 2}, {}, 8), high});
  }
  FmTrainConfig h;
  h.steps = 400;
  h.lr = 3e-3;
  h.warmup_steps = 20;
  h.log_every = 100;
  h.seed = 1;
  const auto rep = train_fm(model, items, h);
  ASSERT_GE(rep.log.size(), 2u);
  EXPECT_LT(rep.log.back().second, rep.log.front().second);
  std::mt19937_64 rng(2);
  const auto a = sample(condition({1, 1}, {}, 8), 8, model, rng);
  const auto b = sample(condition({2, 2}, {}, 8), 8, model, rng);
  EXPECT_LT(mel_mse(a, low), mel_mse(a, high));
  EXPECT_LT(mel_mse(b, high), mel_mse(b, low));
}

TEST(Checkpoint, FlowModelRoundTrip) {
  vevo::testing::TempDir dir;
  const FlowModel<float> model(small_config(), 11);
  save_flow_model(dir / "fm.ckpt", model);
  const auto back = load_flow_model(dir / "fm.ckpt");
  EXPECT_EQ(back.config().width, 16u);
  const auto c = condition({1, 2}, {3}, 8);
  const auto x = nn::Tensor<float>::full({8, 8}, 0.2f);
  const auto va = model.velocity(x, 0.4f, c), vb = back.velocity(x, 0.4f, c);
  EXPECT_TRUE(std::equal(va.data().begin(), va.data().end(), vb.data().begin()));
}
