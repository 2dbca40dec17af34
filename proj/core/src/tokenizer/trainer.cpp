#include "vevo/tokenizer/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "vevo/common/error.hpp"
#include "vevo/dsp/waveform.hpp"
#include "vevo/nn/ops.hpp"
#include "vevo/nn/optim.hpp"
#include "vevo/tokenizer/manifest.hpp"

namespace vevo::tokenizer {
namespace {

double mse_value(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

double recon_value(const std::vector<nn::Tensor<float>>& targets, const std::vector<nn::Tensor<float>>& recon) {
  double s = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) s += mse_value(recon[i].data(), targets[i].data());
  return s / static_cast<double>(targets.size());
}

// Overwrites the selected entries with jittered encoder outputs drawn from `pool`.
void reseed_entries(Codebook<float>& cb, const std::vector<std::size_t>& which, const std::vector<float>& pool,
                    nn::Rng& rng) {
  const std::size_t d = cb.dim();
  const std::size_t rows = pool.size() / d;
  if (rows == 0 || which.empty()) return;
  std::uniform_int_distribution<std::size_t> pick(0, rows - 1);
  std::normal_distribution<float> jitter(0.0f, 0.05f);
  auto e = cb.entries.mutable_data();
  for (auto j : which) {
    const std::size_t r = pick(rng);
    for (std::size_t c = 0; c < d; ++c) e[j * d + c] = pool[r * d + c] + jitter(rng);
  }
  cb.renormalize();
}

}  // namespace

TokenizerDataset make_dataset(const std::vector<std::vector<dsp::FeatureMatrix>>& utterances,
                              const TokenizerConfig& cfg) {
  TokenizerDataset data;
  data.reserve(utterances.size());
  for (const auto& u : utterances) data.push_back(stack_inputs(u, cfg));
  return data;
}

double reconstruction_error(const Tokenizer& model, const TokenizerDataset& data) {
  if (data.empty()) throw ParameterError("reconstruction_error: empty dataset");
  double total = 0.0;
  for (const auto& x : data) {
    const auto out = model.forward(x);
    total += recon_value(split_inputs(x, model.config()), out.recon);
  }
  return total / static_cast<double>(data.size());
}

double codebook_usage(const Tokenizer& model, const TokenizerDataset& data) {
  std::vector<bool> used(model.config().codebook_size, false);
  for (const auto& x : data) {
    const auto z = model.encode_latent(x);
    for (auto id : nearest_ids<float>(z.data(), z.rows(), model.codebook)) used[static_cast<std::size_t>(id)] = true;
  }
  return static_cast<double>(std::count(used.begin(), used.end(), true)) / static_cast<double>(used.size());
}

TokenizerTrainReport train_tokenizer(Tokenizer& model, const TokenizerDataset& data,
                                     const TokenizerTrainConfig& hyper) {
  if (data.empty()) throw ParameterError("train_tokenizer: empty dataset");
  if (hyper.steps <= 0 || hyper.batch_size == 0) throw ParameterError("train_tokenizer: steps and batch must be > 0");
  const auto& cfg = model.config();
  const auto lambda = static_cast<float>(cfg.recon_weight);
  const auto beta = static_cast<float>(cfg.commit_weight);
  nn::Rng rng(hyper.seed ^ 0x70cu);

  TokenizerTrainReport report;
  report.initial_recon = reconstruction_error(model, data);

  std::vector<float> pool;
  for (const auto& x : data) {
    const auto z = model.encode_latent(x);
    pool.insert(pool.end(), z.data().begin(), z.data().end());
  }
  std::vector<std::size_t> all(cfg.codebook_size);
  std::iota(all.begin(), all.end(), std::size_t{0});
  reseed_entries(model.codebook, all, pool, rng);

  auto params = model.parameters();
  nn::AdamW<float> opt(params, nn::LrSchedule{hyper.lr, hyper.warmup_steps, hyper.steps},
                       nn::AdamWConfig{.weight_decay = hyper.weight_decay});
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = order.size();
  std::vector<std::size_t> hits(cfg.codebook_size, 0);
  pool.clear();

  for (std::int64_t step = 1; step <= hyper.steps; ++step) {
    nn::Tensor<float> total;
    double recon_sum = 0.0, commit_sum = 0.0;
    const float inv_batch = 1.0f / static_cast<float>(hyper.batch_size);
    for (std::size_t b = 0; b < hyper.batch_size; ++b) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      const auto& x = data[order[cursor++]];
      const auto out = model.forward(x);
      const auto targets = split_inputs(x, cfg);
      auto loss = nn::add(vqvae_loss(targets, out.recon, out.z_e, out.z_q, lambda, beta),
                          codebook_loss(out.z_e, out.z_q));
      loss = nn::scale(loss, inv_batch);
      total = total.defined() ? nn::add(total, loss) : loss;
      recon_sum += recon_value(targets, out.recon);
      commit_sum += mse_value(out.z_e.data(), out.z_q.data());
      for (auto id : out.ids) ++hits[static_cast<std::size_t>(id)];
      if (pool.size() < 4096 * cfg.code_dim) pool.insert(pool.end(), out.z_e.data().begin(), out.z_e.data().end());
    }
    const double loss_value = total.item();
    if (!std::isfinite(loss_value)) throw NumericError("train_tokenizer: non-finite loss at step " + std::to_string(step));
    total.backward();
    if (hyper.clip_norm > 0.0) nn::clip_grad_norm(params, hyper.clip_norm);
    opt.step();
    model.codebook.renormalize();

    if (step % hyper.log_every == 0 || step == 1 || step == hyper.steps) {
      const double nb = static_cast<double>(hyper.batch_size);
      report.log.push_back({step, loss_value, recon_sum / nb, commit_sum / nb});
    }
    if (hyper.revive_every > 0 && step % hyper.revive_every == 0 && step < hyper.steps) {
      std::vector<std::size_t> dead;
      for (std::size_t j = 0; j < hits.size(); ++j) {
        if (hits[j] == 0) dead.push_back(j);
      }
      reseed_entries(model.codebook, dead, pool, rng);
      report.revived_codes += dead.size();
      std::fill(hits.begin(), hits.end(), std::size_t{0});
      pool.clear();
    }
  }

  report.final_recon = reconstruction_error(model, data);
  report.codebook_usage = codebook_usage(model, data);
  return report;
}

Tokenizer train_tokenizer(const std::filesystem::path& manifest, const TokenizerConfig& cfg,
                          const TokenizerTrainConfig& hyper, TokenizerTrainReport* report) {
  const auto entries = read_manifest(manifest);
  if (entries.empty()) throw ParameterError("train_tokenizer: manifest " + manifest.string() + " is empty");
  std::vector<std::vector<dsp::FeatureMatrix>> utterances;
  for (const auto& e : entries) utterances.push_back(extract_inputs(dsp::read_wav(e.audio_path), cfg));
  Tokenizer model(cfg, hyper.seed);
  auto r = train_tokenizer(model, make_dataset(utterances, cfg), hyper);
  if (report) *report = std::move(r);
  return model;
}

}  // namespace vevo::tokenizer
