#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "vevo/dsp/features.hpp"
#include "vevo/tokenizer/vqvae.hpp"

namespace vevo::tokenizer {

struct TokenizerTrainConfig {
  std::int64_t steps = 5000;
  std::size_t batch_size = 4;
  double lr = 2e-3;
  std::int64_t warmup_steps = 100;
  double weight_decay = 0.0;
  double clip_norm = 1.0;
  std::int64_t log_every = 50;
  std::int64_t revive_every = 500;
  std::uint64_t seed = 0;
};

struct TokenizerLogEntry {
  std::int64_t step = 0;
  double loss = 0.0;
  double recon = 0.0;
  double commit = 0.0;
};

struct TokenizerTrainReport {
  std::vector<TokenizerLogEntry> log;
  double initial_recon = 0.0;  // reconstruction MSE over the data before training
  double final_recon = 0.0;
  double codebook_usage = 0.0;
  std::size_t revived_codes = 0;
};

/// Utterance-level training data: each item is one stacked feature matrix.
using TokenizerDataset = std::vector<nn::Tensor<float>>;

TokenizerDataset make_dataset(const std::vector<std::vector<dsp::FeatureMatrix>>& utterances,
                              const TokenizerConfig& cfg);

/// Mean reconstruction term (mean of per-head MSEs) averaged over utterances.
double reconstruction_error(const Tokenizer& model, const TokenizerDataset& data);

/// Fraction of codebook entries selected at least once across `data`.
double codebook_usage(const Tokenizer& model, const TokenizerDataset& data);

/// Trains in place. Entries are initialised from encoder outputs, re-normalised
/// after every step, and unused entries are re-seeded every `revive_every` steps.
TokenizerTrainReport train_tokenizer(Tokenizer& model, const TokenizerDataset& data,
                                     const TokenizerTrainConfig& hyper);

/// Loads every manifest entry, extracts features and trains a fresh model.
Tokenizer train_tokenizer(const std::filesystem::path& manifest, const TokenizerConfig& cfg,
                          const TokenizerTrainConfig& hyper, TokenizerTrainReport* report = nullptr);

}  // namespace vevo::tokenizer
