#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hazegan/data_pipeline.hpp"
#include "hazegan/losses.hpp"
#include "hazegan/networks.hpp"

namespace hazegan {

struct TrainConfig {
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int n_critic = 5;
  int batch_size = 4;
  int epochs = 1;
  uint64_t seed = 1;
  LossWeights weights;
  int image_size = 256;
  GeneratorSpec gen;
  CriticSpec critic;
  std::string vgg_weights_path;  // empty: seeded random feature fallback
  std::string vgg_tap = "conv4_3";
  uint64_t vgg_fallback_seed = 2024;
  std::string checkpoint_dir;        // empty: no checkpoints
  int checkpoint_interval = 0;       // in generator steps; 0: only at completion
  int64_t max_generator_steps = 0;   // 0: run the configured epochs; used by dry runs
  bool write_final_checkpoint = true;

  void validate() const;
  uint64_t fingerprint() const { return architecture_fingerprint(gen, critic, image_size); }
};

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  int64_t t = 0;
};

struct TrainState {
  Generator generator;
  Critic critic;
  AdamState opt_g;
  AdamState opt_c;
  int64_t generator_steps = 0;
  int64_t critic_steps = 0;
  int64_t epoch = 0;
  int64_t gen_cursor = 0;    // batch index within the current epoch
  int64_t critic_pass = 0;   // critic stream state
  int64_t critic_pos = 0;
  uint64_t seed = 0;
  uint64_t fingerprint = 0;
  GeneratorSpec gen_spec;
  CriticSpec critic_spec;
  int image_size = 0;
};

struct TrainLogRecord {
  int64_t step = 0;   // generator steps completed
  int64_t epoch = 0;
  double critic_objective = 0.0;   // mean over the cycle's critic updates
  double generator_objective = 0.0;
  double gradient_penalty = 0.0;   // mean over the cycle's critic updates
  double wasserstein = 0.0;        // mean over the cycle's critic updates
  double time_s = 0.0;             // wall clock since train() started
};

using LogSink = std::function<void(const TrainLogRecord&)>;

// Deterministic per-epoch generator batches: shuffled by (seed, epoch), the
// final batch may be partial.
std::vector<int> generator_batch_indices(uint64_t seed, int64_t epoch, int64_t cursor,
                                         int64_t dataset_size, int batch_size);

TrainState make_initial_state(const TrainConfig& config);

// Alternating optimization: n_critic critic updates per generator update,
// Adam on both, one log record per cycle. Aborts with NumericError as soon as
// any objective goes non-finite; previously written checkpoints stay on disk.
TrainState train(const TrainConfig& config, const DatasetManifest& manifest,
                 const LogSink& sink = {}, std::optional<TrainState> resume = std::nullopt);

// Continues a checkpoint's parameters on a new dataset with fresh optimizer
// moments and counters. epochs == 0 is a no-op that returns the parameters
// untouched.
TrainState transfer_learn(TrainState checkpoint, const TrainConfig& config,
                          const DatasetManifest& manifest, const LogSink& sink = {});

void save_checkpoint(const TrainState& state, const std::string& path);
TrainState load_checkpoint(const std::string& path);

// FNV-1a over raw parameter bytes; used to assert phase isolation in tests.
uint64_t params_hash(const std::vector<ad::Var>& params);

}  // namespace hazegan
