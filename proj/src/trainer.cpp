#include "hazegan/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>

#include "hazegan/errors.hpp"
#include "hazegan/rng.hpp"
#include "hazegan/tensor_store.hpp"

namespace hazegan {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw InvalidParameterError("learning_rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw InvalidParameterError("adam betas must lie in [0,1)");
  }
  if (n_critic < 1) throw InvalidParameterError("n_critic must be >= 1");
  if (batch_size < 1) throw InvalidParameterError("batch_size must be >= 1");
  if (epochs < 1) throw InvalidParameterError("epochs must be >= 1");
  weights.validate();
  gen.validate();
  critic.validate();
}

namespace {

// Lazily decoded, memoized dataset view at network resolution.
class TensorDataset {
 public:
  TensorDataset(const DatasetManifest& manifest, int image_size)
      : manifest_(&manifest), size_(image_size) {
    hazy_.resize(manifest.pairs.size());
    clear_.resize(manifest.pairs.size());
  }

  int64_t size() const { return int64_t(manifest_->pairs.size()); }

  std::pair<Tensor, Tensor> batch(const std::vector<int>& indices) {
    const int b = int(indices.size());
    Tensor hazy(Shape(b, 3, size_, size_));
    Tensor clear(Shape(b, 3, size_, size_));
    const int64_t per = int64_t(3) * size_ * size_;
    for (int i = 0; i < b; ++i) {
      const Tensor& h = cached(hazy_, indices[size_t(i)], /*clear=*/false);
      const Tensor& c = cached(clear_, indices[size_t(i)], /*clear=*/true);
      std::copy_n(h.data(), per, hazy.data() + i * per);
      std::copy_n(c.data(), per, clear.data() + i * per);
    }
    return {std::move(hazy), std::move(clear)};
  }

 private:
  const Tensor& cached(std::vector<Tensor>& cache, int idx, bool clear) {
    Tensor& slot = cache[size_t(idx)];
    if (!slot.defined()) {
      const ImagePair& pair = manifest_->pairs[size_t(idx)];
      slot = to_net_tensor(clear ? pair.clear_path : pair.hazy_path, size_);
    }
    return slot;
  }

  const DatasetManifest* manifest_;
  int size_;
  std::vector<Tensor> hazy_, clear_;
};

// Continuous shuffled index stream for critic batches; batches may span pass
// boundaries. The (pass, pos) pair is the whole state.
class CriticStream {
 public:
  CriticStream(uint64_t seed, int64_t n) : seed_(seed), n_(n) { reshuffle(); }

  void seek(int64_t pass, int64_t pos) {
    pass_ = pass;
    pos_ = pos;
    reshuffle();
  }

  std::vector<int> next(int batch_size) {
    std::vector<int> out;
    out.reserve(size_t(batch_size));
    while (int(out.size()) < batch_size) {
      if (pos_ >= n_) {
        ++pass_;
        pos_ = 0;
        reshuffle();
      }
      out.push_back(order_[size_t(pos_++)]);
    }
    return out;
  }

  int64_t pass() const { return pass_; }
  int64_t pos() const { return pos_; }

 private:
  void reshuffle() {
    order_.resize(size_t(n_));
    std::iota(order_.begin(), order_.end(), 0);
    Rng rng = Rng::derive(seed_, "critic-stream", uint64_t(pass_));
    rng.shuffle(order_);
  }

  uint64_t seed_;
  int64_t n_;
  int64_t pass_ = 0;
  int64_t pos_ = 0;
  std::vector<int> order_;
};

void adam_init(AdamState& state, const std::vector<ad::Var>& params) {
  state.m.clear();
  state.v.clear();
  state.t = 0;
  for (const auto& p : params) {
    state.m.push_back(Tensor::zeros(p->value.shape()));
    state.v.push_back(Tensor::zeros(p->value.shape()));
  }
}

void adam_step(AdamState& state, const std::vector<ad::Var>& params,
               const std::unordered_map<ad::Node*, ad::Var>& grads, const TrainConfig& cfg) {
  ++state.t;
  const double bc1 = 1.0 - std::pow(cfg.beta1, double(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, double(state.t));
  for (size_t i = 0; i < params.size(); ++i) {
    auto it = grads.find(params[i].get());
    if (it == grads.end()) continue;
    const float* g = it->second->value.data();
    float* p = params[i]->value.data();
    float* m = state.m[i].data();
    float* v = state.v[i].data();
    const int64_t n = params[i]->value.numel();
    const float b1 = float(cfg.beta1), b2 = float(cfg.beta2);
    for (int64_t k = 0; k < n; ++k) {
      m[k] = b1 * m[k] + (1.f - b1) * g[k];
      v[k] = b2 * v[k] + (1.f - b2) * g[k] * g[k];
      const double mhat = double(m[k]) / bc1;
      const double vhat = double(v[k]) / bc2;
      p[k] = float(double(p[k]) - cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps));
    }
  }
}

void require_finite(double v, const char* what, int64_t step) {
  if (!std::isfinite(v)) {
    throw NumericError(std::string(what) + " became non-finite at generator step " +
                       std::to_string(step) + "; last checkpoint retained");
  }
}

std::string checkpoint_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

void run_training(const TrainConfig& config, const DatasetManifest& manifest,
                  const LogSink& sink, TrainState& state) {
  if (!manifest.has_references) {
    throw DataError("training requires a dataset with clear references");
  }
  if (manifest.pairs.empty()) throw DataError("training dataset is empty");

  TensorDataset dataset(manifest, config.image_size);
  std::vector<std::string> warnings;
  FeatureExtractor phi = FeatureExtractor::configure(config.vgg_weights_path, config.vgg_tap,
                                                     config.vgg_fallback_seed, &warnings);
  for (const auto& w : warnings) std::fprintf(stderr, "[hazegan] warning: %s\n", w.c_str());

  const int64_t n = dataset.size();
  const int64_t batches_per_epoch = (n + config.batch_size - 1) / config.batch_size;
  CriticStream critic_stream(state.seed, n);
  critic_stream.seek(state.critic_pass, state.critic_pos);

  if (!config.checkpoint_dir.empty()) {
    std::filesystem::create_directories(config.checkpoint_dir);
  }

  const auto t0 = std::chrono::steady_clock::now();
  const auto gen_params = state.generator.params();
  const auto critic_params = state.critic.params();

  bool done = state.epoch >= config.epochs;
  while (!done) {
    // Critic phase: n_critic updates on fresh batches.
    double gp_sum = 0.0, cobj_sum = 0.0, wass_sum = 0.0;
    for (int k = 0; k < config.n_critic; ++k) {
      auto idx = critic_stream.next(config.batch_size);
      auto [hazy, clear] = dataset.batch(idx);
      Rng alpha_rng = Rng::derive(state.seed, "alpha", uint64_t(state.critic_steps));
      CriticObjectiveParts parts;
      ad::Var objective = critic_objective(state.critic, state.generator, hazy, clear,
                                           config.weights, alpha_rng, &parts);
      require_finite(parts.objective, "critic objective", state.generator_steps);
      auto grads = ad::backward(objective);
      adam_step(state.opt_c, critic_params, grads, config);
      ++state.critic_steps;
      gp_sum += parts.penalty;
      cobj_sum += parts.objective;
      wass_sum += parts.wasserstein;
    }
    state.critic_pass = critic_stream.pass();
    state.critic_pos = critic_stream.pos();

    // Generator phase: one update.
    auto idx = generator_batch_indices(state.seed, state.epoch, state.gen_cursor, n,
                                       config.batch_size);
    auto [hazy, clear] = dataset.batch(idx);
    GeneratorObjectiveParts gparts;
    ad::Var objective = generator_objective(state.critic, state.generator, hazy, clear, phi,
                                            config.weights, &gparts);
    require_finite(gparts.objective, "generator objective", state.generator_steps);
    auto grads = ad::backward(objective);
    adam_step(state.opt_g, gen_params, grads, config);
    ++state.generator_steps;
    ++state.gen_cursor;
    if (state.gen_cursor >= batches_per_epoch) {
      ++state.epoch;
      state.gen_cursor = 0;
    }

    if (sink) {
      TrainLogRecord rec;
      rec.step = state.generator_steps;
      rec.epoch = state.epoch;
      rec.critic_objective = cobj_sum / config.n_critic;
      rec.generator_objective = gparts.objective;
      rec.gradient_penalty = gp_sum / config.n_critic;
      rec.wasserstein = wass_sum / config.n_critic;
      rec.time_s =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      sink(rec);
    }

    if (!config.checkpoint_dir.empty() && config.checkpoint_interval > 0 &&
        state.generator_steps % config.checkpoint_interval == 0) {
      save_checkpoint(state, checkpoint_path(config.checkpoint_dir,
                                             "ckpt_" + std::to_string(state.generator_steps) +
                                                 ".bin"));
    }

    done = state.epoch >= config.epochs ||
           (config.max_generator_steps > 0 &&
            state.generator_steps >= config.max_generator_steps);
  }

  if (!config.checkpoint_dir.empty() && config.write_final_checkpoint) {
    save_checkpoint(state, checkpoint_path(config.checkpoint_dir, "ckpt_final.bin"));
  }
}

}  // namespace

std::vector<int> generator_batch_indices(uint64_t seed, int64_t epoch, int64_t cursor,
                                         int64_t dataset_size, int batch_size) {
  std::vector<int> order(static_cast<size_t>(dataset_size));
  std::iota(order.begin(), order.end(), 0);
  Rng rng = Rng::derive(seed, "gen-epoch", uint64_t(epoch));
  rng.shuffle(order);
  const int64_t lo = cursor * batch_size;
  const int64_t hi = std::min<int64_t>(dataset_size, lo + batch_size);
  if (lo >= hi) throw InvalidParameterError("generator batch cursor out of range");
  return {order.begin() + lo, order.begin() + hi};
}

TrainState make_initial_state(const TrainConfig& config) {
  config.validate();
  TrainState state;
  state.generator = Generator(config.gen, config.image_size, config.seed);
  state.critic = Critic(config.critic, config.image_size, config.seed);
  adam_init(state.opt_g, state.generator.params());
  adam_init(state.opt_c, state.critic.params());
  state.seed = config.seed;
  state.fingerprint = config.fingerprint();
  state.gen_spec = config.gen;
  state.critic_spec = config.critic;
  state.image_size = config.image_size;
  return state;
}

TrainState train(const TrainConfig& config, const DatasetManifest& manifest, const LogSink& sink,
                 std::optional<TrainState> resume) {
  config.validate();
  TrainState state = resume ? std::move(*resume) : make_initial_state(config);
  if (state.fingerprint != config.fingerprint()) {
    throw IncompatibleCheckpointError(
        "resume checkpoint architecture does not match the configuration");
  }
  run_training(config, manifest, sink, state);
  return state;
}

TrainState transfer_learn(TrainState checkpoint, const TrainConfig& config,
                          const DatasetManifest& manifest, const LogSink& sink) {
  if (config.epochs < 0) throw InvalidParameterError("epochs must be >= 0");
  if (checkpoint.fingerprint != config.fingerprint()) {
    throw IncompatibleCheckpointError(
        "checkpoint architecture does not match the transfer configuration");
  }
  // Parameters carry over; moments, counters and stream positions start
  // fresh on the new domain.
  TrainState state = std::move(checkpoint);
  adam_init(state.opt_g, state.generator.params());
  adam_init(state.opt_c, state.critic.params());
  state.generator_steps = 0;
  state.critic_steps = 0;
  state.epoch = 0;
  state.gen_cursor = 0;
  state.critic_pass = 0;
  state.critic_pos = 0;
  state.seed = config.seed;
  if (config.epochs == 0) return state;
  TrainConfig cfg = config;
  cfg.validate();
  run_training(cfg, manifest, sink, state);
  return state;
}

namespace {

void store_params(TensorStore& store, const std::string& prefix,
                  const std::vector<ad::Var>& params, const AdamState& opt) {
  for (size_t i = 0; i < params.size(); ++i) {
    store.tensors[prefix + "/p" + std::to_string(i)] = params[i]->value.clone();
    store.tensors[prefix + "/m" + std::to_string(i)] = opt.m[i].clone();
    store.tensors[prefix + "/v" + std::to_string(i)] = opt.v[i].clone();
  }
}

void load_params(const TensorStore& store, const std::string& prefix,
                 const std::vector<ad::Var>& params, AdamState& opt) {
  opt.m.clear();
  opt.v.clear();
  for (size_t i = 0; i < params.size(); ++i) {
    const Tensor& p = store.get_tensor(prefix + "/p" + std::to_string(i));
    if (!(p.shape() == params[i]->value.shape())) {
      throw IntegrityError("checkpoint tensor shape mismatch at " + prefix + "/p" +
                           std::to_string(i));
    }
    std::copy_n(p.data(), p.numel(), params[i]->value.data());
    opt.m.push_back(store.get_tensor(prefix + "/m" + std::to_string(i)).clone());
    opt.v.push_back(store.get_tensor(prefix + "/v" + std::to_string(i)).clone());
  }
}

}  // namespace

void save_checkpoint(const TrainState& state, const std::string& path) {
  TensorStore store;
  store.fingerprint = state.fingerprint;
  store.ints["image_size"] = state.image_size;
  store.ints["gen.in"] = state.gen_spec.in_channels;
  store.ints["gen.out"] = state.gen_spec.out_channels;
  store.ints["gen.width"] = state.gen_spec.base_width;
  store.ints["gen.depth"] = state.gen_spec.depth;
  store.ints["critic.in"] = state.critic_spec.in_channels;
  store.ints["critic.stages"] = int64_t(state.critic_spec.widths.size());
  for (size_t i = 0; i < state.critic_spec.widths.size(); ++i) {
    store.ints["critic.w" + std::to_string(i)] = state.critic_spec.widths[i];
  }
  store.ints["generator_steps"] = state.generator_steps;
  store.ints["critic_steps"] = state.critic_steps;
  store.ints["epoch"] = state.epoch;
  store.ints["gen_cursor"] = state.gen_cursor;
  store.ints["critic_pass"] = state.critic_pass;
  store.ints["critic_pos"] = state.critic_pos;
  store.ints["seed"] = int64_t(state.seed);
  store.ints["adam_g.t"] = state.opt_g.t;
  store.ints["adam_c.t"] = state.opt_c.t;
  store_params(store, "g", state.generator.params(), state.opt_g);
  store_params(store, "c", state.critic.params(), state.opt_c);
  store.save(path);
}

TrainState load_checkpoint(const std::string& path) {
  const TensorStore store = TensorStore::load(path);
  TrainState state;
  state.image_size = int(store.get_int("image_size"));
  state.gen_spec.in_channels = int(store.get_int("gen.in"));
  state.gen_spec.out_channels = int(store.get_int("gen.out"));
  state.gen_spec.base_width = int(store.get_int("gen.width"));
  state.gen_spec.depth = int(store.get_int("gen.depth"));
  state.critic_spec.in_channels = int(store.get_int("critic.in"));
  state.critic_spec.widths.clear();
  const int64_t stages = store.get_int("critic.stages");
  for (int64_t i = 0; i < stages; ++i) {
    state.critic_spec.widths.push_back(int(store.get_int("critic.w" + std::to_string(i))));
  }
  state.seed = uint64_t(store.get_int("seed"));
  state.generator = Generator(state.gen_spec, state.image_size, state.seed);
  state.critic = Critic(state.critic_spec, state.image_size, state.seed);
  load_params(store, "g", state.generator.params(), state.opt_g);
  load_params(store, "c", state.critic.params(), state.opt_c);
  state.opt_g.t = store.get_int("adam_g.t");
  state.opt_c.t = store.get_int("adam_c.t");
  state.generator_steps = store.get_int("generator_steps");
  state.critic_steps = store.get_int("critic_steps");
  state.epoch = store.get_int("epoch");
  state.gen_cursor = store.get_int("gen_cursor");
  state.critic_pass = store.get_int("critic_pass");
  state.critic_pos = store.get_int("critic_pos");
  state.fingerprint = store.fingerprint;
  const uint64_t expected =
      architecture_fingerprint(state.gen_spec, state.critic_spec, state.image_size);
  if (state.fingerprint != expected) {
    throw IntegrityError("checkpoint fingerprint does not match its stored architecture");
  }
  return state;
}

uint64_t params_hash(const std::vector<ad::Var>& params) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& p : params) {
    const auto* bytes = reinterpret_cast<const uint8_t*>(p->value.data());
    const int64_t n = p->value.numel() * int64_t(sizeof(float));
    for (int64_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

}  // namespace hazegan
