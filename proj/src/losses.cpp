#include "hazegan/losses.hpp"

#include <cmath>
#include <filesystem>

#include "hazegan/errors.hpp"
#include "hazegan/tensor_store.hpp"

namespace hazegan {

using ad::Var;

void LossWeights::validate() const {
  for (double v : {lambda1, lambda2, lambda3}) {
    if (!std::isfinite(v) || v < 0.0) {
      throw InvalidParameterError("loss weights must be finite and >= 0");
    }
  }
}

namespace {

// VGG-19 convolutional prefix; enough blocks to reach any conv4_x tap.
const std::vector<std::vector<int>>& vgg_blocks() {
  static const std::vector<std::vector<int>> blocks = {
      {64, 64}, {128, 128}, {256, 256, 256, 256}, {512, 512, 512, 512}};
  return blocks;
}

struct TapPoint {
  int block = 0;  // 0-based
  int conv = 0;   // 0-based within block
};

TapPoint parse_tap(const std::string& tap) {
  // Accepts "convB_I" with B in 1..4 and I within the block.
  TapPoint t;
  if (tap.size() == 7 && tap.rfind("conv", 0) == 0 && tap[5] == '_') {
    t.block = tap[4] - '1';
    t.conv = tap[6] - '1';
    const auto& blocks = vgg_blocks();
    if (t.block >= 0 && t.block < int(blocks.size()) && t.conv >= 0 &&
        t.conv < int(blocks[size_t(t.block)].size())) {
      return t;
    }
  }
  throw ConfigurationError("unknown feature tap '" + tap + "' (expected conv1_1 .. conv4_4)");
}

std::string conv_name(int block, int conv) {
  return "conv" + std::to_string(block + 1) + "_" + std::to_string(conv + 1);
}

void require_same_shape(const Var& a, const Var& b, const char* what) {
  if (!(a->value.shape() == b->value.shape())) {
    throw ShapeError(std::string(what) + ": shapes differ, " + a->value.shape().str() + " vs " +
                     b->value.shape().str());
  }
}

}  // namespace

FeatureExtractor FeatureExtractor::random_features(const std::string& tap, uint64_t seed) {
  const TapPoint tp = parse_tap(tap);
  FeatureExtractor fe;
  fe.tap_ = tap;
  Rng rng = Rng::derive(seed, "phi");
  int in_ch = 3;
  for (int b = 0; b <= tp.block; ++b) {
    const auto& block = vgg_blocks()[size_t(b)];
    const int last = b == tp.block ? tp.conv : int(block.size()) - 1;
    for (int i = 0; i <= last; ++i) {
      const int out_ch = block[size_t(i)];
      ConvDef def;
      def.pool_before = (b > 0 && i == 0);
      // He initialization keeps random feature magnitudes stable with depth.
      const double stddev = std::sqrt(2.0 / (double(in_ch) * 9.0));
      Tensor w(Shape(out_ch, in_ch, 3, 3));
      for (int64_t k = 0; k < w.numel(); ++k) w.data()[k] = float(rng.normal() * stddev);
      def.w = ad::constant(std::move(w));
      def.b = ad::constant(Tensor::zeros(Shape(1, out_ch, 1, 1)));
      fe.convs_.push_back(std::move(def));
      in_ch = out_ch;
    }
  }
  return fe;
}

FeatureExtractor FeatureExtractor::from_weights_file(const std::string& path,
                                                     const std::string& tap) {
  const TapPoint tp = parse_tap(tap);
  if (!std::filesystem::exists(path)) {
    throw ConfigurationError("feature weights file not found: " + path);
  }
  TensorStore store;
  try {
    store = TensorStore::load(path);
  } catch (const DataError& e) {
    throw ConfigurationError("cannot load feature weights: " + std::string(e.what()));
  }
  FeatureExtractor fe;
  fe.tap_ = tap;
  fe.pretrained_ = true;
  if (store.tensors.count("mean") && store.tensors.count("std")) {
    const Tensor& m = store.get_tensor("mean");
    const Tensor& s = store.get_tensor("std");
    for (int c = 0; c < 3; ++c) {
      fe.mean_[size_t(c)] = m.data()[c];
      fe.std_[size_t(c)] = s.data()[c];
    }
  }
  int in_ch = 3;
  for (int b = 0; b <= tp.block; ++b) {
    const auto& block = vgg_blocks()[size_t(b)];
    const int last = b == tp.block ? tp.conv : int(block.size()) - 1;
    for (int i = 0; i <= last; ++i) {
      const std::string name = conv_name(b, i);
      if (!store.tensors.count(name + "/w") || !store.tensors.count(name + "/b")) {
        throw ConfigurationError("feature weights file misses layer " + name);
      }
      const Tensor& w = store.get_tensor(name + "/w");
      const Tensor& bias = store.get_tensor(name + "/b");
      if (w.shape().c != in_ch || w.shape().n != block[size_t(i)] || w.shape().h != 3 ||
          w.shape().w != 3) {
        throw ConfigurationError("unexpected shape for " + name + ": " + w.shape().str());
      }
      ConvDef def;
      def.pool_before = (b > 0 && i == 0);
      def.w = ad::constant(w.clone());
      def.b = ad::constant(bias.clone());
      fe.convs_.push_back(std::move(def));
      in_ch = block[size_t(i)];
    }
  }
  return fe;
}

FeatureExtractor FeatureExtractor::configure(const std::string& weights_path,
                                             const std::string& tap, uint64_t fallback_seed,
                                             std::vector<std::string>* warnings) {
  if (weights_path.empty()) {
    if (warnings) {
      warnings->push_back(
          "no pretrained feature weights configured; using seeded random features of the same "
          "topology (tap " +
          tap + ")");
    }
    return random_features(tap, fallback_seed);
  }
  return from_weights_file(weights_path, tap);
}

Var FeatureExtractor::features(const Var& input) const {
  const Shape s = input->value.shape();
  if (s.c != 3) throw ShapeError("feature extractor expects 3-channel input, got " + s.str());
  // [-1,1] -> [0,1] -> channel normalization.
  Var x = ad::affine(input, 0.5f, 0.5f);
  Tensor mt(Shape(1, 3, 1, 1)), st(Shape(1, 3, 1, 1));
  for (int c = 0; c < 3; ++c) {
    mt.data()[c] = mean_[size_t(c)];
    st.data()[c] = 1.f / std_[size_t(c)];
  }
  x = ad::mul(ad::sub(x, ad::constant(mt)), ad::constant(st));
  for (const ConvDef& def : convs_) {
    if (def.pool_before) x = ad::maxpool2(x);
    x = ad::relu(ad::add(ad::conv2d(x, def.w, 1, 1), def.b));
  }
  return x;
}

Tensor FeatureExtractor::features(const Tensor& input) const {
  ad::NoGradGuard guard;
  return features(ad::constant(input))->value;
}

Var l1_loss(const Var& reference, const Var& candidate) {
  require_same_shape(reference, candidate, "l1_loss");
  return ad::mean_all(ad::abs(ad::sub(reference, candidate)));
}

double l1_loss(const Tensor& reference, const Tensor& candidate) {
  ad::NoGradGuard guard;
  return l1_loss(ad::constant(reference), ad::constant(candidate))->value.item();
}

Var vgg_loss(const FeatureExtractor& phi, const Var& reference, const Var& candidate) {
  require_same_shape(reference, candidate, "vgg_loss");
  Var fr = phi.features(reference);
  Var fc = phi.features(candidate);
  return ad::mean_all(ad::square(ad::sub(fr, fc)));
}

double vgg_loss(const FeatureExtractor& phi, const Tensor& reference, const Tensor& candidate) {
  ad::NoGradGuard guard;
  return vgg_loss(phi, ad::constant(reference), ad::constant(candidate))->value.item();
}

Tensor interpolate(const Tensor& reference, const Tensor& generated, double alpha) {
  return interpolate_per_sample(reference, generated,
                                std::vector<double>(size_t(reference.shape().n), alpha));
}

Tensor interpolate_per_sample(const Tensor& reference, const Tensor& generated,
                              const std::vector<double>& alphas) {
  if (!(reference.shape() == generated.shape())) {
    throw ShapeError("interpolate: shapes differ");
  }
  if (int(alphas.size()) != reference.shape().n) {
    throw InvalidParameterError("interpolate: one alpha per sample required");
  }
  for (double a : alphas) {
    if (!(a >= 0.0 && a <= 1.0)) throw InvalidParameterError("alpha must lie in [0,1]");
  }
  Tensor out(reference.shape());
  const int64_t per = reference.numel() / reference.shape().n;
  const float* r = reference.data();
  const float* g = generated.data();
  float* o = out.data();
  for (int n = 0; n < reference.shape().n; ++n) {
    const float a = float(alphas[size_t(n)]);
    const int64_t base = n * per;
    for (int64_t i = 0; i < per; ++i) {
      o[base + i] = a * r[base + i] + (1.f - a) * g[base + i];
    }
  }
  return out;
}

Var gradient_penalty(Scorer& critic, const Tensor& condition, const Tensor& reference,
                     const Tensor& generated, Rng& alpha_rng) {
  const int batch = condition.shape().n;
  if (batch < 1) throw InvalidParameterError("gradient_penalty: empty batch");
  std::vector<double> alphas(static_cast<size_t>(batch));
  for (double& a : alphas) a = alpha_rng.uniform();

  Var j_hat = ad::leaf(interpolate_per_sample(reference, generated, alphas), true);
  Var scores = critic.score(ad::constant(condition), j_hat);
  if (scores->value.shape().c != 1 || scores->value.shape().h != 1 ||
      scores->value.shape().w != 1) {
    throw Error("critic must emit one score per sample");
  }

  Var g;
  if (scores->requires_grad) {
    auto grads = ad::backward(ad::sum_all(scores), /*create_graph=*/true);
    auto it = grads.find(j_hat.get());
    if (it != grads.end()) g = it->second;
  }
  // A critic that ignores its candidate input has zero gradient, not an
  // error; the penalty is then (0-1)^2 per sample.
  if (!g) g = ad::constant(Tensor::zeros(j_hat->value.shape()));

  Var sq_norm = ad::sum_per_sample(ad::square(g));
  Var norm = ad::sqrt(ad::affine(sq_norm, 1.f, 1e-12f));
  Var penalty = ad::square(ad::affine(norm, 1.f, -1.f));
  return ad::mean_all(penalty);
}

double gradient_penalty_value(Scorer& critic, const Tensor& condition, const Tensor& reference,
                              const Tensor& generated, Rng& alpha_rng) {
  return gradient_penalty(critic, condition, reference, generated, alpha_rng)->value.item();
}

ad::Var critic_objective(Scorer& critic, GeneratorLike& generator, const Tensor& condition,
                         const Tensor& reference, const LossWeights& weights, Rng& alpha_rng,
                         CriticObjectiveParts* parts) {
  weights.validate();
  if (condition.shape().n < 1) throw InvalidParameterError("critic_objective: empty batch");
  Tensor generated;
  {
    ad::NoGradGuard guard;  // generator parameters receive no update from this value
    generated = generator.forward(ad::constant(condition))->value;
  }
  Var cond = ad::constant(condition);
  Var fake = ad::mean_all(critic.score(cond, ad::constant(generated)));
  Var real = ad::mean_all(critic.score(cond, ad::constant(reference)));
  Var objective = ad::sub(fake, real);
  double penalty_value = 0.0;
  if (weights.lambda3 != 0.0) {
    Var penalty = gradient_penalty(critic, condition, reference, generated, alpha_rng);
    penalty_value = penalty->value.item();
    objective = ad::add(objective, ad::affine(penalty, float(weights.lambda3), 0.f));
  }
  if (parts) {
    parts->real_score = real->value.item();
    parts->fake_score = fake->value.item();
    parts->penalty = penalty_value;
    parts->wasserstein = parts->real_score - parts->fake_score;
    parts->objective = objective->value.item();
  }
  return objective;
}

ad::Var generator_objective(Scorer& critic, GeneratorLike& generator, const Tensor& condition,
                            const Tensor& reference, const FeatureExtractor& phi,
                            const LossWeights& weights, GeneratorObjectiveParts* parts) {
  weights.validate();
  if (condition.shape().n < 1) throw InvalidParameterError("generator_objective: empty batch");
  Var cond = ad::constant(condition);
  Var generated = generator.forward(cond);
  Var ref = ad::constant(reference);
  Var adversarial = ad::mean_all(critic.score(cond, generated));

  Var pixel_terms;
  double vgg_value = 0.0, l1_value = 0.0;
  if (weights.lambda1 != 0.0) {
    Var v = vgg_loss(phi, ref, generated);
    vgg_value = v->value.item();
    pixel_terms = ad::affine(v, float(weights.lambda1), 0.f);
  }
  if (weights.lambda2 != 0.0) {
    Var l = l1_loss(ref, generated);
    l1_value = l->value.item();
    Var scaled = ad::affine(l, float(weights.lambda2), 0.f);
    pixel_terms = pixel_terms ? ad::add(pixel_terms, scaled) : scaled;
  }
  Var objective = pixel_terms ? ad::sub(pixel_terms, adversarial) : ad::neg(adversarial);
  if (parts) {
    parts->vgg = vgg_value;
    parts->l1 = l1_value;
    parts->adversarial = adversarial->value.item();
    parts->objective = objective->value.item();
  }
  return objective;
}

double wasserstein_estimate(Scorer& critic, GeneratorLike& generator, const Tensor& condition,
                            const Tensor& reference) {
  ad::NoGradGuard guard;
  Var cond = ad::constant(condition);
  Tensor generated = generator.forward(cond)->value;
  Var real = ad::mean_all(critic.score(cond, ad::constant(reference)));
  Var fake = ad::mean_all(critic.score(cond, ad::constant(generated)));
  // Same float subtraction the critic objective uses, so the two values are
  // exact negations of each other.
  return ad::sub(real, fake)->value.item();
}

}  // namespace hazegan
