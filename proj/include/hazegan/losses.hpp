#pragma once

#include <array>
#include <string>
#include <vector>

#include "hazegan/autodiff.hpp"
#include "hazegan/networks.hpp"
#include "hazegan/rng.hpp"

namespace hazegan {

struct LossWeights {
  double lambda1 = 10.0;   // perceptual feature loss
  double lambda2 = 100.0;  // L1 pixel loss
  double lambda3 = 10.0;   // gradient penalty

  void validate() const;
};

// Frozen convolutional feature map phi. Topology is the VGG-19 conv prefix up
// to a named tap point ("conv4_3" reproduces the eleventh conv activation).
// Weights come from a tensor-store file; without one, a seeded random
// extractor of the same topology keeps everything runnable.
class FeatureExtractor {
 public:
  static FeatureExtractor random_features(const std::string& tap, uint64_t seed);
  static FeatureExtractor from_weights_file(const std::string& path, const std::string& tap);
  // Dispatches on whether a weights path is configured; appends a warning
  // when falling back to random features.
  static FeatureExtractor configure(const std::string& weights_path, const std::string& tap,
                                    uint64_t fallback_seed,
                                    std::vector<std::string>* warnings = nullptr);

  // Input in [-1,1], shape (N,3,H,W); returns the tapped activation.
  ad::Var features(const ad::Var& input) const;
  Tensor features(const Tensor& input) const;

  const std::string& tap() const { return tap_; }
  bool pretrained() const { return pretrained_; }

 private:
  struct ConvDef {
    ad::Var w;
    ad::Var b;
    bool pool_before = false;
  };
  std::vector<ConvDef> convs_;
  std::array<float, 3> mean_{0.5f, 0.5f, 0.5f};
  std::array<float, 3> std_{0.5f, 0.5f, 0.5f};
  std::string tap_;
  bool pretrained_ = false;
};

// Mean absolute elementwise difference.
ad::Var l1_loss(const ad::Var& reference, const ad::Var& candidate);
double l1_loss(const Tensor& reference, const Tensor& candidate);

// Mean squared difference between tapped feature maps.
ad::Var vgg_loss(const FeatureExtractor& phi, const ad::Var& reference, const ad::Var& candidate);
double vgg_loss(const FeatureExtractor& phi, const Tensor& reference, const Tensor& candidate);

// j_hat = alpha*reference + (1-alpha)*generated, elementwise.
Tensor interpolate(const Tensor& reference, const Tensor& generated, double alpha);
// Per-sample alphas along the batch dimension.
Tensor interpolate_per_sample(const Tensor& reference, const Tensor& generated,
                              const std::vector<double>& alphas);

// Mean over the batch of (||grad_{j_hat} D(I, j_hat)||_2 - 1)^2 with one
// uniform alpha per sample. The condition is not interpolated and receives no
// penalty. Returned with graph history so it can drive critic updates.
ad::Var gradient_penalty(Scorer& critic, const Tensor& condition, const Tensor& reference,
                         const Tensor& generated, Rng& alpha_rng);
double gradient_penalty_value(Scorer& critic, const Tensor& condition, const Tensor& reference,
                              const Tensor& generated, Rng& alpha_rng);

struct CriticObjectiveParts {
  double real_score = 0.0;
  double fake_score = 0.0;
  double penalty = 0.0;
  double wasserstein = 0.0;
  double objective = 0.0;
};

// mean D(I,G(I)) - mean D(I,J) + lambda3 * penalty; the value the critic
// minimizes. Generator parameters receive no gradient (its forward runs
// detached).
ad::Var critic_objective(Scorer& critic, GeneratorLike& generator, const Tensor& condition,
                         const Tensor& reference, const LossWeights& weights, Rng& alpha_rng,
                         CriticObjectiveParts* parts = nullptr);

struct GeneratorObjectiveParts {
  double vgg = 0.0;
  double l1 = 0.0;
  double adversarial = 0.0;  // mean D(I, G(I))
  double objective = 0.0;
};

// lambda1*vgg + lambda2*l1 - mean D(I,G(I)); the value the generator
// minimizes. Critic parameters appear in the graph but the trainer never
// steps them from this objective.
ad::Var generator_objective(Scorer& critic, GeneratorLike& generator, const Tensor& condition,
                            const Tensor& reference, const FeatureExtractor& phi,
                            const LossWeights& weights,
                            GeneratorObjectiveParts* parts = nullptr);

// mean D(I,J) - mean D(I,G(I)): the training-progress signal.
double wasserstein_estimate(Scorer& critic, GeneratorLike& generator, const Tensor& condition,
                            const Tensor& reference);

}  // namespace hazegan
