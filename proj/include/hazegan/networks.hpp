#pragma once

#include <string>
#include <vector>

#include "hazegan/autodiff.hpp"
#include "hazegan/rng.hpp"

namespace hazegan {

// Anything that maps a conditioned batch to per-sample scores (N,1,1,1).
// Test doubles (constant or linear scorers) implement this next to the real
// critic.
struct Scorer {
  virtual ~Scorer() = default;
  virtual ad::Var score(const ad::Var& condition, const ad::Var& candidate) = 0;
};

struct GeneratorLike {
  virtual ~GeneratorLike() = default;
  virtual ad::Var forward(const ad::Var& input) = 0;
};

struct GeneratorSpec {
  int in_channels = 3;
  int out_channels = 3;
  int base_width = 64;
  int depth = 8;  // down/up stage pairs

  void validate() const;
};

struct CriticSpec {
  int in_channels = 6;  // condition and candidate concatenated
  std::vector<int> widths = {64, 128, 256, 512};

  void validate() const;
};

struct LayerInfo {
  std::string kind;  // "conv", "conv_transpose", "instance_norm", ...
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 0;
  int stride = 0;
  bool batch_coupled = false;  // true only for cross-sample layers (none here)
};

namespace detail {
struct ConvLayer {
  ad::Var w;
  ad::Var b;
  int kernel = 4;
  int stride = 2;
  int pad = 1;
  int in_h = 0, in_w = 0;    // planned input spatial size
  int out_h = 0, out_w = 0;  // planned output spatial size
};
}  // namespace detail

// U-Net generator following the pix2pix layer table: stride-2 convs down,
// stride-2 transposed convs up, skip concatenation, leaky/plain activations,
// tanh head, no normalization layers. Spatial sizes clamp at 1x1 when depth
// exceeds log2(image_size); image_size must be a power of two.
class Generator : public GeneratorLike {
 public:
  Generator() = default;
  Generator(const GeneratorSpec& spec, int image_size, uint64_t seed);

  ad::Var forward(const ad::Var& input) override;
  Tensor forward(const Tensor& input);  // convenience, no-grad

  const GeneratorSpec& spec() const { return spec_; }
  int image_size() const { return image_size_; }
  int64_t param_count() const;
  std::vector<ad::Var> params() const;
  std::vector<std::string> param_names() const;
  std::vector<LayerInfo> layers() const;

 private:
  GeneratorSpec spec_;
  int image_size_ = 0;
  std::vector<detail::ConvLayer> enc_;
  std::vector<detail::ConvLayer> dec_;  // dec_[i] mirrors enc_[i]
};

// Convolutional critic over the 6-channel concatenation of condition and
// candidate. Instance normalization after every stage but the first keeps
// samples independent; the patch score map is reduced to one scalar per
// sample by mean.
class Critic : public Scorer {
 public:
  Critic() = default;
  Critic(const CriticSpec& spec, int image_size, uint64_t seed);

  ad::Var score(const ad::Var& condition, const ad::Var& candidate) override;
  ad::Var score_input(const ad::Var& stacked);  // pre-concatenated 6-channel input
  double score(const Tensor& condition, const Tensor& candidate);  // no-grad scalar mean

  const CriticSpec& spec() const { return spec_; }
  int image_size() const { return image_size_; }
  int64_t param_count() const;
  std::vector<ad::Var> params() const;
  std::vector<std::string> param_names() const;
  std::vector<LayerInfo> layers() const;

 private:
  CriticSpec spec_;
  int image_size_ = 0;
  std::vector<detail::ConvLayer> stages_;
  std::vector<bool> normalized_;
  detail::ConvLayer head_;
};

// Stable hash of every architecture choice that must match between a
// checkpoint and a config (widths, depths, channels, image size, norms).
uint64_t architecture_fingerprint(const GeneratorSpec& gen, const CriticSpec& critic,
                                  int image_size);

}  // namespace hazegan
