#include "hazegan/networks.hpp"

#include <algorithm>
#include <sstream>

#include "hazegan/errors.hpp"

namespace hazegan {

using ad::Var;

namespace {

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

Tensor gaussian_init(Shape s, Rng& rng, double stddev) {
  Tensor t(s);
  float* d = t.data();
  for (int64_t i = 0; i < t.numel(); ++i) d[i] = float(rng.normal() * stddev);
  return t;
}

detail::ConvLayer make_conv(int in_ch, int out_ch, int kernel, int stride, int pad, Rng& rng,
                            double init_std = 0.02) {
  detail::ConvLayer layer;
  layer.kernel = kernel;
  layer.stride = stride;
  layer.pad = pad;
  layer.w = ad::leaf(gaussian_init(Shape(out_ch, in_ch, kernel, kernel), rng, init_std), true);
  layer.b = ad::leaf(Tensor::zeros(Shape(1, out_ch, 1, 1)), true);
  return layer;
}

Var apply_conv(const detail::ConvLayer& layer, const Var& x) {
  return ad::add(ad::conv2d(x, layer.w, layer.stride, layer.pad), layer.b);
}

Var apply_conv_transpose(const detail::ConvLayer& layer, const Var& x) {
  return ad::add(
      ad::conv_transpose2d(x, layer.w, layer.stride, layer.pad, layer.out_h, layer.out_w),
      layer.b);
}

// Shrinking stage geometry; spatial size clamps at 1x1 once reached.
void plan_down(int in_size, int& kernel, int& stride, int& pad, int& out_size) {
  if (in_size >= 2) {
    kernel = 4;
    stride = 2;
    pad = 1;
    out_size = in_size / 2;
  } else {
    kernel = 1;
    stride = 1;
    pad = 0;
    out_size = 1;
  }
}

}  // namespace

void GeneratorSpec::validate() const {
  if (in_channels < 1 || out_channels < 1) {
    throw InvalidParameterError("generator channel counts must be positive");
  }
  if (base_width < 1) throw InvalidParameterError("base_width must be >= 1");
  if (depth < 1) throw InvalidParameterError("generator depth must be >= 1");
}

void CriticSpec::validate() const {
  if (in_channels < 2) throw InvalidParameterError("critic input must stack two images");
  if (widths.empty()) throw InvalidParameterError("critic needs at least one stage");
  for (int w : widths) {
    if (w < 1) throw InvalidParameterError("critic stage widths must be positive");
  }
}

Generator::Generator(const GeneratorSpec& spec, int image_size, uint64_t seed)
    : spec_(spec), image_size_(image_size) {
  spec.validate();
  if (!is_power_of_two(image_size) || image_size < 2) {
    throw InvalidParameterError("generator image size must be a power of two >= 2");
  }

  std::vector<int> widths(size_t(spec.depth));
  for (int i = 0; i < spec.depth; ++i) {
    widths[size_t(i)] = std::min(spec.base_width << i, spec.base_width * 8);
  }

  Rng rng = Rng::derive(seed, "generator");
  int size = image_size;
  for (int i = 0; i < spec.depth; ++i) {
    int k, s, p, out_size;
    plan_down(size, k, s, p, out_size);
    const int in_ch = i == 0 ? spec.in_channels : widths[size_t(i) - 1];
    detail::ConvLayer layer = make_conv(in_ch, widths[size_t(i)], k, s, p, rng);
    layer.in_h = layer.in_w = size;
    layer.out_h = layer.out_w = out_size;
    enc_.push_back(std::move(layer));
    size = out_size;
  }
  dec_.resize(size_t(spec.depth));
  for (int i = spec.depth - 1; i >= 0; --i) {
    const auto& mirror = enc_[size_t(i)];
    const int in_ch = i == spec.depth - 1 ? widths[size_t(i)] : 2 * widths[size_t(i)];
    const int out_ch = i == 0 ? spec.out_channels : widths[size_t(i) - 1];
    // Transposed conv weights are stored as the mirrored forward conv's
    // weights: (in_ch_of_this_stage, out_ch, k, k).
    detail::ConvLayer layer;
    layer.kernel = mirror.kernel;
    layer.stride = mirror.stride;
    layer.pad = mirror.pad;
    layer.in_h = layer.in_w = mirror.out_h;
    layer.out_h = layer.out_w = mirror.in_h;
    layer.w = ad::leaf(gaussian_init(Shape(in_ch, out_ch, mirror.kernel, mirror.kernel), rng, 0.02),
                       true);
    layer.b = ad::leaf(Tensor::zeros(Shape(1, out_ch, 1, 1)), true);
    dec_[size_t(i)] = std::move(layer);
  }
}

Var Generator::forward(const Var& input) {
  const Shape s = input->value.shape();
  if (s.c != spec_.in_channels || s.h != image_size_ || s.w != image_size_) {
    throw ShapeError("generator expects (N," + std::to_string(spec_.in_channels) + "," +
                     std::to_string(image_size_) + "," + std::to_string(image_size_) +
                     "), got " + s.str());
  }
  std::vector<Var> acts;
  Var h = input;
  for (size_t i = 0; i < enc_.size(); ++i) {
    if (i > 0) h = ad::lrelu(h, 0.2f);
    h = apply_conv(enc_[i], h);
    acts.push_back(h);
  }
  for (int i = int(dec_.size()) - 1; i >= 0; --i) {
    h = ad::relu(h);
    h = apply_conv_transpose(dec_[size_t(i)], h);
    if (i > 0) h = ad::concat_c(acts[size_t(i) - 1], h);
  }
  return ad::tanh(h);
}

Tensor Generator::forward(const Tensor& input) {
  ad::NoGradGuard guard;
  return forward(ad::constant(input))->value;
}

int64_t Generator::param_count() const {
  int64_t n = 0;
  for (const auto& l : enc_) n += l.w->value.numel() + l.b->value.numel();
  for (const auto& l : dec_) n += l.w->value.numel() + l.b->value.numel();
  return n;
}

std::vector<Var> Generator::params() const {
  std::vector<Var> out;
  for (const auto& l : enc_) {
    out.push_back(l.w);
    out.push_back(l.b);
  }
  for (const auto& l : dec_) {
    out.push_back(l.w);
    out.push_back(l.b);
  }
  return out;
}

std::vector<std::string> Generator::param_names() const {
  std::vector<std::string> names;
  for (size_t i = 0; i < enc_.size(); ++i) {
    names.push_back("enc" + std::to_string(i) + ".w");
    names.push_back("enc" + std::to_string(i) + ".b");
  }
  for (size_t i = 0; i < dec_.size(); ++i) {
    names.push_back("dec" + std::to_string(i) + ".w");
    names.push_back("dec" + std::to_string(i) + ".b");
  }
  return names;
}

std::vector<LayerInfo> Generator::layers() const {
  std::vector<LayerInfo> out;
  for (const auto& l : enc_) {
    out.push_back({"conv", l.w->value.shape().c, l.w->value.shape().n, l.kernel, l.stride, false});
  }
  for (auto it = dec_.rbegin(); it != dec_.rend(); ++it) {
    out.push_back({"conv_transpose", it->w->value.shape().n, it->w->value.shape().c, it->kernel,
                   it->stride, false});
  }
  return out;
}

Critic::Critic(const CriticSpec& spec, int image_size, uint64_t seed)
    : spec_(spec), image_size_(image_size) {
  spec.validate();
  if (image_size < 2) throw InvalidParameterError("critic image size must be >= 2");

  Rng rng = Rng::derive(seed, "critic");
  int size = image_size;
  const int n_stages = int(spec.widths.size());
  for (int i = 0; i < n_stages; ++i) {
    const int want_stride = i < n_stages - 1 ? 2 : 1;
    int k, s, p;
    if (size >= 4) {
      k = 4;
      s = want_stride;
      p = 1;
    } else {
      k = size;
      s = 1;
      p = 0;
    }
    const int out_size = (size + 2 * p - k) / s + 1;
    const int in_ch = i == 0 ? spec.in_channels : spec.widths[size_t(i) - 1];
    detail::ConvLayer layer = make_conv(in_ch, spec.widths[size_t(i)], k, s, p, rng);
    layer.in_h = layer.in_w = size;
    layer.out_h = layer.out_w = out_size;
    stages_.push_back(std::move(layer));
    normalized_.push_back(i > 0);
    size = out_size;
  }
  {
    int k, s, p;
    if (size >= 4) {
      k = 4;
      s = 1;
      p = 1;
    } else {
      k = size;
      s = 1;
      p = 0;
    }
    head_ = make_conv(spec.widths.back(), 1, k, s, p, rng);
    head_.in_h = head_.in_w = size;
    head_.out_h = head_.out_w = (size + 2 * p - k) / s + 1;
  }
}

Var Critic::score_input(const Var& stacked) {
  const Shape s = stacked->value.shape();
  if (s.c != spec_.in_channels || s.h != image_size_ || s.w != image_size_) {
    throw ShapeError("critic expects (N," + std::to_string(spec_.in_channels) + "," +
                     std::to_string(image_size_) + "," + std::to_string(image_size_) +
                     "), got " + s.str());
  }
  Var h = stacked;
  for (size_t i = 0; i < stages_.size(); ++i) {
    h = apply_conv(stages_[i], h);
    if (normalized_[i]) h = ad::instance_norm(h);
    h = ad::lrelu(h, 0.2f);
  }
  h = apply_conv(head_, h);
  // Patch scores to one unbounded scalar per sample; mean keeps the score
  // linear in the patch map.
  return ad::mean_per_sample(h);
}

Var Critic::score(const Var& condition, const Var& candidate) {
  if (!(condition->value.shape() == candidate->value.shape())) {
    throw ShapeError("critic condition/candidate shapes differ");
  }
  return score_input(ad::concat_c(condition, candidate));
}

double Critic::score(const Tensor& condition, const Tensor& candidate) {
  ad::NoGradGuard guard;
  Var s = score(ad::constant(condition), ad::constant(candidate));
  return ad::mean_all(s)->value.item();
}

int64_t Critic::param_count() const {
  int64_t n = 0;
  for (const auto& l : stages_) n += l.w->value.numel() + l.b->value.numel();
  n += head_.w->value.numel() + head_.b->value.numel();
  return n;
}

std::vector<Var> Critic::params() const {
  std::vector<Var> out;
  for (const auto& l : stages_) {
    out.push_back(l.w);
    out.push_back(l.b);
  }
  out.push_back(head_.w);
  out.push_back(head_.b);
  return out;
}

std::vector<std::string> Critic::param_names() const {
  std::vector<std::string> names;
  for (size_t i = 0; i < stages_.size(); ++i) {
    names.push_back("s" + std::to_string(i) + ".w");
    names.push_back("s" + std::to_string(i) + ".b");
  }
  names.push_back("head.w");
  names.push_back("head.b");
  return names;
}

std::vector<LayerInfo> Critic::layers() const {
  std::vector<LayerInfo> out;
  for (size_t i = 0; i < stages_.size(); ++i) {
    const auto& l = stages_[i];
    out.push_back({"conv", l.w->value.shape().c, l.w->value.shape().n, l.kernel, l.stride, false});
    if (normalized_[i]) {
      out.push_back({"instance_norm", l.w->value.shape().n, l.w->value.shape().n, 0, 0, false});
    }
  }
  out.push_back(
      {"conv", head_.w->value.shape().c, head_.w->value.shape().n, head_.kernel, head_.stride,
       false});
  out.push_back({"mean_reduce", 1, 1, 0, 0, false});
  return out;
}

uint64_t architecture_fingerprint(const GeneratorSpec& gen, const CriticSpec& critic,
                                  int image_size) {
  std::ostringstream os;
  os << "gen[in" << gen.in_channels << ",out" << gen.out_channels << ",w" << gen.base_width
     << ",d" << gen.depth << ",norm:none]|critic[in" << critic.in_channels << ",w";
  for (size_t i = 0; i < critic.widths.size(); ++i) {
    os << (i ? "-" : "") << critic.widths[i];
  }
  os << ",norm:instance]|img" << image_size;
  const std::string s = os.str();
  uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= uint8_t(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace hazegan
