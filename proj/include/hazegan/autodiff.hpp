#pragma once

#include <memory>
#include <unordered_map>
#include <vector>

#include "hazegan/tensor.hpp"

namespace hazegan::ad {

// Eager reverse-mode autodiff over a small set of tensor primitives.
// Backward passes are themselves expressed through the same primitives, so
// calling backward(create_graph=true) yields gradients that can be
// differentiated again. That property is what makes the gradient-penalty
// term trainable: its value depends on an input gradient of the critic, and
// its parameter gradient is a second derivative.

bool grad_enabled();

struct NoGradGuard {
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

enum class Op : uint8_t {
  kLeaf,
  kAdd,
  kSub,
  kMul,
  kReciprocal,
  kSqrt,
  kTanh,
  kAbs,
  kSign,
  kLRelu,
  kLReluMask,
  kAffine,    // a*x + b
  kConv,      // conv2d(x, w)
  kConvDx,    // input-gradient of conv2d; also the forward of a transposed conv
  kConvDw,    // weight-gradient of conv2d
  kConcatC,
  kSliceC,
  kPadC,
  kReduceSum,  // over any subset of dims, keeping size-1 dims
  kBroadcast,  // to a larger shape along size-1 dims
  kMaxPool2,   // 2x2 stride-2 max pool
  kMaxPoolScatter,
};

// Geometry of the underlying forward convolution. For kConvDx/kConvDw the
// x* fields describe the conv input that the gradient refers to.
struct ConvArgs {
  int stride = 1;
  int pad = 0;
  int kh = 0, kw = 0;
  int xc = 0, xh = 0, xw = 0;
};

struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
  Tensor value;
  Op op = Op::kLeaf;
  bool requires_grad = false;
  std::vector<Var> inputs;

  float a = 0.f;  // affine scale / lrelu slope
  float b = 0.f;  // affine shift
  ConvArgs conv;
  int c0 = 0, c1 = 0;                      // slice / pad bounds
  std::array<bool, 4> reduce{};            // reduced dims for kReduceSum
  Shape wide;                              // broadcast target / scatter shape
  std::shared_ptr<std::vector<int>> pool_idx;  // argmax for kMaxPool2
};

Var leaf(Tensor v, bool requires_grad = false);
Var constant(Tensor v);
Var constant_scalar(float v);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var reciprocal(const Var& x);
Var sqrt(const Var& x);
Var tanh(const Var& x);
Var abs(const Var& x);
Var sign(const Var& x);
Var lrelu(const Var& x, float slope);
Var relu(const Var& x);
Var lrelu_mask(const Var& x, float slope);
Var affine(const Var& x, float scale, float shift);
Var neg(const Var& x);
Var square(const Var& x);

Var conv2d(const Var& x, const Var& w, int stride, int pad);
Var conv2d_dx(const Var& g, const Var& w, const ConvArgs& args);
Var conv2d_dw(const Var& g, const Var& x, const ConvArgs& args);
// Transposed convolution with the given output spatial size; implemented as
// the input-gradient of the mirrored forward conv.
Var conv_transpose2d(const Var& x, const Var& w, int stride, int pad, int out_h, int out_w);

Var concat_c(const Var& a, const Var& b);
Var slice_c(const Var& x, int c0, int c1);
Var pad_c(const Var& x, int before, int after);

Var reduce_sum(const Var& x, bool over_n, bool over_c, bool over_h, bool over_w);
Var broadcast_to(const Var& x, Shape s);
Var maxpool2(const Var& x);

Var sum_all(const Var& x);
Var mean_all(const Var& x);
Var mean_hw(const Var& x);
Var mean_per_sample(const Var& x);        // (N,C,H,W) -> (N,1,1,1)
Var sum_per_sample(const Var& x);
Var instance_norm(const Var& x, float eps = 1e-5f);

// Gradients of `root` (a scalar) with respect to every reachable node that
// requires grad. With create_graph the returned gradients carry history and
// can be differentiated again.
std::unordered_map<Node*, Var> backward(const Var& root, bool create_graph = false);

}  // namespace hazegan::ad
