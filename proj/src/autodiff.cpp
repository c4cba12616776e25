#include "hazegan/autodiff.hpp"

#include <cmath>
#include <optional>
#include <unordered_set>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "hazegan/conv_kernels.hpp"
#include "hazegan/errors.hpp"

namespace hazegan::ad {

namespace {

thread_local bool g_grad_enabled = true;

Var make(Tensor v, Op op, std::vector<Var> inputs) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  n->op = op;
  bool rg = false;
  if (g_grad_enabled) {
    for (const auto& in : inputs) rg = rg || (in && in->requires_grad);
  }
  n->requires_grad = rg;
  // History is only retained when a gradient can flow; otherwise the graph
  // behind this node is released immediately.
  if (rg) n->inputs = std::move(inputs);
  return n;
}

Shape broadcast_shape(const Shape& a, const Shape& b) {
  Shape out;
  int* od[4] = {&out.n, &out.c, &out.h, &out.w};
  for (int i = 0; i < 4; ++i) {
    const int da = a.dim(i), db = b.dim(i);
    if (da == db) {
      *od[i] = da;
    } else if (da == 1 || db == 1) {
      *od[i] = da > db ? da : db;
    } else {
      throw ShapeError("cannot broadcast " + a.str() + " with " + b.str());
    }
  }
  return out;
}

void strides_for(const Shape& s, const Shape& out, int64_t st[4]) {
  int64_t acc = 1;
  const int dims[4] = {s.n, s.c, s.h, s.w};
  int64_t natural[4];
  for (int i = 3; i >= 0; --i) {
    natural[i] = acc;
    acc *= dims[i];
  }
  const int odims[4] = {out.n, out.c, out.h, out.w};
  for (int i = 0; i < 4; ++i) st[i] = (dims[i] == odims[i]) ? natural[i] : 0;
}

constexpr int64_t kParallelCutoff = 1 << 15;

template <class F>
Tensor elementwise(const Tensor& a, const Tensor& b, F f) {
  const Shape out = broadcast_shape(a.shape(), b.shape());
  Tensor r = Tensor::uninitialized(out);
  const float* ad = a.data();
  const float* bd = b.data();
  float* rd = r.data();
  if (a.shape() == out && b.shape() == out) {
    const int64_t n = out.numel();
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (n >= kParallelCutoff)
#endif
    for (int64_t i = 0; i < n; ++i) rd[i] = f(ad[i], bd[i]);
    return r;
  }
  int64_t sa[4], sb[4];
  strides_for(a.shape(), out, sa);
  strides_for(b.shape(), out, sb);
  const int64_t hw = int64_t(out.h) * out.w;
#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(static)     if (out.numel() >= kParallelCutoff && out.n * out.c > 1)
#endif
  for (int n = 0; n < out.n; ++n) {
    for (int c = 0; c < out.c; ++c) {
      const float* ap = ad + n * sa[0] + c * sa[1];
      const float* bp = bd + n * sb[0] + c * sb[1];
      int64_t o = (int64_t(n) * out.c + c) * hw;
      for (int h = 0; h < out.h; ++h) {
        const float* ah = ap + h * sa[2];
        const float* bh = bp + h * sb[2];
        for (int w = 0; w < out.w; ++w, ++o) rd[o] = f(ah[w * sa[3]], bh[w * sb[3]]);
      }
    }
  }
  return r;
}

template <class F>
Tensor unary(const Tensor& x, F f) {
  Tensor r = Tensor::uninitialized(x.shape());
  const float* xd = x.data();
  float* rd = r.data();
  const int64_t n = x.numel();
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (n >= kParallelCutoff)
#endif
  for (int64_t i = 0; i < n; ++i) rd[i] = f(xd[i]);
  return r;
}

Var reduce_to(const Var& g, const Shape& s) {
  if (g->value.shape() == s) return g;
  const Shape& gs = g->value.shape();
  return reduce_sum(g, s.n == 1 && gs.n > 1, s.c == 1 && gs.c > 1, s.h == 1 && gs.h > 1,
                    s.w == 1 && gs.w > 1);
}

ConvArgs conv_args_from(const Tensor& x, const Tensor& w, int stride, int pad) {
  ConvArgs a;
  a.stride = stride;
  a.pad = pad;
  a.kh = w.shape().h;
  a.kw = w.shape().w;
  a.xc = x.shape().c;
  a.xh = x.shape().h;
  a.xw = x.shape().w;
  return a;
}

}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

Var leaf(Tensor v, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  n->op = Op::kLeaf;
  n->requires_grad = requires_grad;
  return n;
}

Var constant(Tensor v) { return leaf(std::move(v), false); }
Var constant_scalar(float v) { return constant(Tensor::scalar(v)); }

Var add(const Var& a, const Var& b) {
  return make(elementwise(a->value, b->value, [](float x, float y) { return x + y; }), Op::kAdd,
              {a, b});
}

Var sub(const Var& a, const Var& b) {
  return make(elementwise(a->value, b->value, [](float x, float y) { return x - y; }), Op::kSub,
              {a, b});
}

Var mul(const Var& a, const Var& b) {
  return make(elementwise(a->value, b->value, [](float x, float y) { return x * y; }), Op::kMul,
              {a, b});
}

Var reciprocal(const Var& x) {
  return make(unary(x->value, [](float v) { return 1.f / v; }), Op::kReciprocal, {x});
}

Var sqrt(const Var& x) {
  return make(unary(x->value, [](float v) { return std::sqrt(v); }), Op::kSqrt, {x});
}

Var tanh(const Var& x) {
  return make(unary(x->value, [](float v) { return std::tanh(v); }), Op::kTanh, {x});
}

Var abs(const Var& x) {
  return make(unary(x->value, [](float v) { return std::fabs(v); }), Op::kAbs, {x});
}

Var sign(const Var& x) {
  return make(unary(x->value, [](float v) { return v > 0.f ? 1.f : v < 0.f ? -1.f : 0.f; }),
              Op::kSign, {x});
}

Var lrelu(const Var& x, float slope) {
  auto n = make(unary(x->value, [slope](float v) { return v > 0.f ? v : slope * v; }),
                Op::kLRelu, {x});
  n->a = slope;
  return n;
}

Var relu(const Var& x) { return lrelu(x, 0.f); }

Var lrelu_mask(const Var& x, float slope) {
  auto n = make(unary(x->value, [slope](float v) { return v > 0.f ? 1.f : slope; }),
                Op::kLReluMask, {x});
  n->a = slope;
  return n;
}

Var affine(const Var& x, float scale, float shift) {
  auto n = make(unary(x->value, [scale, shift](float v) { return scale * v + shift; }),
                Op::kAffine, {x});
  n->a = scale;
  n->b = shift;
  return n;
}

Var neg(const Var& x) { return affine(x, -1.f, 0.f); }
Var square(const Var& x) { return mul(x, x); }

Var conv2d(const Var& x, const Var& w, int stride, int pad) {
  auto n = make(kernels::conv2d(x->value, w->value, stride, pad), Op::kConv, {x, w});
  n->conv = conv_args_from(x->value, w->value, stride, pad);
  return n;
}

Var conv2d_dx(const Var& g, const Var& w, const ConvArgs& args) {
  auto n = make(kernels::conv2d_dx(g->value, w->value, args), Op::kConvDx, {g, w});
  n->conv = args;
  return n;
}

Var conv2d_dw(const Var& g, const Var& x, const ConvArgs& args) {
  auto n = make(kernels::conv2d_dw(g->value, x->value, args), Op::kConvDw, {g, x});
  n->conv = args;
  return n;
}

Var conv_transpose2d(const Var& x, const Var& w, int stride, int pad, int out_h, int out_w) {
  const Shape ws = w->value.shape();
  if (x->value.shape().c != ws.n) {
    throw ShapeError("conv_transpose2d channel mismatch: input " + x->value.shape().str() +
                     " weight " + ws.str());
  }
  if (kernels::conv_out_size(out_h, ws.h, stride, pad) != x->value.shape().h ||
      kernels::conv_out_size(out_w, ws.w, stride, pad) != x->value.shape().w) {
    throw ShapeError("conv_transpose2d target size inconsistent with input");
  }
  ConvArgs a;
  a.stride = stride;
  a.pad = pad;
  a.kh = ws.h;
  a.kw = ws.w;
  a.xc = ws.c;
  a.xh = out_h;
  a.xw = out_w;
  return conv2d_dx(x, w, a);
}

Var concat_c(const Var& a, const Var& b) {
  const Shape as = a->value.shape(), bs = b->value.shape();
  if (as.n != bs.n || as.h != bs.h || as.w != bs.w) {
    throw ShapeError("concat_c shape mismatch: " + as.str() + " vs " + bs.str());
  }
  Tensor out = Tensor::uninitialized(Shape(as.n, as.c + bs.c, as.h, as.w));
  const int64_t hw = int64_t(as.h) * as.w;
  for (int n = 0; n < as.n; ++n) {
    std::copy_n(a->value.data() + int64_t(n) * as.c * hw, as.c * hw,
                out.data() + int64_t(n) * (as.c + bs.c) * hw);
    std::copy_n(b->value.data() + int64_t(n) * bs.c * hw, bs.c * hw,
                out.data() + (int64_t(n) * (as.c + bs.c) + as.c) * hw);
  }
  return make(std::move(out), Op::kConcatC, {a, b});
}

Var slice_c(const Var& x, int c0, int c1) {
  const Shape s = x->value.shape();
  if (c0 < 0 || c1 > s.c || c0 >= c1) throw ShapeError("slice_c bounds out of range");
  Tensor out = Tensor::uninitialized(Shape(s.n, c1 - c0, s.h, s.w));
  const int64_t hw = int64_t(s.h) * s.w;
  for (int n = 0; n < s.n; ++n) {
    std::copy_n(x->value.data() + (int64_t(n) * s.c + c0) * hw, int64_t(c1 - c0) * hw,
                out.data() + int64_t(n) * (c1 - c0) * hw);
  }
  auto v = make(std::move(out), Op::kSliceC, {x});
  v->c0 = c0;
  v->c1 = c1;
  return v;
}

Var pad_c(const Var& x, int before, int after) {
  const Shape s = x->value.shape();
  Tensor out(Shape(s.n, before + s.c + after, s.h, s.w));
  const int64_t hw = int64_t(s.h) * s.w;
  for (int n = 0; n < s.n; ++n) {
    std::copy_n(x->value.data() + int64_t(n) * s.c * hw, int64_t(s.c) * hw,
                out.data() + (int64_t(n) * (before + s.c + after) + before) * hw);
  }
  auto v = make(std::move(out), Op::kPadC, {x});
  v->c0 = before;
  v->c1 = after;
  return v;
}

Var reduce_sum(const Var& x, bool over_n, bool over_c, bool over_h, bool over_w) {
  const Shape s = x->value.shape();
  Shape os(over_n ? 1 : s.n, over_c ? 1 : s.c, over_h ? 1 : s.h, over_w ? 1 : s.w);
  std::vector<double> acc(size_t(os.numel()), 0.0);
  int64_t ost[4];
  strides_for(os, s, ost);  // stride 0 along reduced dims
  const float* xd = x->value.data();
  int64_t i = 0;
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      double* ap = acc.data() + n * ost[0] + c * ost[1];
      for (int h = 0; h < s.h; ++h) {
        double* ah = ap + h * ost[2];
        for (int w = 0; w < s.w; ++w, ++i) ah[w * ost[3]] += xd[i];
      }
    }
  }
  Tensor out = Tensor::uninitialized(os);
  float* od = out.data();
  for (size_t k = 0; k < acc.size(); ++k) od[k] = float(acc[k]);
  auto v = make(std::move(out), Op::kReduceSum, {x});
  v->reduce = {over_n, over_c, over_h, over_w};
  v->wide = s;
  return v;
}

Var broadcast_to(const Var& x, Shape target) {
  const Shape s = x->value.shape();
  Tensor out = Tensor::uninitialized(target);
  int64_t st[4];
  strides_for(s, target, st);
  const float* xd = x->value.data();
  float* od = out.data();
  const int64_t hw = int64_t(target.h) * target.w;
#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(static)     if (target.numel() >= kParallelCutoff && target.n * target.c > 1)
#endif
  for (int n = 0; n < target.n; ++n) {
    for (int c = 0; c < target.c; ++c) {
      const float* xp = xd + n * st[0] + c * st[1];
      int64_t o = (int64_t(n) * target.c + c) * hw;
      for (int h = 0; h < target.h; ++h) {
        const float* xh = xp + h * st[2];
        for (int w = 0; w < target.w; ++w, ++o) od[o] = xh[w * st[3]];
      }
    }
  }
  auto v = make(std::move(out), Op::kBroadcast, {x});
  v->wide = target;
  return v;
}

Var maxpool2(const Var& x) {
  auto idx = std::make_shared<std::vector<int>>();
  Tensor y = kernels::maxpool2_fwd(x->value, *idx);
  auto v = make(std::move(y), Op::kMaxPool2, {x});
  v->pool_idx = idx;
  v->wide = x->value.shape();
  return v;
}

Var sum_all(const Var& x) { return reduce_sum(x, true, true, true, true); }

Var mean_all(const Var& x) {
  return affine(sum_all(x), 1.f / float(x->value.numel()), 0.f);
}

Var mean_hw(const Var& x) {
  const Shape s = x->value.shape();
  return affine(reduce_sum(x, false, false, true, true), 1.f / float(int64_t(s.h) * s.w), 0.f);
}

Var mean_per_sample(const Var& x) {
  const Shape s = x->value.shape();
  return affine(reduce_sum(x, false, true, true, true), 1.f / float(s.numel() / s.n), 0.f);
}

Var sum_per_sample(const Var& x) { return reduce_sum(x, false, true, true, true); }

Var instance_norm(const Var& x, float eps) {
  auto centered = sub(x, mean_hw(x));
  auto var = mean_hw(square(centered));
  auto inv_std = reciprocal(sqrt(affine(var, 1.f, eps)));
  return mul(centered, inv_std);
}

namespace {

void accumulate(std::unordered_map<Node*, Var>& grads, const Var& target, const Var& piece) {
  if (!target || !target->requires_grad || !piece) return;
  Var shaped = reduce_to(piece, target->value.shape());
  auto it = grads.find(target.get());
  if (it == grads.end()) {
    grads.emplace(target.get(), shaped);
  } else {
    it->second = add(it->second, shaped);
  }
}

void apply_vjp(const Var& node, const Var& g, std::unordered_map<Node*, Var>& grads) {
  const auto& in = node->inputs;
  switch (node->op) {
    case Op::kLeaf:
      break;
    case Op::kAdd:
      accumulate(grads, in[0], g);
      accumulate(grads, in[1], g);
      break;
    case Op::kSub:
      accumulate(grads, in[0], g);
      accumulate(grads, in[1], neg(g));
      break;
    case Op::kMul:
      accumulate(grads, in[0], mul(g, in[1]));
      accumulate(grads, in[1], mul(g, in[0]));
      break;
    case Op::kReciprocal:
      accumulate(grads, in[0], neg(mul(g, square(node))));
      break;
    case Op::kSqrt:
      accumulate(grads, in[0], mul(g, affine(reciprocal(node), 0.5f, 0.f)));
      break;
    case Op::kTanh:
      accumulate(grads, in[0], mul(g, affine(square(node), -1.f, 1.f)));
      break;
    case Op::kAbs:
      accumulate(grads, in[0], mul(g, sign(in[0])));
      break;
    case Op::kSign:
    case Op::kLReluMask:
      break;  // zero derivative almost everywhere
    case Op::kLRelu:
      accumulate(grads, in[0], mul(g, lrelu_mask(in[0], node->a)));
      break;
    case Op::kAffine:
      accumulate(grads, in[0], affine(g, node->a, 0.f));
      break;
    case Op::kConv:
      accumulate(grads, in[0], conv2d_dx(g, in[1], node->conv));
      accumulate(grads, in[1], conv2d_dw(g, in[0], node->conv));
      break;
    case Op::kConvDx:
      // z = conv_dx(a, w):  da = conv(g, w);  dw = conv_dw(a, g).
      accumulate(grads, in[0], conv2d(g, in[1], node->conv.stride, node->conv.pad));
      accumulate(grads, in[1], conv2d_dw(in[0], g, node->conv));
      break;
    case Op::kConvDw:
      // z = conv_dw(a, x):  da = conv(x, g);  dx = conv_dx(a, g-as-weights).
      accumulate(grads, in[0], conv2d(in[1], g, node->conv.stride, node->conv.pad));
      accumulate(grads, in[1], conv2d_dx(in[0], g, node->conv));
      break;
    case Op::kConcatC: {
      const int ca = in[0]->value.shape().c;
      const int cb = in[1]->value.shape().c;
      accumulate(grads, in[0], slice_c(g, 0, ca));
      accumulate(grads, in[1], slice_c(g, ca, ca + cb));
      break;
    }
    case Op::kSliceC: {
      const int total = in[0]->value.shape().c;
      accumulate(grads, in[0], pad_c(g, node->c0, total - node->c1));
      break;
    }
    case Op::kPadC: {
      const int inner = in[0]->value.shape().c;
      accumulate(grads, in[0], slice_c(g, node->c0, node->c0 + inner));
      break;
    }
    case Op::kReduceSum:
      accumulate(grads, in[0], broadcast_to(g, node->wide));
      break;
    case Op::kBroadcast:
      accumulate(grads, in[0], g);  // reduce_to inside accumulate handles the sum
      break;
    case Op::kMaxPool2: {
      Tensor dx = kernels::maxpool2_scatter(g->value, *node->pool_idx, node->wide);
      auto v = make(std::move(dx), Op::kMaxPoolScatter, {g});
      v->pool_idx = node->pool_idx;
      v->wide = node->value.shape();
      accumulate(grads, in[0], v);
      break;
    }
    case Op::kMaxPoolScatter: {
      Tensor dg = kernels::maxpool2_gather(g->value, *node->pool_idx, node->wide);
      accumulate(grads, in[0], constant(std::move(dg)));
      break;
    }
  }
}

}  // namespace

std::unordered_map<Node*, Var> backward(const Var& root, bool create_graph) {
  if (root->value.numel() != 1) {
    throw ShapeError("backward() expects a scalar root, got " + root->value.shape().str());
  }
  // Topological order over the subgraph that requires grad.
  std::vector<Var> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Var, size_t>> stack;
  if (root->requires_grad) stack.emplace_back(root, 0);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next == 0 && seen.count(node.get())) {
      stack.pop_back();
      continue;
    }
    if (next < node->inputs.size()) {
      Var child = node->inputs[next++];
      if (child && child->requires_grad && !seen.count(child.get())) {
        stack.emplace_back(child, 0);
      }
      continue;
    }
    if (!seen.count(node.get())) {
      seen.insert(node.get());
      order.push_back(node);
    }
    stack.pop_back();
  }

  std::unordered_map<Node*, Var> grads;
  std::optional<NoGradGuard> guard;
  if (!create_graph) guard.emplace();
  grads[root.get()] = constant(Tensor::full(root->value.shape(), 1.f));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const Var& node = *it;
    auto git = grads.find(node.get());
    if (git == grads.end()) continue;
    apply_vjp(node, git->second, grads);
  }
  return grads;
}

}  // namespace hazegan::ad
