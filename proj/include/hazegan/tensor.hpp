#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace hazegan {

// All tensors are 4-d NCHW. Scalars are (1,1,1,1), per-sample scalars
// (N,1,1,1), channel biases (1,C,1,1), conv weights (OutC,InC,KH,KW).
struct Shape {
  int n = 1, c = 1, h = 1, w = 1;

  Shape() = default;
  Shape(int n_, int c_, int h_, int w_) : n(n_), c(c_), h(h_), w(w_) {}

  int64_t numel() const { return int64_t(n) * c * h * w; }
  bool operator==(const Shape&) const = default;
  int dim(int i) const { return i == 0 ? n : i == 1 ? c : i == 2 ? h : w; }
  std::string str() const;
};

// Float32 tensor with shared storage. Copies alias the same buffer; use
// clone() for an independent copy. Mutation through data() is visible to
// every alias, which the optimizer relies on for in-place parameter updates.
//
// Tensor(shape) zero-fills; uninitialized(shape) skips the fill for outputs
// that are fully overwritten.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape s);

  static Tensor uninitialized(Shape s);
  static Tensor zeros(Shape s) { return Tensor(s); }
  static Tensor full(Shape s, float v);
  static Tensor from(Shape s, std::vector<float> values);
  static Tensor scalar(float v) { return full(Shape(1, 1, 1, 1), v); }

  bool defined() const { return buf_ != nullptr; }
  const Shape& shape() const { return shape_; }
  int64_t numel() const { return shape_.numel(); }

  float* data() { return buf_.get(); }
  const float* data() const { return buf_.get(); }

  float item() const;
  Tensor clone() const;
  bool all_finite() const;

 private:
  Shape shape_;
  std::shared_ptr<float[]> buf_;
};

}  // namespace hazegan
