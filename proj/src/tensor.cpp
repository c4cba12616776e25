#include "hazegan/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "hazegan/errors.hpp"

namespace hazegan {

std::string Shape::str() const {
  std::ostringstream os;
  os << "(" << n << "," << c << "," << h << "," << w << ")";
  return os.str();
}

namespace {

void check_shape(Shape s) {
  if (s.n < 1 || s.c < 1 || s.h < 1 || s.w < 1) {
    throw ShapeError("tensor dims must be positive, got " + s.str());
  }
}

}  // namespace

Tensor::Tensor(Shape s) : shape_(s) {
  check_shape(s);
  buf_ = std::shared_ptr<float[]>(new float[size_t(s.numel())]);
  std::memset(buf_.get(), 0, size_t(s.numel()) * sizeof(float));
}

Tensor Tensor::uninitialized(Shape s) {
  check_shape(s);
  Tensor t;
  t.shape_ = s;
  t.buf_ = std::shared_ptr<float[]>(new float[size_t(s.numel())]);
  return t;
}

Tensor Tensor::full(Shape s, float v) {
  Tensor t = uninitialized(s);
  std::fill_n(t.data(), s.numel(), v);
  return t;
}

Tensor Tensor::from(Shape s, std::vector<float> values) {
  if (int64_t(values.size()) != s.numel()) {
    throw ShapeError("value count does not match shape " + s.str());
  }
  Tensor t = uninitialized(s);
  std::copy_n(values.data(), values.size(), t.data());
  return t;
}

float Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_.str());
  return buf_[0];
}

Tensor Tensor::clone() const {
  Tensor t = uninitialized(shape_);
  std::memcpy(t.data(), data(), size_t(numel()) * sizeof(float));
  return t;
}

bool Tensor::all_finite() const {
  const int64_t n = numel();
  for (int64_t i = 0; i < n; ++i) {
    if (!std::isfinite(buf_[i])) return false;
  }
  return true;
}

}  // namespace hazegan
