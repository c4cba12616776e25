#pragma once

#include <vector>

#include "hazegan/autodiff.hpp"
#include "hazegan/tensor.hpp"

namespace hazegan::kernels {

inline int conv_out_size(int size, int k, int stride, int pad) {
  return (size + 2 * pad - k) / stride + 1;
}

// y (N,OC,OH,OW) = x (N,C,H,W) * w (OC,C,KH,KW), zero padding.
Tensor conv2d(const Tensor& x, const Tensor& w, int stride, int pad);

// Gradient with respect to the conv input; args describe the conv input x.
Tensor conv2d_dx(const Tensor& g, const Tensor& w, const ad::ConvArgs& args);

// Gradient with respect to the conv weights.
Tensor conv2d_dw(const Tensor& g, const Tensor& x, const ad::ConvArgs& args);

// 2x2 stride-2 max pool (floor mode). idx receives flat argmax positions.
Tensor maxpool2_fwd(const Tensor& x, std::vector<int>& idx);
Tensor maxpool2_scatter(const Tensor& g, const std::vector<int>& idx, Shape x_shape);
Tensor maxpool2_gather(const Tensor& gx, const std::vector<int>& idx, Shape y_shape);

}  // namespace hazegan::kernels
