#pragma once

#include <array>

#include "hazegan/image.hpp"

namespace hazegan {

// He et al. pipeline parameters; defaults follow the published values.
struct DcpParams {
  int patch_size = 15;
  double omega = 0.95;              // haze retention factor
  double airlight_fraction = 0.001; // brightest dark-channel share used for airlight
  double t_floor = 0.1;
  int guided_radius = 40;
  double guided_eps = 1e-3;

  void validate() const;
};

// Per-pixel channel minimum eroded over a patch_size x patch_size window.
FloatMap dark_channel(const Image& img, int patch_size);

// Among the brightest `fraction` of dark-channel pixels, the color of the
// pixel with the highest luminance.
std::array<float, 3> estimate_airlight(const Image& img, const FloatMap& dark, double fraction);

// t = 1 - omega * dark_channel(I / A); clamped to [1e-3, 1] before refinement.
FloatMap estimate_transmission(const Image& img, const std::array<float, 3>& airlight,
                               double omega, int patch_size);

// Edge-preserving guided filter with the hazy image's luminance as guide.
FloatMap refine_transmission(const FloatMap& t, const Image& guide, int radius, double eps);

// Full pipeline: dark channel -> airlight -> transmission -> refinement ->
// inversion of the scattering model.
Image dcp_dehaze(const Image& img, const DcpParams& params = {});

}  // namespace hazegan
