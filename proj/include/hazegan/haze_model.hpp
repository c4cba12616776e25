#pragma once

#include <array>

#include "hazegan/image.hpp"

namespace hazegan {

// Parameters of the scattering model: extinction coefficient k (per unit of
// relative depth) and per-channel airlight color. A grey sky is the special
// case of three equal airlight channels.
struct HazeParams {
  double k = 1.0;
  std::array<float, 3> airlight{1.f, 1.f, 1.f};

  void validate() const;
};

// t(x,y) = exp(-k * d(x,y)), in (0,1].
FloatMap transmission(const FloatMap& depth, double k);

// I = I0 * t + A * (1 - t), clamped to [0,1].
Image synthesize_haze(const Image& clear, const FloatMap& depth, const HazeParams& params);

// I0 = (I - A) / max(t, t_floor) + A, clamped to [0,1]. The floor bounds the
// amplification where the model becomes singular.
Image restore_with_transmission(const Image& hazy, const FloatMap& t,
                                const std::array<float, 3>& airlight, double t_floor = 0.1);

}  // namespace hazegan
