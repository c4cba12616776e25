#include "hazegan/haze_model.hpp"

#include <cmath>

#include "hazegan/errors.hpp"

namespace hazegan {

void HazeParams::validate() const {
  if (!std::isfinite(k) || k < 0.0) {
    throw InvalidParameterError("extinction coefficient k must be finite and >= 0");
  }
  for (float a : airlight) {
    if (!std::isfinite(a) || a < 0.f || a > 1.f) {
      throw InvalidParameterError("airlight channels must lie in [0,1]");
    }
  }
}

FloatMap transmission(const FloatMap& depth, double k) {
  if (!std::isfinite(k) || k < 0.0) {
    throw InvalidParameterError("extinction coefficient k must be finite and >= 0");
  }
  FloatMap t(depth.h, depth.w);
  for (size_t i = 0; i < depth.v.size(); ++i) {
    const float d = depth.v[i];
    if (!std::isfinite(d) || d < 0.f) {
      throw InvalidParameterError("depth entries must be finite and >= 0");
    }
    t.v[i] = float(std::exp(-k * double(d)));
  }
  return t;
}

Image synthesize_haze(const Image& clear, const FloatMap& depth, const HazeParams& params) {
  params.validate();
  if (clear.h != depth.h || clear.w != depth.w) {
    throw ShapeError("clear image and depth map shapes differ");
  }
  const FloatMap t = transmission(depth, params.k);
  Image out(clear.h, clear.w);
  for (int y = 0; y < clear.h; ++y) {
    for (int x = 0; x < clear.w; ++x) {
      const double tv = t.at(y, x);
      for (int c = 0; c < 3; ++c) {
        double v = double(clear.at(y, x, c)) * tv + double(params.airlight[size_t(c)]) * (1.0 - tv);
        out.at(y, x, c) = float(v < 0.0 ? 0.0 : v > 1.0 ? 1.0 : v);
      }
    }
  }
  return out;
}

Image restore_with_transmission(const Image& hazy, const FloatMap& t,
                                const std::array<float, 3>& airlight, double t_floor) {
  if (!(t_floor > 0.0) || t_floor > 1.0) {
    throw InvalidParameterError("t_floor must lie in (0,1]");
  }
  if (hazy.h != t.h || hazy.w != t.w) {
    throw ShapeError("hazy image and transmission map shapes differ");
  }
  Image out(hazy.h, hazy.w);
  for (int y = 0; y < hazy.h; ++y) {
    for (int x = 0; x < hazy.w; ++x) {
      const double tv = std::max(double(t.at(y, x)), t_floor);
      for (int c = 0; c < 3; ++c) {
        const double a = airlight[size_t(c)];
        double v = (double(hazy.at(y, x, c)) - a) / tv + a;
        out.at(y, x, c) = float(v < 0.0 ? 0.0 : v > 1.0 ? 1.0 : v);
      }
    }
  }
  return out;
}

}  // namespace hazegan
