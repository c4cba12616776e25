#include "hazegan/dcp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hazegan/errors.hpp"
#include "hazegan/haze_model.hpp"

namespace hazegan {

void DcpParams::validate() const {
  if (patch_size < 3 || patch_size % 2 == 0) {
    throw InvalidParameterError("patch_size must be odd and >= 3");
  }
  if (!(omega > 0.0) || omega > 1.0) throw InvalidParameterError("omega must lie in (0,1]");
  if (!(airlight_fraction > 0.0) || airlight_fraction > 1.0) {
    throw InvalidParameterError("airlight_fraction must lie in (0,1]");
  }
  if (!(t_floor > 0.0) || t_floor > 1.0) throw InvalidParameterError("t_floor must lie in (0,1]");
  if (guided_radius < 1) throw InvalidParameterError("guided_radius must be >= 1");
  if (!(guided_eps > 0.0)) throw InvalidParameterError("guided_eps must be > 0");
}

namespace {

// Separable sliding-window minimum with clamped (replicate) borders.
FloatMap min_filter(const FloatMap& in, int patch) {
  const int r = patch / 2;
  FloatMap tmp(in.h, in.w), out(in.h, in.w);
  for (int y = 0; y < in.h; ++y) {
    for (int x = 0; x < in.w; ++x) {
      float m = 1e30f;
      const int lo = std::max(0, x - r), hi = std::min(in.w - 1, x + r);
      for (int j = lo; j <= hi; ++j) m = std::min(m, in.at(y, j));
      tmp.at(y, x) = m;
    }
  }
  for (int y = 0; y < in.h; ++y) {
    const int lo = std::max(0, y - r), hi = std::min(in.h - 1, y + r);
    for (int x = 0; x < in.w; ++x) {
      float m = 1e30f;
      for (int i = lo; i <= hi; ++i) m = std::min(m, tmp.at(i, x));
      out.at(y, x) = m;
    }
  }
  return out;
}

FloatMap channel_min(const Image& img) {
  FloatMap m(img.h, img.w);
  for (int y = 0; y < img.h; ++y) {
    for (int x = 0; x < img.w; ++x) {
      m.at(y, x) = std::min({img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2)});
    }
  }
  return m;
}

// Box mean with clamped windows normalized by the actual window area, so a
// radius larger than the image degrades gracefully into a global mean.
FloatMap box_mean(const FloatMap& in, int r) {
  // Row-prefix sums, then column pass.
  FloatMap rowsum(in.h, in.w), out(in.h, in.w);
  for (int y = 0; y < in.h; ++y) {
    double acc = 0.0;
    std::vector<double> prefix(size_t(in.w) + 1, 0.0);
    for (int x = 0; x < in.w; ++x) {
      acc += in.at(y, x);
      prefix[size_t(x) + 1] = acc;
    }
    for (int x = 0; x < in.w; ++x) {
      const int lo = std::max(0, x - r), hi = std::min(in.w - 1, x + r);
      rowsum.at(y, x) = float((prefix[size_t(hi) + 1] - prefix[size_t(lo)]) / double(hi - lo + 1));
    }
  }
  for (int x = 0; x < in.w; ++x) {
    double acc = 0.0;
    std::vector<double> prefix(size_t(in.h) + 1, 0.0);
    for (int y = 0; y < in.h; ++y) {
      acc += rowsum.at(y, x);
      prefix[size_t(y) + 1] = acc;
    }
    for (int y = 0; y < in.h; ++y) {
      const int lo = std::max(0, y - r), hi = std::min(in.h - 1, y + r);
      out.at(y, x) = float((prefix[size_t(hi) + 1] - prefix[size_t(lo)]) / double(hi - lo + 1));
    }
  }
  return out;
}

}  // namespace

FloatMap dark_channel(const Image& img, int patch_size) {
  if (patch_size < 1 || patch_size % 2 == 0) {
    throw InvalidParameterError("patch_size must be odd");
  }
  return min_filter(channel_min(img), patch_size);
}

std::array<float, 3> estimate_airlight(const Image& img, const FloatMap& dark, double fraction) {
  if (!(fraction > 0.0) || fraction > 1.0) {
    throw InvalidParameterError("airlight_fraction must lie in (0,1]");
  }
  const size_t n = dark.v.size();
  const size_t k = std::max<size_t>(1, size_t(std::llround(fraction * double(n))));
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  // Brightest dark-channel pixels first; index ascending as tie break keeps
  // the selection deterministic.
  std::partial_sort(idx.begin(), idx.begin() + std::ptrdiff_t(k), idx.end(),
                    [&](int a, int b) {
                      if (dark.v[size_t(a)] != dark.v[size_t(b)])
                        return dark.v[size_t(a)] > dark.v[size_t(b)];
                      return a < b;
                    });
  const FloatMap lum = luminance(img);
  int best = idx[0];
  for (size_t i = 1; i < k; ++i) {
    if (lum.v[size_t(idx[i])] > lum.v[size_t(best)]) best = idx[i];
  }
  const int y = best / img.w, x = best % img.w;
  return {img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2)};
}

FloatMap estimate_transmission(const Image& img, const std::array<float, 3>& airlight,
                               double omega, int patch_size) {
  if (!(omega > 0.0) || omega > 1.0) throw InvalidParameterError("omega must lie in (0,1]");
  for (float a : airlight) {
    if (a <= 0.05f) {
      throw InvalidParameterError("ill-conditioned airlight: channel <= 0.05");
    }
  }
  Image normalized(img.h, img.w);
  for (int y = 0; y < img.h; ++y) {
    for (int x = 0; x < img.w; ++x) {
      for (int c = 0; c < 3; ++c) normalized.at(y, x, c) = img.at(y, x, c) / airlight[size_t(c)];
    }
  }
  FloatMap dc = dark_channel(normalized, patch_size);
  FloatMap t(img.h, img.w);
  for (size_t i = 0; i < t.v.size(); ++i) {
    t.v[i] = std::clamp(1.f - float(omega) * dc.v[i], 1e-3f, 1.f);
  }
  return t;
}

FloatMap refine_transmission(const FloatMap& t, const Image& guide, int radius, double eps) {
  if (t.h != guide.h || t.w != guide.w) throw ShapeError("transmission/guide shapes differ");
  const FloatMap g = luminance(guide);
  FloatMap gp(t.h, t.w), gg(t.h, t.w);
  for (size_t i = 0; i < g.v.size(); ++i) {
    gp.v[i] = g.v[i] * t.v[i];
    gg.v[i] = g.v[i] * g.v[i];
  }
  const FloatMap mean_g = box_mean(g, radius);
  const FloatMap mean_t = box_mean(t, radius);
  const FloatMap mean_gp = box_mean(gp, radius);
  const FloatMap mean_gg = box_mean(gg, radius);

  FloatMap a(t.h, t.w), b(t.h, t.w);
  for (size_t i = 0; i < a.v.size(); ++i) {
    const double var = double(mean_gg.v[i]) - double(mean_g.v[i]) * mean_g.v[i];
    const double cov = double(mean_gp.v[i]) - double(mean_g.v[i]) * mean_t.v[i];
    a.v[i] = float(cov / (var + eps));
    b.v[i] = mean_t.v[i] - a.v[i] * mean_g.v[i];
  }
  const FloatMap mean_a = box_mean(a, radius);
  const FloatMap mean_b = box_mean(b, radius);
  FloatMap out(t.h, t.w);
  for (size_t i = 0; i < out.v.size(); ++i) {
    out.v[i] = std::clamp(mean_a.v[i] * g.v[i] + mean_b.v[i], 1e-3f, 1.f);
  }
  return out;
}

Image dcp_dehaze(const Image& img, const DcpParams& params) {
  params.validate();
  const FloatMap dark = dark_channel(img, params.patch_size);
  const auto airlight = estimate_airlight(img, dark, params.airlight_fraction);
  // The scattering inversion needs a usable airlight even on degenerate
  // inputs (all-dark frames); floor it instead of failing the whole image.
  std::array<float, 3> a = airlight;
  for (float& c : a) c = std::max(c, 0.051f);
  const FloatMap t0 = estimate_transmission(img, a, params.omega, params.patch_size);
  const FloatMap t = refine_transmission(t0, img, params.guided_radius, params.guided_eps);
  return restore_with_transmission(img, t, airlight, params.t_floor);
}

}  // namespace hazegan
