#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hazegan/data_pipeline.hpp"
#include "hazegan/image.hpp"

namespace hazegan {

// Peak signal-to-noise ratio in dB over [0,1] images, all pixels and
// channels. Identical images return the 100 dB cap so aggregates stay finite.
double psnr(const Image& reference, const Image& candidate);

// Structural similarity on BT.601 luminance: 11x11 Gaussian window with
// sigma 1.5, K1=0.01, K2=0.03, dynamic range 1. Mean over all positions where
// the window fits entirely inside the image.
double ssim(const Image& reference, const Image& candidate);

struct EdgeMask {
  int h = 0, w = 0;
  std::vector<uint8_t> mask;   // 1 where the gradient magnitude exceeds the threshold
  std::vector<float> magnitude;

  bool at(int y, int x) const { return mask[size_t(y) * w + x] != 0; }
  float mag(int y, int x) const { return magnitude[size_t(y) * w + x]; }
  size_t count() const;
};

// Sobel gradient magnitude of the luminance (kernels scaled to unit maximum
// entry, replicate borders); pixels above the threshold are "visible edges".
EdgeMask visible_edges(const Image& img, double threshold = 0.02);

// Geometric mean, over visible edges of `output`, of the ratio of output to
// input gradient magnitudes. An empty mask yields 1.0 and sets *empty_mask.
double gradient_ratio_r(const Image& hazy, const Image& output, double threshold = 0.02,
                        bool* empty_mask = nullptr);

// Percentage of pixels saturated (any 8-bit channel at 0 or 255) in the
// output but not in the input.
double saturation_sigma(const Image& hazy, const Image& output);

// Increase in mean local contrast: 5x5 luminance std / mean (mean floored at
// 0.01), averaged over pixels; returns C(output) - C(hazy).
double contrast_gain_c(const Image& hazy, const Image& output);

struct PerImageMetrics {
  std::string id;
  std::optional<double> psnr;
  std::optional<double> ssim;
  double r = 1.0;
  double sigma = 0.0;
  double c_gain = 0.0;
  bool r_mask_empty = false;
  bool ok = true;
  std::string error;
};

struct MetricAggregate {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation; 0 when n < 2
  int count = 0;
};

struct MetricsReport {
  std::vector<PerImageMetrics> rows;
  MetricAggregate psnr, ssim, r, sigma, c_gain;
  int evaluated = 0;
  int total = 0;
  bool has_references = true;
};

// Evaluates every manifest entry against `<outputs_dir>/<id>.png` (or .jpg).
// Reference metrics are skipped for reference-free manifests; a missing or
// unreadable output is recorded per image and excluded from the aggregates.
MetricsReport evaluate_set(const DatasetManifest& manifest, const std::string& outputs_dir);

void write_metrics_csv(const MetricsReport& report, const std::string& path);

// Table with one column per (method name, report), metric rows as mean ± std.
void write_metrics_markdown(
    const std::vector<std::pair<std::string, MetricsReport>>& methods, const std::string& path);

}  // namespace hazegan
