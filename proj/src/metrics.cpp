#include "hazegan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "hazegan/errors.hpp"

namespace hazegan {

namespace {

void require_same_shape(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw ShapeError("image shapes differ");
}

struct KahanSum {
  double sum = 0.0, comp = 0.0;
  void add(double v) {
    double y = v - comp;
    double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
};

int clampi(int v, int lo, int hi) { return v < lo ? lo : v > hi ? hi : v; }

}  // namespace

double psnr(const Image& reference, const Image& candidate) {
  require_same_shape(reference, candidate);
  double se = 0.0;
  for (size_t i = 0; i < reference.px.size(); ++i) {
    const double d = double(reference.px[i]) - double(candidate.px[i]);
    se += d * d;
  }
  const double mse = se / double(reference.px.size());
  if (mse <= 0.0) return 100.0;  // identical images: documented cap
  return std::min(100.0, 10.0 * std::log10(1.0 / mse));
}

double ssim(const Image& reference, const Image& candidate) {
  require_same_shape(reference, candidate);
  constexpr int kWin = 11;
  constexpr double kSigma = 1.5;
  constexpr double kC1 = 0.01 * 0.01;
  constexpr double kC2 = 0.03 * 0.03;
  if (reference.h < kWin || reference.w < kWin) {
    throw InvalidParameterError("ssim requires images of at least 11x11");
  }
  double kernel[kWin][kWin];
  double ksum = 0.0;
  for (int i = 0; i < kWin; ++i) {
    for (int j = 0; j < kWin; ++j) {
      const double dy = i - (kWin - 1) / 2.0;
      const double dx = j - (kWin - 1) / 2.0;
      kernel[i][j] = std::exp(-(dx * dx + dy * dy) / (2.0 * kSigma * kSigma));
      ksum += kernel[i][j];
    }
  }
  for (auto& row : kernel) {
    for (double& v : row) v /= ksum;
  }

  const FloatMap lx = luminance(reference);
  const FloatMap ly = luminance(candidate);
  KahanSum total;
  int64_t windows = 0;
  for (int y = 0; y + kWin <= reference.h; ++y) {
    for (int x = 0; x + kWin <= reference.w; ++x) {
      double mx = 0, my = 0, xx = 0, yy = 0, xy = 0;
      for (int i = 0; i < kWin; ++i) {
        for (int j = 0; j < kWin; ++j) {
          const double wv = kernel[i][j];
          const double a = lx.at(y + i, x + j);
          const double b = ly.at(y + i, x + j);
          mx += wv * a;
          my += wv * b;
          xx += wv * a * a;
          yy += wv * b * b;
          xy += wv * a * b;
        }
      }
      const double vx = xx - mx * mx;
      const double vy = yy - my * my;
      const double cxy = xy - mx * my;
      const double val = ((2 * mx * my + kC1) * (2 * cxy + kC2)) /
                         ((mx * mx + my * my + kC1) * (vx + vy + kC2));
      total.add(val);
      ++windows;
    }
  }
  return total.sum / double(windows);
}

size_t EdgeMask::count() const {
  size_t n = 0;
  for (uint8_t m : mask) n += m;
  return n;
}

EdgeMask visible_edges(const Image& img, double threshold) {
  const FloatMap lum = luminance(img);
  EdgeMask em;
  em.h = img.h;
  em.w = img.w;
  em.mask.assign(size_t(img.h) * img.w, 0);
  em.magnitude.assign(size_t(img.h) * img.w, 0.f);
  // Sobel scaled so the largest kernel entry is 1.
  const double gx[3][3] = {{-0.5, 0, 0.5}, {-1, 0, 1}, {-0.5, 0, 0.5}};
  for (int y = 0; y < img.h; ++y) {
    for (int x = 0; x < img.w; ++x) {
      double sx = 0, sy = 0;
      for (int i = -1; i <= 1; ++i) {
        for (int j = -1; j <= 1; ++j) {
          const double v = lum.at(clampi(y + i, 0, img.h - 1), clampi(x + j, 0, img.w - 1));
          sx += gx[i + 1][j + 1] * v;
          sy += gx[j + 1][i + 1] * v;
        }
      }
      const double mag = std::sqrt(sx * sx + sy * sy);
      em.magnitude[size_t(y) * img.w + x] = float(mag);
      em.mask[size_t(y) * img.w + x] = mag > threshold ? 1 : 0;
    }
  }
  return em;
}

double gradient_ratio_r(const Image& hazy, const Image& output, double threshold,
                        bool* empty_mask) {
  require_same_shape(hazy, output);
  const EdgeMask in_edges = visible_edges(hazy, threshold);
  const EdgeMask out_edges = visible_edges(output, threshold);
  if (empty_mask) *empty_mask = false;
  KahanSum log_sum;
  int64_t n = 0;
  for (int y = 0; y < output.h; ++y) {
    for (int x = 0; x < output.w; ++x) {
      if (!out_edges.at(y, x)) continue;
      const double rho = out_edges.mag(y, x) / std::max(double(in_edges.mag(y, x)), 1e-6);
      log_sum.add(std::log(rho));
      ++n;
    }
  }
  if (n == 0) {
    if (empty_mask) *empty_mask = true;
    return 1.0;
  }
  return std::exp(log_sum.sum / double(n));
}

double saturation_sigma(const Image& hazy, const Image& output) {
  require_same_shape(hazy, output);
  auto saturated = [](const Image& img, int y, int x) {
    for (int c = 0; c < 3; ++c) {
      const uint8_t q = quantize8(img.at(y, x, c));
      if (q == 0 || q == 255) return true;
    }
    return false;
  };
  int64_t newly = 0;
  for (int y = 0; y < hazy.h; ++y) {
    for (int x = 0; x < hazy.w; ++x) {
      if (saturated(output, y, x) && !saturated(hazy, y, x)) ++newly;
    }
  }
  return 100.0 * double(newly) / double(hazy.npix());
}

namespace {

double mean_local_contrast(const Image& img) {
  const FloatMap lum = luminance(img);
  KahanSum total;
  for (int y = 0; y < img.h; ++y) {
    for (int x = 0; x < img.w; ++x) {
      double s = 0, ss = 0;
      for (int i = -2; i <= 2; ++i) {
        for (int j = -2; j <= 2; ++j) {
          const double v = lum.at(clampi(y + i, 0, img.h - 1), clampi(x + j, 0, img.w - 1));
          s += v;
          ss += v * v;
        }
      }
      const double mean = s / 25.0;
      const double var = std::max(0.0, ss / 25.0 - mean * mean);
      total.add(std::sqrt(var) / std::max(mean, 0.01));
    }
  }
  return total.sum / double(img.npix());
}

}  // namespace

double contrast_gain_c(const Image& hazy, const Image& output) {
  require_same_shape(hazy, output);
  return mean_local_contrast(output) - mean_local_contrast(hazy);
}

namespace {

MetricAggregate aggregate(const std::vector<double>& values) {
  MetricAggregate a;
  a.count = int(values.size());
  if (values.empty()) return a;
  KahanSum s;
  for (double v : values) s.add(v);
  a.mean = s.sum / double(values.size());
  if (values.size() > 1) {
    KahanSum ss;
    for (double v : values) ss.add((v - a.mean) * (v - a.mean));
    a.stddev = std::sqrt(ss.sum / double(values.size() - 1));
  }
  return a;
}

std::string find_output(const std::string& outputs_dir, const std::string& id) {
  namespace fs = std::filesystem;
  for (const char* ext : {".png", ".jpg", ".jpeg"}) {
    fs::path p = fs::path(outputs_dir) / (id + ext);
    if (fs::exists(p)) return p.string();
  }
  return {};
}

}  // namespace

MetricsReport evaluate_set(const DatasetManifest& manifest, const std::string& outputs_dir) {
  MetricsReport report;
  report.total = int(manifest.pairs.size());
  report.has_references = manifest.has_references;
  std::vector<double> psnrs, ssims, rs, sigmas, cs;
  for (const ImagePair& pair : manifest.pairs) {
    PerImageMetrics row;
    row.id = pair.id;
    try {
      const std::string out_path = find_output(outputs_dir, pair.id);
      if (out_path.empty()) throw DataError("no output image for id " + pair.id);
      const Image out = read_image(out_path);
      const Image hazy = read_image(pair.hazy_path);
      if (!hazy.same_shape(out)) throw ShapeError("output shape differs from input for " + pair.id);
      row.r = gradient_ratio_r(hazy, out, 0.02, &row.r_mask_empty);
      row.sigma = saturation_sigma(hazy, out);
      row.c_gain = contrast_gain_c(hazy, out);
      if (manifest.has_references && pair.has_clear()) {
        const Image clear = read_image(pair.clear_path);
        row.psnr = psnr(clear, out);
        row.ssim = ssim(clear, out);
      }
    } catch (const Error& e) {
      row.ok = false;
      row.error = e.what();
    }
    if (row.ok) {
      ++report.evaluated;
      if (row.psnr) psnrs.push_back(*row.psnr);
      if (row.ssim) ssims.push_back(*row.ssim);
      rs.push_back(row.r);
      sigmas.push_back(row.sigma);
      cs.push_back(row.c_gain);
    }
    report.rows.push_back(std::move(row));
  }
  report.psnr = aggregate(psnrs);
  report.ssim = aggregate(ssims);
  report.r = aggregate(rs);
  report.sigma = aggregate(sigmas);
  report.c_gain = aggregate(cs);
  return report;
}

namespace {

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string fmt_pm(const MetricAggregate& a) {
  if (a.count == 0) return "n/a";
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%.3f ± %.3f", a.mean, a.stddev);
  return buf;
}

}  // namespace

void write_metrics_csv(const MetricsReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write csv: " + path);
  out << "id,psnr,ssim,r,sigma,c_gain,status\n";
  for (const auto& row : report.rows) {
    out << row.id << ',';
    out << (row.psnr ? fmt(*row.psnr) : "") << ',';
    out << (row.ssim ? fmt(*row.ssim) : "") << ',';
    if (row.ok) {
      out << fmt(row.r) << ',' << fmt(row.sigma) << ',' << fmt(row.c_gain) << ",ok\n";
    } else {
      out << ",,,error: " << row.error << "\n";
    }
  }
  auto agg_line = [&](const char* name, auto get) {
    out << name;
    if (report.has_references) {
      out << ',' << fmt(get(report.psnr)) << ',' << fmt(get(report.ssim));
    } else {
      out << ",,";
    }
    out << ',' << fmt(get(report.r)) << ',' << fmt(get(report.sigma)) << ','
        << fmt(get(report.c_gain)) << ",\n";
  };
  agg_line("mean", [](const MetricAggregate& a) { return a.mean; });
  agg_line("std", [](const MetricAggregate& a) { return a.stddev; });
  out << "evaluated," << report.evaluated << " of " << report.total << ",,,,,\n";
}

void write_metrics_markdown(
    const std::vector<std::pair<std::string, MetricsReport>>& methods, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write markdown: " + path);
  out << "| Metric |";
  for (const auto& [name, _] : methods) out << ' ' << name << " |";
  out << "\n|---|";
  for (size_t i = 0; i < methods.size(); ++i) out << "---|";
  out << "\n";
  struct RowDef {
    const char* label;
    MetricAggregate MetricsReport::* member;
  };
  const RowDef rows[] = {
      {"PSNR", &MetricsReport::psnr}, {"SSIM", &MetricsReport::ssim},
      {"r", &MetricsReport::r},       {"sigma", &MetricsReport::sigma},
      {"C", &MetricsReport::c_gain},
  };
  for (const auto& def : rows) {
    out << "| " << def.label << " |";
    for (const auto& [_, rep] : methods) out << ' ' << fmt_pm(rep.*(def.member)) << " |";
    out << "\n";
  }
}

}  // namespace hazegan
