#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "hazegan/data_pipeline.hpp"
#include "hazegan/errors.hpp"
#include "hazegan/metrics.hpp"
#include "hazegan/rng.hpp"

using namespace hazegan;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Brute-force oracles: naive double loops, no shared code with the library.
// ---------------------------------------------------------------------------
namespace oracle {

double luma(const Image& img, int y, int x) {
  return 0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) + 0.114 * img.at(y, x, 2);
}

int clampi(int v, int lo, int hi) { return v < lo ? lo : v > hi ? hi : v; }

double psnr(const Image& a, const Image& b) {
  double se = 0;
  int64_t n = 0;
  for (int y = 0; y < a.h; ++y) {
    for (int x = 0; x < a.w; ++x) {
      for (int c = 0; c < 3; ++c) {
        const double d = double(a.at(y, x, c)) - double(b.at(y, x, c));
        se += d * d;
        ++n;
      }
    }
  }
  const double mse = se / double(n);
  if (mse == 0) return 100.0;
  return 10.0 * std::log10(1.0 / mse);
}

double ssim(const Image& ra, const Image& rb) {
  const int win = 11;
  const double sigma = 1.5, c1 = 1e-4, c2 = 9e-4;
  double k[11][11], ks = 0;
  for (int i = 0; i < win; ++i) {
    for (int j = 0; j < win; ++j) {
      k[i][j] = std::exp(-((i - 5.0) * (i - 5.0) + (j - 5.0) * (j - 5.0)) / (2 * sigma * sigma));
      ks += k[i][j];
    }
  }
  double total = 0;
  int64_t count = 0;
  for (int y = 0; y + win <= ra.h; ++y) {
    for (int x = 0; x + win <= ra.w; ++x) {
      double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
      for (int i = 0; i < win; ++i) {
        for (int j = 0; j < win; ++j) {
          const double wv = k[i][j] / ks;
          const double a = luma(ra, y + i, x + j), b = luma(rb, y + i, x + j);
          mx += wv * a;
          my += wv * b;
          sxx += wv * a * a;
          syy += wv * b * b;
          sxy += wv * a * b;
        }
      }
      const double vx = sxx - mx * mx, vy = syy - my * my, cxy = sxy - mx * my;
      total += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  }
  return total / double(count);
}

// Sobel with max-entry-1 kernels, replicate border.
void sobel(const Image& img, int y, int x, double* mag) {
  static const double kx[3][3] = {{-0.5, 0, 0.5}, {-1, 0, 1}, {-0.5, 0, 0.5}};
  double gx = 0, gy = 0;
  for (int i = -1; i <= 1; ++i) {
    for (int j = -1; j <= 1; ++j) {
      const double v = luma(img, clampi(y + i, 0, img.h - 1), clampi(x + j, 0, img.w - 1));
      gx += kx[i + 1][j + 1] * v;
      gy += kx[j + 1][i + 1] * v;
    }
  }
  *mag = std::sqrt(gx * gx + gy * gy);
}

double gradient_ratio(const Image& hazy, const Image& out, double thr) {
  double acc = 0;
  int64_t n = 0;
  for (int y = 0; y < out.h; ++y) {
    for (int x = 0; x < out.w; ++x) {
      double mo, mi;
      sobel(out, y, x, &mo);
      sobel(hazy, y, x, &mi);
      if (mo > thr) {
        acc += std::log(mo / std::max(mi, 1e-6));
        ++n;
      }
    }
  }
  return n == 0 ? 1.0 : std::exp(acc / double(n));
}

double saturation(const Image& hazy, const Image& out) {
  auto sat = [](const Image& img, int y, int x) {
    for (int c = 0; c < 3; ++c) {
      float v = img.at(y, x, c);
      v = v < 0 ? 0 : v > 1 ? 1 : v;
      const int q = int(v * 255.f + 0.5f);
      if (q == 0 || q == 255) return true;
    }
    return false;
  };
  int64_t n = 0;
  for (int y = 0; y < hazy.h; ++y) {
    for (int x = 0; x < hazy.w; ++x) {
      if (sat(out, y, x) && !sat(hazy, y, x)) ++n;
    }
  }
  return 100.0 * double(n) / (double(hazy.h) * hazy.w);
}

double local_contrast(const Image& img) {
  double total = 0;
  for (int y = 0; y < img.h; ++y) {
    for (int x = 0; x < img.w; ++x) {
      double s = 0, ss = 0;
      for (int i = -2; i <= 2; ++i) {
        for (int j = -2; j <= 2; ++j) {
          const double v = luma(img, clampi(y + i, 0, img.h - 1), clampi(x + j, 0, img.w - 1));
          s += v;
          ss += v * v;
        }
      }
      const double mean = s / 25.0;
      const double var = std::max(0.0, ss / 25.0 - mean * mean);
      total += std::sqrt(var) / std::max(mean, 0.01);
    }
  }
  return total / (double(img.h) * img.w);
}

}  // namespace oracle

namespace {

Image random_image(Rng& rng, int h, int w) {
  Image img(h, w);
  for (float& v : img.px) v = float(rng.uniform());
  return img;
}

Image smooth_random_image(Rng& rng, int h, int w, float lo, float hi) {
  // 3x3 grid interpolated; keeps gradients gentle so scaling does not clip.
  float grid[3][3][3];
  for (auto& row : grid) {
    for (auto& cell : row) {
      for (float& v : cell) v = float(rng.uniform(lo, hi));
    }
  }
  Image img(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float gy = float(y) / float(h - 1) * 2.f;
      const float gx = float(x) / float(w - 1) * 2.f;
      const int y0 = std::min(int(gy), 1), x0 = std::min(int(gx), 1);
      const float fy = gy - float(y0), fx = gx - float(x0);
      for (int c = 0; c < 3; ++c) {
        img.at(y, x, c) = (1 - fy) * ((1 - fx) * grid[y0][x0][c] + fx * grid[y0][x0 + 1][c]) +
                          fy * ((1 - fx) * grid[y0 + 1][x0][c] + fx * grid[y0 + 1][x0 + 1][c]);
      }
    }
  }
  return img;
}

}  // namespace

TEST_CASE("psnr closed forms and oracle equivalence") {
  Rng rng(31);
  const Image a = random_image(rng, 16, 16);
  CHECK(psnr(a, a) == 100.0);

  Image b = a;
  for (float& v : b.px) v = std::min(1.f, v * 0.5f + 0.25f);  // keep in range

  // uniform difference 0.1 -> 20 dB
  Image flat_a(16, 16, 0.4f), flat_b(16, 16, 0.5f);
  CHECK(psnr(flat_a, flat_b) == doctest::Approx(20.0).epsilon(1e-6));

  // uniform difference 1/255 -> 20*log10(255)
  Image q_a(16, 16, 0.4f), q_b(16, 16, 0.4f + 1.f / 255.f);
  CHECK(psnr(q_a, q_b) == doctest::Approx(20.0 * std::log10(255.0)).epsilon(1e-4));

  CHECK(psnr(a, b) == doctest::Approx(oracle::psnr(a, b)).epsilon(1e-9));
  CHECK(psnr(a, b) == doctest::Approx(psnr(b, a)).epsilon(1e-12));

  Image c(8, 8);
  CHECK_THROWS_AS(psnr(a, c), ShapeError);
}

TEST_CASE("ssim identity, oracle equivalence and qualitative cases") {
  Rng rng(33);
  const Image a = random_image(rng, 16, 16);
  CHECK(ssim(a, a) == 1.0);

  const Image b = random_image(rng, 16, 16);
  CHECK(ssim(a, b) == doctest::Approx(oracle::ssim(a, b)).epsilon(1e-6));

  // mid-contrast fixture against its negative
  const Image mid = smooth_random_image(rng, 16, 16, 0.25f, 0.75f);
  Image negat = mid;
  for (float& v : negat.px) v = 1.f - v;
  const double versus_negative = ssim(mid, negat);
  CHECK(versus_negative == doctest::Approx(oracle::ssim(mid, negat)).epsilon(1e-6));
  CHECK(versus_negative < 0.5);

  Image flat(16, 16, 0.5f);
  Image noisy = flat;
  Rng nrng(35);
  for (float& v : noisy.px) v += float(nrng.normal() * 1e-4);
  CHECK(ssim(flat, noisy) > 0.99);

  Image tiny(8, 8);
  CHECK_THROWS_AS(ssim(tiny, tiny), InvalidParameterError);
}

TEST_CASE("visible edges: constant, step and ramp responses") {
  Image flat(16, 16, 0.3f);
  CHECK(visible_edges(flat).count() == 0);

  Image step(16, 16, 0.f);
  for (int y = 0; y < 16; ++y) {
    for (int x = 8; x < 16; ++x) {
      step.at(y, x, 0) = step.at(y, x, 1) = step.at(y, x, 2) = 1.f;
    }
  }
  const EdgeMask sm = visible_edges(step);
  CHECK(sm.at(5, 7));
  CHECK(sm.at(5, 8));
  CHECK(!sm.at(5, 2));
  CHECK(!sm.at(5, 13));

  // ramp with slope 0.01/pixel: unit-normalized Sobel magnitude is 0.04
  Image ramp(16, 16);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      const float v = 0.2f + 0.01f * float(x);
      ramp.at(y, x, 0) = ramp.at(y, x, 1) = ramp.at(y, x, 2) = v;
    }
  }
  const EdgeMask rm = visible_edges(ramp, 0.02);
  for (int y = 2; y < 14; ++y) {
    for (int x = 2; x < 14; ++x) {
      CHECK(rm.mag(y, x) == doctest::Approx(0.04).epsilon(1e-3));
      CHECK(rm.at(y, x));
    }
  }
}

TEST_CASE("gradient ratio r") {
  Rng rng(41);
  const Image img = smooth_random_image(rng, 16, 16, 0.3f, 0.7f);
  bool empty = false;
  CHECK(gradient_ratio_r(img, img, 0.02, &empty) == doctest::Approx(1.0).epsilon(1e-9));

  // gain 2 about mid-gray, no clipping by fixture construction
  Image stretched = img;
  for (float& v : stretched.px) v = 2.f * (v - 0.5f) + 0.5f;
  const double r = gradient_ratio_r(img, stretched);
  CHECK(r == doctest::Approx(2.0).epsilon(1e-4));

  const Image other = smooth_random_image(rng, 16, 16, 0.1f, 0.9f);
  CHECK(gradient_ratio_r(img, other) ==
        doctest::Approx(oracle::gradient_ratio(img, other, 0.02)).epsilon(1e-6));

  Image flat(16, 16, 0.5f);
  const double rf = gradient_ratio_r(flat, flat, 0.02, &empty);
  CHECK(rf == 1.0);
  CHECK(empty);
}

TEST_CASE("saturation sigma") {
  Rng rng(43);
  const Image img = smooth_random_image(rng, 10, 10, 0.2f, 0.8f);
  CHECK(saturation_sigma(img, img) == 0.0);

  Image gray(10, 10, 0.5f);
  Image white(10, 10, 1.f);
  CHECK(saturation_sigma(gray, white) == 100.0);

  // exactly 10 of 100 pixels newly clipped
  Image out = gray;
  for (int i = 0; i < 10; ++i) out.at(3, i, 1) = 1.f;
  CHECK(saturation_sigma(gray, out) == doctest::Approx(10.0));

  const Image a = random_image(rng, 10, 10);
  const Image b = random_image(rng, 10, 10);
  CHECK(saturation_sigma(a, b) == doctest::Approx(oracle::saturation(a, b)).epsilon(1e-12));
}

TEST_CASE("contrast gain C") {
  Rng rng(47);
  const Image img = random_image(rng, 16, 16);
  CHECK(contrast_gain_c(img, img) == 0.0);

  // 5x5 box blur must reduce local contrast on a textured fixture
  Image blurred(16, 16);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      for (int c = 0; c < 3; ++c) {
        double s = 0;
        for (int i = -2; i <= 2; ++i) {
          for (int j = -2; j <= 2; ++j) {
            s += img.at(std::clamp(y + i, 0, 15), std::clamp(x + j, 0, 15), c);
          }
        }
        blurred.at(y, x, c) = float(s / 25.0);
      }
    }
  }
  CHECK(contrast_gain_c(img, blurred) < 0.0);

  const Image other = random_image(rng, 16, 16);
  const double expected = oracle::local_contrast(other) - oracle::local_contrast(img);
  CHECK(contrast_gain_c(img, other) == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("evaluate_set aggregates, degenerate std and missing outputs") {
  Rng rng(53);
  const fs::path dir = fs::temp_directory_path() / "hazegan_eval_test";
  fs::remove_all(dir);
  fs::create_directories(dir / "hazy");
  fs::create_directories(dir / "clear");
  fs::create_directories(dir / "out");

  DatasetManifest manifest;
  manifest.source_name = "fixture";
  manifest.has_references = true;
  for (int i = 0; i < 3; ++i) {
    const Image hazy = smooth_random_image(rng, 16, 16, 0.3f, 0.9f);
    const Image clear = smooth_random_image(rng, 16, 16, 0.1f, 0.9f);
    const std::string id = "fix_" + std::to_string(i);
    write_image(hazy, (dir / "hazy" / (id + ".png")).string());
    write_image(clear, (dir / "clear" / (id + ".png")).string());
    // outputs identical to references
    write_image(clear, (dir / "out" / (id + ".png")).string());
    ImagePair pair;
    pair.id = id;
    pair.hazy_path = (dir / "hazy" / (id + ".png")).string();
    pair.clear_path = (dir / "clear" / (id + ".png")).string();
    manifest.pairs.push_back(pair);
  }

  const MetricsReport rep = evaluate_set(manifest, (dir / "out").string());
  CHECK(rep.evaluated == 3);
  CHECK(rep.psnr.mean == doctest::Approx(100.0));
  CHECK(rep.psnr.stddev == doctest::Approx(0.0));
  CHECK(rep.ssim.mean == doctest::Approx(1.0));

  // aggregates equal a spreadsheet-style recomputation from the rows
  {
    double sum = 0;
    for (const auto& row : rep.rows) sum += row.r;
    const double mean = sum / 3.0;
    double ss = 0;
    for (const auto& row : rep.rows) ss += (row.r - mean) * (row.r - mean);
    CHECK(rep.r.mean == doctest::Approx(mean).epsilon(1e-12));
    CHECK(rep.r.stddev == doctest::Approx(std::sqrt(ss / 2.0)).epsilon(1e-9));
  }

  // single-image set: std must be 0
  DatasetManifest one = manifest;
  one.pairs.resize(1);
  const MetricsReport rep1 = evaluate_set(one, (dir / "out").string());
  CHECK(rep1.psnr.stddev == 0.0);

  // remove one output: per-image error, aggregates over the rest
  fs::remove(dir / "out" / "fix_1.png");
  const MetricsReport rep2 = evaluate_set(manifest, (dir / "out").string());
  CHECK(rep2.evaluated == 2);
  CHECK(rep2.total == 3);
  bool found_error = false;
  for (const auto& row : rep2.rows) found_error |= !row.ok;
  CHECK(found_error);
  CHECK(rep2.psnr.count == 2);

  // writers produce files
  write_metrics_csv(rep, (dir / "report.csv").string());
  write_metrics_markdown({{"methodA", rep}, {"methodB", rep2}}, (dir / "report.md").string());
  CHECK(fs::exists(dir / "report.csv"));
  CHECK(fs::exists(dir / "report.md"));
  fs::remove_all(dir);
}

TEST_CASE("metric identities on identical inputs") {
  Rng rng(59);
  const Image x = random_image(rng, 16, 16);
  CHECK(psnr(x, x) == 100.0);
  CHECK(ssim(x, x) == 1.0);
  CHECK(gradient_ratio_r(x, x) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(saturation_sigma(x, x) == 0.0);
  CHECK(contrast_gain_c(x, x) == 0.0);
}
