#include <doctest.h>

#include <cmath>

#include "hazegan/errors.hpp"
#include "hazegan/haze_model.hpp"
#include "hazegan/rng.hpp"

using namespace hazegan;

namespace {

Image random_image(Rng& rng, int h, int w) {
  Image img(h, w);
  for (float& v : img.px) v = float(rng.uniform());
  return img;
}

FloatMap random_depth(Rng& rng, int h, int w, double lo, double hi) {
  FloatMap d(h, w);
  for (float& v : d.v) v = float(rng.uniform(lo, hi));
  return d;
}

}  // namespace

TEST_CASE("transmission closed forms") {
  FloatMap depth(4, 4, 2.f);
  const FloatMap t0 = transmission(depth, 0.0);
  for (float v : t0.v) CHECK(v == 1.f);

  FloatMap zero_depth(4, 4, 0.f);
  const FloatMap t1 = transmission(zero_depth, 3.7);
  for (float v : t1.v) CHECK(v == 1.f);

  FloatMap unit_depth(4, 4, 1.f);
  const FloatMap t2 = transmission(unit_depth, std::log(2.0));
  for (float v : t2.v) CHECK(v == doctest::Approx(0.5).epsilon(1e-6));

  CHECK_THROWS_AS(transmission(depth, -1.0), InvalidParameterError);
  FloatMap bad(2, 2, -0.5f);
  CHECK_THROWS_AS(transmission(bad, 1.0), InvalidParameterError);
  bad.v[0] = std::nanf("");
  CHECK_THROWS_AS(transmission(bad, 1.0), InvalidParameterError);
}

TEST_CASE("transmission is non-increasing in k and depth") {
  Rng rng(4);
  const FloatMap d1 = random_depth(rng, 6, 6, 0.1, 2.0);
  FloatMap d2 = d1;
  for (float& v : d2.v) v += 0.5f;
  const FloatMap ta = transmission(d1, 0.7);
  const FloatMap tb = transmission(d1, 1.4);
  const FloatMap tc = transmission(d2, 0.7);
  for (size_t i = 0; i < ta.v.size(); ++i) {
    CHECK(tb.v[i] <= ta.v[i]);
    CHECK(tc.v[i] <= ta.v[i]);
  }
}

TEST_CASE("synthesize_haze endpoint cases") {
  Rng rng(7);
  const Image clear = random_image(rng, 8, 8);
  const FloatMap depth = random_depth(rng, 8, 8, 0.2, 1.5);

  HazeParams none;
  none.k = 0.0;
  none.airlight = {0.9f, 0.9f, 0.9f};
  const Image same = synthesize_haze(clear, depth, none);
  for (size_t i = 0; i < clear.px.size(); ++i) CHECK(same.px[i] == doctest::Approx(clear.px[i]));

  HazeParams dense;
  dense.k = 100.0;
  dense.airlight = {0.8f, 0.7f, 0.6f};
  FloatMap deep(8, 8, 10.f);
  const Image white = synthesize_haze(clear, deep, dense);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      for (int c = 0; c < 3; ++c) {
        CHECK(white.at(y, x, c) == doctest::Approx(dense.airlight[size_t(c)]).epsilon(1e-6));
      }
    }
  }

  // scalar case: 0.8 * 0.5 + 1.0 * 0.5 = 0.9
  Image px(1, 1);
  px.at(0, 0, 0) = px.at(0, 0, 1) = px.at(0, 0, 2) = 0.8f;
  FloatMap d(1, 1, float(std::log(2.0)));  // t = 0.5 at k = 1
  HazeParams p;
  p.k = 1.0;
  p.airlight = {1.f, 1.f, 1.f};
  const Image hz = synthesize_haze(px, d, p);
  CHECK(hz.at(0, 0, 0) == doctest::Approx(0.9).epsilon(1e-6));

  FloatMap wrong(4, 4, 1.f);
  CHECK_THROWS_AS(synthesize_haze(clear, wrong, p), ShapeError);
}

TEST_CASE("restore inverts synthesize where transmission is above the floor") {
  Rng rng(11);
  for (int round = 0; round < 5; ++round) {
    const Image clear = random_image(rng, 12, 12);
    const FloatMap depth = random_depth(rng, 12, 12, 0.0, 2.5);
    HazeParams p;
    p.k = rng.uniform(0.2, 1.2);
    const float a = float(rng.uniform(0.6, 1.0));
    p.airlight = {a, a, a};
    const double t_floor = 0.1;

    const Image hazy = synthesize_haze(clear, depth, p);
    const FloatMap t = transmission(depth, p.k);
    const Image restored = restore_with_transmission(hazy, t, p.airlight, t_floor);
    for (int y = 0; y < 12; ++y) {
      for (int x = 0; x < 12; ++x) {
        if (t.at(y, x) < t_floor) continue;
        for (int c = 0; c < 3; ++c) {
          CHECK(std::abs(restored.at(y, x, c) - clear.at(y, x, c)) <= 1e-6);
        }
      }
    }
  }
}

TEST_CASE("restore special cases and validation") {
  Rng rng(13);
  const Image hazy = random_image(rng, 6, 6);
  FloatMap ones(6, 6, 1.f);
  const Image same = restore_with_transmission(hazy, ones, {0.5f, 0.5f, 0.5f}, 0.1);
  for (size_t i = 0; i < hazy.px.size(); ++i) {
    CHECK(same.px[i] == doctest::Approx(hazy.px[i]).epsilon(1e-7));
  }

  // scalar inversion: (0.9 - 1.0) / 0.5 + 1.0 = 0.8
  Image px(1, 1);
  px.at(0, 0, 0) = px.at(0, 0, 1) = px.at(0, 0, 2) = 0.9f;
  FloatMap half(1, 1, 0.5f);
  const Image back = restore_with_transmission(px, half, {1.f, 1.f, 1.f}, 0.1);
  CHECK(back.at(0, 0, 0) == doctest::Approx(0.8).epsilon(1e-6));

  CHECK_THROWS_AS(restore_with_transmission(px, half, {1.f, 1.f, 1.f}, 0.0),
                  InvalidParameterError);
  CHECK_THROWS_AS(restore_with_transmission(px, half, {1.f, 1.f, 1.f}, -0.2),
                  InvalidParameterError);
}

TEST_CASE("increasing k moves every pixel toward the airlight") {
  Rng rng(17);
  const Image clear = random_image(rng, 8, 8);
  const FloatMap depth = random_depth(rng, 8, 8, 0.1, 2.0);
  HazeParams p1, p2;
  p1.airlight = p2.airlight = {0.85f, 0.8f, 0.75f};
  p1.k = 0.4;
  p2.k = 1.3;
  const Image h1 = synthesize_haze(clear, depth, p1);
  const Image h2 = synthesize_haze(clear, depth, p2);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      for (int c = 0; c < 3; ++c) {
        const float a = p1.airlight[size_t(c)];
        CHECK(std::abs(h2.at(y, x, c) - a) <= std::abs(h1.at(y, x, c) - a) + 1e-6f);
      }
    }
  }
}

TEST_CASE("range preservation") {
  Rng rng(19);
  for (int round = 0; round < 3; ++round) {
    const Image clear = random_image(rng, 10, 10);
    const FloatMap depth = random_depth(rng, 10, 10, 0.0, 3.0);
    HazeParams p;
    p.k = rng.uniform(0.0, 2.0);
    p.airlight = {float(rng.uniform()), float(rng.uniform()), float(rng.uniform())};
    const Image hazy = synthesize_haze(clear, depth, p);
    for (float v : hazy.px) {
      CHECK(v >= 0.f);
      CHECK(v <= 1.f);
    }
    const Image restored =
        restore_with_transmission(hazy, transmission(depth, p.k), p.airlight, 0.1);
    for (float v : restored.px) {
      CHECK(v >= 0.f);
      CHECK(v <= 1.f);
    }
  }
}

TEST_CASE("haze params validation") {
  HazeParams p;
  p.k = -0.1;
  CHECK_THROWS_AS(p.validate(), InvalidParameterError);
  p.k = 1.0;
  p.airlight = {1.2f, 0.5f, 0.5f};
  CHECK_THROWS_AS(p.validate(), InvalidParameterError);
}
