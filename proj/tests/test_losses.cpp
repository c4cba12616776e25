#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "hazegan/errors.hpp"
#include "hazegan/losses.hpp"
#include "hazegan/rng.hpp"

using namespace hazegan;
using ad::Var;

namespace {

Tensor random_tensor(Shape s, uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  Tensor t(s);
  for (int64_t i = 0; i < t.numel(); ++i) t.data()[i] = float(rng.normal() * scale);
  return t;
}

// D(I, X) = sum(u .* X) per sample; with ||u||_2 = 1 its input gradient is
// exactly u everywhere.
struct LinearScorer : Scorer {
  Tensor u;  // (1,C,H,W)
  double gain = 1.0;
  Var score(const Var& /*condition*/, const Var& candidate) override {
    Var prod = ad::mul(candidate, ad::constant(u));
    return ad::affine(ad::sum_per_sample(prod), float(gain), 0.f);
  }
};

struct ConstantScorer : Scorer {
  float c = 0.f;
  Var score(const Var& condition, const Var& /*candidate*/) override {
    return ad::constant(Tensor::full(Shape(condition->value.shape().n, 1, 1, 1), c));
  }
};

// Scorer that depends on the condition too (for conditioning checks).
struct CondScorer : Scorer {
  Var score(const Var& condition, const Var& candidate) override {
    return ad::sum_per_sample(ad::mul(condition, candidate));
  }
};

struct IdentityGenerator : GeneratorLike {
  Var forward(const Var& input) override { return ad::affine(input, 1.f, 0.f); }
};

// Emits a fixed tensor regardless of the input.
struct FixedGenerator : GeneratorLike {
  Tensor out;
  Var forward(const Var& /*input*/) override { return ad::constant(out); }
};

Tensor unit_norm_tensor(Shape s, uint64_t seed) {
  Tensor u = random_tensor(s, seed);
  double norm = 0;
  for (int64_t i = 0; i < u.numel(); ++i) norm += double(u.data()[i]) * u.data()[i];
  norm = std::sqrt(norm);
  for (int64_t i = 0; i < u.numel(); ++i) u.data()[i] = float(u.data()[i] / norm);
  return u;
}

}  // namespace

TEST_CASE("l1 loss identities and brute-force oracle") {
  const Shape s(2, 3, 8, 8);
  const Tensor a = random_tensor(s, 1);
  CHECK(l1_loss(a, a) == 0.0);

  const Tensor zeros = Tensor::zeros(s);
  const Tensor halves = Tensor::full(s, 0.5f);
  CHECK(l1_loss(zeros, halves) == doctest::Approx(0.5).epsilon(1e-7));

  const Tensor b = random_tensor(s, 2);
  double oracle = 0;
  for (int64_t i = 0; i < a.numel(); ++i) {
    oracle += std::abs(double(a.data()[i]) - double(b.data()[i]));
  }
  oracle /= double(a.numel());
  CHECK(l1_loss(a, b) == doctest::Approx(oracle).epsilon(1e-6));

  CHECK_THROWS_AS(l1_loss(a, random_tensor(Shape(2, 3, 4, 4), 3)), ShapeError);
}

TEST_CASE("feature extractor: fallback, determinism and tap validation") {
  const FeatureExtractor phi = FeatureExtractor::random_features("conv2_2", 42);
  const Tensor x = random_tensor(Shape(1, 3, 16, 16), 5, 0.5);
  const Tensor f1 = phi.features(x);
  const Tensor f2 = FeatureExtractor::random_features("conv2_2", 42).features(x);
  CHECK(f1.shape() == f2.shape());
  CHECK(f1.shape().c == 128);
  CHECK(f1.shape().h == 8);  // one pool before block 2
  for (int64_t i = 0; i < f1.numel(); ++i) CHECK(f1.data()[i] == f2.data()[i]);

  CHECK_THROWS_AS(FeatureExtractor::random_features("conv9_1", 1), ConfigurationError);
  CHECK_THROWS_AS(FeatureExtractor::from_weights_file("/nonexistent/w.bin", "conv1_1"),
                  ConfigurationError);

  std::vector<std::string> warnings;
  const FeatureExtractor fb = FeatureExtractor::configure("", "conv1_2", 7, &warnings);
  CHECK(warnings.size() == 1);
  CHECK(!fb.pretrained());
}

TEST_CASE("vgg loss identities and reduction oracle") {
  const FeatureExtractor phi = FeatureExtractor::random_features("conv1_2", 11);
  const Tensor a = random_tensor(Shape(1, 3, 16, 16), 6, 0.5);
  const Tensor b = random_tensor(Shape(1, 3, 16, 16), 7, 0.5);

  CHECK(vgg_loss(phi, a, a) == 0.0);
  CHECK(vgg_loss(phi, a, b) == doctest::Approx(vgg_loss(phi, b, a)).epsilon(1e-7));

  // brute-force reduction over the feature tensors
  const Tensor fa = phi.features(a);
  const Tensor fb = phi.features(b);
  double oracle = 0;
  for (int64_t i = 0; i < fa.numel(); ++i) {
    const double d = double(fa.data()[i]) - double(fb.data()[i]);
    oracle += d * d;
  }
  oracle /= double(fa.numel());
  CHECK(vgg_loss(phi, a, b) == doctest::Approx(oracle).epsilon(1e-5));
}

TEST_CASE("interpolation endpoints, midpoint and betweenness") {
  const Shape s(3, 2, 4, 4);
  const Tensor j = random_tensor(s, 8);
  const Tensor gi = random_tensor(s, 9);

  const Tensor end1 = interpolate(j, gi, 1.0);
  const Tensor end0 = interpolate(j, gi, 0.0);
  for (int64_t i = 0; i < j.numel(); ++i) {
    CHECK(end1.data()[i] == j.data()[i]);
    CHECK(end0.data()[i] == gi.data()[i]);
  }

  const Tensor ones = Tensor::full(s, 1.f);
  const Tensor zeros = Tensor::zeros(s);
  const Tensor mid = interpolate(ones, zeros, 0.5);
  for (int64_t i = 0; i < mid.numel(); ++i) CHECK(mid.data()[i] == 0.5f);

  CHECK_THROWS_AS(interpolate(j, gi, 1.5), InvalidParameterError);
  CHECK_THROWS_AS(interpolate(j, gi, -0.1), InvalidParameterError);

  Rng arng(10);
  std::vector<double> alphas = {arng.uniform(), arng.uniform(), arng.uniform()};
  const Tensor any = interpolate_per_sample(j, gi, alphas);
  for (int64_t i = 0; i < j.numel(); ++i) {
    const float lo = std::min(j.data()[i], gi.data()[i]);
    const float hi = std::max(j.data()[i], gi.data()[i]);
    CHECK(any.data()[i] >= lo - 1e-6f);
    CHECK(any.data()[i] <= hi + 1e-6f);
  }
}

TEST_CASE("gradient penalty closed forms") {
  const Shape s(4, 3, 8, 8);
  const Tensor cond = random_tensor(s, 20, 0.5);
  const Tensor j = random_tensor(s, 21, 0.5);
  const Tensor gi = random_tensor(s, 22, 0.5);

  LinearScorer unit;
  unit.u = unit_norm_tensor(Shape(1, 3, 8, 8), 23);
  Rng rng1(1);
  CHECK(gradient_penalty_value(unit, cond, j, gi, rng1) <= 1e-10);

  ConstantScorer constant;
  constant.c = 3.25f;
  Rng rng2(2);
  CHECK(gradient_penalty_value(constant, cond, j, gi, rng2) ==
        doctest::Approx(1.0).epsilon(1e-5));

  LinearScorer tripled = unit;
  tripled.gain = 3.0;
  Rng rng3(3);
  CHECK(gradient_penalty_value(tripled, cond, j, gi, rng3) == doctest::Approx(4.0).epsilon(1e-5));
}

TEST_CASE("critic objective identities") {
  const Shape s(4, 3, 8, 8);
  const Tensor cond = random_tensor(s, 30, 0.5);
  const Tensor j = random_tensor(s, 31, 0.5);
  IdentityGenerator passthrough;

  // constant critic: score terms cancel, objective = lambda3 * 1
  {
    ConstantScorer constant;
    constant.c = -1.5f;
    LossWeights w;
    w.lambda3 = 10.0;
    Rng rng(4);
    CriticObjectiveParts parts;
    Var obj = critic_objective(constant, passthrough, cond, j, w, rng, &parts);
    CHECK(obj->value.item() == doctest::Approx(10.0).epsilon(1e-4));
    CHECK(parts.penalty == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(parts.wasserstein == doctest::Approx(0.0));
  }

  // lambda3 = 0 and J = G(I): identical distributions, objective 0
  {
    FixedGenerator fixed;
    fixed.out = j;
    LinearScorer unit;
    unit.u = unit_norm_tensor(Shape(1, 3, 8, 8), 33);
    LossWeights w;
    w.lambda3 = 0.0;
    Rng rng(5);
    Var obj = critic_objective(unit, fixed, cond, j, w, rng);
    CHECK(obj->value.item() == 0.0);
  }

  // unit-norm linear critic, lambda3 = 10: penalty vanishes so the objective
  // equals mean<u, G(I)> - mean<u, J> computed by an independent loop
  {
    IdentityGenerator gen;
    LinearScorer unit;
    unit.u = unit_norm_tensor(Shape(1, 3, 8, 8), 34);
    LossWeights w;
    w.lambda3 = 10.0;
    Rng rng(6);
    Var obj = critic_objective(unit, gen, cond, j, w, rng);
    double fake = 0, real = 0;
    const int64_t per = cond.numel() / cond.shape().n;
    for (int n = 0; n < cond.shape().n; ++n) {
      for (int64_t i = 0; i < per; ++i) {
        fake += double(unit.u.data()[i]) * cond.data()[n * per + i];  // G(I) = I
        real += double(unit.u.data()[i]) * j.data()[n * per + i];
      }
    }
    fake /= cond.shape().n;
    real /= cond.shape().n;
    CHECK(obj->value.item() == doctest::Approx(fake - real).epsilon(1e-4));
  }

  // mismatched condition/reference batches are rejected
  {
    ConstantScorer constant;
    LossWeights w;
    Rng rng(7);
    CHECK_THROWS_AS(
        critic_objective(constant, passthrough, Tensor(Shape(1, 3, 8, 8)), j, w, rng),
        ShapeError);
  }
}

TEST_CASE("generator objective identities") {
  const Shape s(2, 3, 16, 16);
  const Tensor cond = random_tensor(s, 40, 0.5);
  const Tensor j = random_tensor(s, 41, 0.5);
  const FeatureExtractor phi = FeatureExtractor::random_features("conv1_1", 50);

  // lambda1 = lambda2 = 0: pure adversarial term
  {
    IdentityGenerator gen;
    LinearScorer unit;
    unit.u = unit_norm_tensor(Shape(1, 3, 16, 16), 42);
    LossWeights w;
    w.lambda1 = w.lambda2 = 0.0;
    GeneratorObjectiveParts parts;
    Var obj = generator_objective(unit, gen, cond, j, phi, w, &parts);
    CHECK(obj->value.item() == doctest::Approx(-parts.adversarial).epsilon(1e-7));
  }

  // G(I) = J exactly and D = 0: every term vanishes
  {
    FixedGenerator fixed;
    fixed.out = j;
    ConstantScorer zero;
    LossWeights w;
    Var obj = generator_objective(zero, fixed, cond, j, phi, w);
    CHECK(obj->value.item() == 0.0);
  }

  // lambda1 = lambda2 = 1, D = 0: equals vgg + l1 computed separately
  {
    IdentityGenerator gen;
    ConstantScorer zero;
    LossWeights w;
    w.lambda1 = 1.0;
    w.lambda2 = 1.0;
    w.lambda3 = 0.0;
    Var obj = generator_objective(zero, gen, cond, j, phi, w);
    const double expected = vgg_loss(phi, j, cond) + l1_loss(j, cond);
    CHECK(obj->value.item() == doctest::Approx(expected).epsilon(1e-6));
  }
}

TEST_CASE("wasserstein estimate identities") {
  const Shape s(3, 3, 8, 8);
  const Tensor cond = random_tensor(s, 60, 0.5);
  const Tensor j = random_tensor(s, 61, 0.5);

  FixedGenerator fixed;
  fixed.out = j;
  LinearScorer unit;
  unit.u = unit_norm_tensor(Shape(1, 3, 8, 8), 62);
  CHECK(wasserstein_estimate(unit, fixed, cond, j) == 0.0);

  ConstantScorer constant;
  constant.c = 5.f;
  IdentityGenerator gen;
  CHECK(wasserstein_estimate(constant, gen, cond, j) == 0.0);

  // algebraic identity: critic_objective with lambda3 = 0 is the exact
  // negation of the wasserstein estimate
  LossWeights w;
  w.lambda3 = 0.0;
  Rng rng(9);
  Var obj = critic_objective(unit, gen, cond, j, w, rng);
  CHECK(obj->value.item() == -wasserstein_estimate(unit, gen, cond, j));
}

TEST_CASE("loss weights validation") {
  LossWeights w;
  w.lambda2 = -1.0;
  CHECK_THROWS_AS(w.validate(), InvalidParameterError);
  w = LossWeights{};
  w.lambda1 = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(w.validate(), InvalidParameterError);
}
