#include <doctest.h>

#include <random>

#include "gfc/blending.hpp"

using namespace gfc;

TEST_CASE("endpoints and midpoint") {
  for (auto shape : {BlendShape::cubic, BlendShape::quintic}) {
    auto b = make_blend(2.0, 5.0, shape);
    CHECK(blend_value(b, Vec3(2.0, 0, 0)) == 0.0);
    CHECK(blend_value(b, Vec3(0, 0, 5.0)) == 1.0);
    CHECK(blend_value(b, Vec3(0, 3.5, 0)) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(blend_value(b, Vec3::Zero()) == 0.0);
    CHECK(blend_value(b, Vec3(10, 10, 10)) == 1.0);
  }
  CHECK_THROWS(make_blend(3.0, 2.0, BlendShape::quintic));
}

TEST_CASE("quintic is flat at both ends, cubic only to first order") {
  auto q = make_blend(2.0, 5.0, BlendShape::quintic);
  auto c = make_blend(2.0, 5.0, BlendShape::cubic);
  const double h = 1e-6;
  for (double r : {2.0, 5.0}) {
    CHECK(std::abs((q.at_radius(r + h) - q.at_radius(r - h)) / (2 * h)) <= 1e-6);
    CHECK(std::abs((c.at_radius(r + h) - c.at_radius(r - h)) / (2 * h)) <= 1e-5);
  }
  // Second derivative: quintic continuous (0) at r0, cubic jumps to 6/w^2.
  const double k = 1e-3;
  auto d2 = [&](const BlendProfile& b, double r) {
    return (b.at_radius(r + 2 * k) - 2 * b.at_radius(r + k) + b.at_radius(r)) / (k * k);
  };
  CHECK(std::abs(d2(q, 2.0)) < 1e-2);
  CHECK(d2(c, 2.0) == doctest::Approx(6.0 / 9.0).epsilon(1e-2));
}

TEST_CASE("bounded, monotone and radial") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  for (auto shape : {BlendShape::cubic, BlendShape::quintic}) {
    auto b = make_blend(1.5, 4.0, shape);
    double prev = -1.0;
    for (int i = 0; i <= 20000; ++i) {
      const double r = 6.0 * i / 20000.0;
      const double v = b.at_radius(r);
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      CHECK(v >= prev);
      prev = v;
    }
    for (int i = 0; i < 100; ++i) {
      Vec3 x(n(rng), n(rng), n(rng));
      const double r = x.norm();
      CHECK(blend_value(b, x) == b.at_radius(r));
    }
  }
  // Degenerate step.
  auto step = make_blend(0.0, 0.0, BlendShape::quintic);
  CHECK(blend_value(step, Vec3::Zero()) == 1.0);
}
