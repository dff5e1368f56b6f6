#pragma once

#include "gfc/common.hpp"

namespace gfc {

enum class BlendShape { cubic, quintic };

const char* to_string(BlendShape shape);
BlendShape blend_shape_from_string(const std::string& name);

/// Radial blending function: 0 inside r0, 1 outside r1, polynomial in
/// t = (|x| - r0) / (r1 - r0) between. r0 == r1 gives a step at r1.
struct BlendProfile {
  double r0 = 0.0;
  double r1 = 0.0;
  BlendShape shape = BlendShape::quintic;

  double at_radius(double r) const;
  double operator()(const Vec3& x) const { return at_radius(x.norm()); }
};

BlendProfile make_blend(double r0, double r1, BlendShape shape);

double blend_value(const BlendProfile& b, const Vec3& x);

}  // namespace gfc
