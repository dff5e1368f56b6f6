#include "gfc/blending.hpp"

namespace gfc {

const char* to_string(BlendShape shape) {
  return shape == BlendShape::cubic ? "cubic" : "quintic";
}

BlendShape blend_shape_from_string(const std::string& name) {
  if (name == "cubic") return BlendShape::cubic;
  if (name == "quintic") return BlendShape::quintic;
  throw Error("unknown blend profile '" + name + "'");
}

double BlendProfile::at_radius(double r) const {
  if (r >= r1) return 1.0;
  if (r <= r0) return 0.0;
  const double t = (r - r0) / (r1 - r0);
  if (shape == BlendShape::cubic) return t * t * (3.0 - 2.0 * t);
  return t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
}

BlendProfile make_blend(double r0, double r1, BlendShape shape) {
  if (!(r0 >= 0.0) || !(r1 >= r0)) throw Error("blend radii must satisfy 0 <= r0 <= r1");
  return {r0, r1, shape};
}

double blend_value(const BlendProfile& b, const Vec3& x) { return b(x); }

}  // namespace gfc
