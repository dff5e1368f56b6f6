#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace gfc {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Library-wide error type; the message is the user-facing diagnostic.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a deformation makes a tetrahedron (or a Cauchy-Born cell)
/// non-positive. Solvers catch it and shorten the trial step.
class InvertedElement : public Error {
 public:
  using Error::Error;
};

/// Integer site coordinates in units of half the cubic lattice constant.
/// Every FCC site, octahedral hole and decimated coarse vertex lives on this
/// grid, so it doubles as an exact key for hashing and symmetry operations.
struct GridPoint {
  std::int32_t x = 0;
  std::int32_t y = 0;
  std::int32_t z = 0;

  friend bool operator==(const GridPoint&, const GridPoint&) = default;
  friend auto operator<=>(const GridPoint&, const GridPoint&) = default;

  GridPoint operator+(const GridPoint& o) const { return {x + o.x, y + o.y, z + o.z}; }
  GridPoint operator-(const GridPoint& o) const { return {x - o.x, y - o.y, z - o.z}; }
  std::int64_t norm2() const {
    return std::int64_t(x) * x + std::int64_t(y) * y + std::int64_t(z) * z;
  }
  Vec3 to_position(double lattice_constant) const {
    return Vec3(x, y, z) * (0.5 * lattice_constant);
  }
};

struct GridPointHash {
  std::size_t operator()(const GridPoint& p) const noexcept {
    std::uint64_t h = (std::uint64_t(std::uint32_t(p.x)) * 0x9E3779B97F4A7C15ull) ^
                      (std::uint64_t(std::uint32_t(p.y)) * 0xC2B2AE3D27D4EB4Full) ^
                      (std::uint64_t(std::uint32_t(p.z)) * 0x165667B19E3779F9ull);
    h ^= h >> 29;
    return std::size_t(h);
  }
};

}  // namespace gfc
