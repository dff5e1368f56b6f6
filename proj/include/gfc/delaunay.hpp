#pragma once

#include <span>
#include <vector>

#include "gfc/common.hpp"

namespace gfc {

/// Delaunay tetrahedralization of integer grid points (incremental
/// Bowyer-Watson). Predicates are exact; cospherical ties are broken by a
/// symbolic perturbation of the lifted heights that is invariant under the
/// two-fold rotation (x, y, z) -> (y, x, -z) about [110], so point sets with
/// that symmetry get symmetric connectivity. The result is a regular
/// refinement of the Delaunay subdivision with no flat tetrahedra. Identical
/// point sets give identical connectivity regardless of input order, up to
/// vertex numbering.
///
/// Returned tetrahedra index into `points` and are positively oriented.
/// Coordinates must satisfy |c| < 2^19.
std::vector<std::array<int, 4>> delaunay_tetrahedralize(std::span<const GridPoint> points);

/// Exact predicates, exposed for testing.
namespace predicates {
/// det[b-a; c-a; d-a] sign: +1, 0, -1.
int orient(const GridPoint& a, const GridPoint& b, const GridPoint& c, const GridPoint& d);
/// +1 if e lies strictly inside the circumsphere of positively oriented abcd,
/// -1 if strictly outside, 0 if cospherical (no perturbation).
int insphere(const GridPoint& a, const GridPoint& b, const GridPoint& c, const GridPoint& d,
             const GridPoint& e);
}  // namespace predicates

}  // namespace gfc
