#pragma once

#include <span>
#include <vector>

#include <Eigen/SparseCore>

#include "hc1/cross_section.hpp"

namespace hc1 {

// Discrete in-plane calculus on a CrossSection.
//
// With C the node-to-edge difference map, S = +1 on vertical and -1 on horizontal
// edges, and W the cut-edge weights:
//   perp_grad_2d = W S C,  plane_current = S C,  curl2d = C^T S,  -Delta_h = C^T W C.
// Hence curl2d(perp_grad_2d(w)) = -Delta_h w at interior nodes.

/// (d2 w, -d1 w) on domain edges. Throws if w is nonzero outside the interior.
VectorField2D perp_grad_2d(const ScalarField2D& w);

/// perp_grad_2d scaled by the inside fraction of each edge (the current carried by the edge).
VectorField2D plane_current(const ScalarField2D& w);

/// d1 v2 - d2 v1 at every node with four edges inside the array.
ScalarField2D curl2d(const VectorField2D& v);

/// -Delta_h w at interior nodes, zero elsewhere.
ScalarField2D neg_laplacian_2d(const ScalarField2D& w);

/// Compact -Delta_h over interior nodes (ordering of CrossSection::interior_nodes).
Eigen::SparseMatrix<double> laplacian_matrix(const CrossSection& cs);

std::vector<double> to_compact(const ScalarField2D& f);
ScalarField2D from_compact(const CrossSection& cs, std::span<const double> x);

/// Throws unless f vanishes at every non-interior node.
void check_dirichlet(const ScalarField2D& f);

double max_abs(const ScalarField2D& f);

}  // namespace hc1
