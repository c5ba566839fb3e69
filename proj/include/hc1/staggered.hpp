#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <vector>

namespace hc1 {

using Index3 = std::array<int, 3>;
using Vec3 = std::array<double, 3>;

/// Yee placement. Offsets in cell units: edge_x (1/2,0,0), face_x (0,1/2,1/2), cell (1/2,1/2,1/2).
enum class Stagger { node, edge_x, edge_y, edge_z, face_x, face_y, face_z, cell };

Vec3 stagger_offset(Stagger s);
Stagger edge_stagger(int axis);
Stagger face_stagger(int axis);

/// Box lattice. Every staggered array has n[0]*n[1]*n[2] entries; values beyond the
/// array are taken as zero by all difference operators.
struct Grid3 {
  Index3 n{0, 0, 0};
  Vec3 h{0.0, 0.0, 0.0};
  Vec3 origin{0.0, 0.0, 0.0};

  std::size_t size() const { return static_cast<std::size_t>(n[0]) * n[1] * n[2]; }
  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) + static_cast<std::size_t>(n[0]) * (static_cast<std::size_t>(j) + static_cast<std::size_t>(n[1]) * k);
  }
  Vec3 position(Stagger s, int i, int j, int k) const;
  double cell_volume() const { return h[0] * h[1] * h[2]; }
  bool operator==(const Grid3&) const = default;
};

struct ScalarField3D {
  Grid3 grid;
  Stagger loc = Stagger::node;
  std::vector<double> v;

  ScalarField3D() = default;
  ScalarField3D(const Grid3& g, Stagger s) : grid(g), loc(s), v(g.size(), 0.0) {}
  double& operator()(int i, int j, int k) { return v[grid.index(i, j, k)]; }
  double operator()(int i, int j, int k) const { return v[grid.index(i, j, k)]; }
};

enum class VectorLayout { edges, faces };

struct VectorField3D {
  Grid3 grid;
  VectorLayout layout = VectorLayout::faces;
  std::array<std::vector<double>, 3> c;

  VectorField3D() = default;
  VectorField3D(const Grid3& g, VectorLayout l) : grid(g), layout(l) {
    for (auto& x : c) x.assign(g.size(), 0.0);
  }
  Stagger stagger(int axis) const { return layout == VectorLayout::edges ? edge_stagger(axis) : face_stagger(axis); }
};

/// Forward differences, node -> edges.
VectorField3D grad3d(const ScalarField3D& f);
/// Edges -> faces with forward differences, faces -> edges with backward differences.
/// The two are transposes of each other.
VectorField3D curl3d(const VectorField3D& v);
/// Faces -> cells (forward), edges -> nodes (backward, negative transpose of grad3d).
ScalarField3D div3d(const VectorField3D& v);
/// 7-point -Delta on any single sublattice.
ScalarField3D neg_laplacian_3d(const ScalarField3D& f);

using GaugeFn = std::function<Vec3(const Vec3&)>;

/// a(x) = (-x2, x1, 0)/2.
GaugeFn symmetric_gauge();
/// Components sampled at face centres.
VectorField3D sample_gauge(const Grid3& g, const GaugeFn& a);

double max_abs(const std::vector<double>& v);
double max_abs(const VectorField3D& v);

}  // namespace hc1
