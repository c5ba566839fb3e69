#include "hc1/staggered.hpp"

#include <algorithm>
#include <cmath>

#include "hc1/error.hpp"

namespace hc1 {

Vec3 stagger_offset(Stagger s) {
  switch (s) {
    case Stagger::node: return {0.0, 0.0, 0.0};
    case Stagger::edge_x: return {0.5, 0.0, 0.0};
    case Stagger::edge_y: return {0.0, 0.5, 0.0};
    case Stagger::edge_z: return {0.0, 0.0, 0.5};
    case Stagger::face_x: return {0.0, 0.5, 0.5};
    case Stagger::face_y: return {0.5, 0.0, 0.5};
    case Stagger::face_z: return {0.5, 0.5, 0.0};
    case Stagger::cell: return {0.5, 0.5, 0.5};
  }
  return {0.0, 0.0, 0.0};
}

Stagger edge_stagger(int axis) {
  static constexpr Stagger e[3] = {Stagger::edge_x, Stagger::edge_y, Stagger::edge_z};
  return e[axis];
}

Stagger face_stagger(int axis) {
  static constexpr Stagger f[3] = {Stagger::face_x, Stagger::face_y, Stagger::face_z};
  return f[axis];
}

Vec3 Grid3::position(Stagger s, int i, int j, int k) const {
  const Vec3 o = stagger_offset(s);
  return {origin[0] + (i + o[0]) * h[0], origin[1] + (j + o[1]) * h[1], origin[2] + (k + o[2]) * h[2]};
}

namespace {

// Value at (i,j,k) shifted by d along axis, zero outside the array.
struct Shifted {
  const Grid3& g;
  const std::vector<double>& a;
  double operator()(int i, int j, int k) const {
    if (i < 0 || j < 0 || k < 0 || i >= g.n[0] || j >= g.n[1] || k >= g.n[2]) return 0.0;
    return a[g.index(i, j, k)];
  }
};

template <class F>
void for_each(const Grid3& g, F&& f) {
  for (int k = 0; k < g.n[2]; ++k)
    for (int j = 0; j < g.n[1]; ++j)
      for (int i = 0; i < g.n[0]; ++i) f(i, j, k, g.index(i, j, k));
}

}  // namespace

VectorField3D grad3d(const ScalarField3D& f) {
  require(f.loc == Stagger::node, "grad3d expects a node field");
  const Grid3& g = f.grid;
  VectorField3D out(g, VectorLayout::edges);
  Shifted s{g, f.v};
  for_each(g, [&](int i, int j, int k, std::size_t n) {
    const double c = f.v[n];
    out.c[0][n] = (s(i + 1, j, k) - c) / g.h[0];
    out.c[1][n] = (s(i, j + 1, k) - c) / g.h[1];
    out.c[2][n] = (s(i, j, k + 1) - c) / g.h[2];
  });
  return out;
}

VectorField3D curl3d(const VectorField3D& v) {
  const Grid3& g = v.grid;
  for (const auto& c : v.c) require(c.size() == g.size(), "vector field does not match its grid");
  const double hx = g.h[0], hy = g.h[1], hz = g.h[2];
  Shifted X{g, v.c[0]}, Y{g, v.c[1]}, Z{g, v.c[2]};
  if (v.layout == VectorLayout::edges) {
    VectorField3D out(g, VectorLayout::faces);
    for_each(g, [&](int i, int j, int k, std::size_t n) {
      out.c[0][n] = (Z(i, j + 1, k) - Z(i, j, k)) / hy - (Y(i, j, k + 1) - Y(i, j, k)) / hz;
      out.c[1][n] = (X(i, j, k + 1) - X(i, j, k)) / hz - (Z(i + 1, j, k) - Z(i, j, k)) / hx;
      out.c[2][n] = (Y(i + 1, j, k) - Y(i, j, k)) / hx - (X(i, j + 1, k) - X(i, j, k)) / hy;
    });
    return out;
  }
  VectorField3D out(g, VectorLayout::edges);
  for_each(g, [&](int i, int j, int k, std::size_t n) {
    out.c[0][n] = (Z(i, j, k) - Z(i, j - 1, k)) / hy - (Y(i, j, k) - Y(i, j, k - 1)) / hz;
    out.c[1][n] = (X(i, j, k) - X(i, j, k - 1)) / hz - (Z(i, j, k) - Z(i - 1, j, k)) / hx;
    out.c[2][n] = (Y(i, j, k) - Y(i - 1, j, k)) / hx - (X(i, j, k) - X(i, j - 1, k)) / hy;
  });
  return out;
}

ScalarField3D div3d(const VectorField3D& v) {
  const Grid3& g = v.grid;
  for (const auto& c : v.c) require(c.size() == g.size(), "vector field does not match its grid");
  Shifted X{g, v.c[0]}, Y{g, v.c[1]}, Z{g, v.c[2]};
  if (v.layout == VectorLayout::faces) {
    ScalarField3D out(g, Stagger::cell);
    for_each(g, [&](int i, int j, int k, std::size_t n) {
      out.v[n] = (X(i + 1, j, k) - X(i, j, k)) / g.h[0] + (Y(i, j + 1, k) - Y(i, j, k)) / g.h[1] +
                 (Z(i, j, k + 1) - Z(i, j, k)) / g.h[2];
    });
    return out;
  }
  ScalarField3D out(g, Stagger::node);
  for_each(g, [&](int i, int j, int k, std::size_t n) {
    out.v[n] = (X(i, j, k) - X(i - 1, j, k)) / g.h[0] + (Y(i, j, k) - Y(i, j - 1, k)) / g.h[1] +
               (Z(i, j, k) - Z(i, j, k - 1)) / g.h[2];
  });
  return out;
}

ScalarField3D neg_laplacian_3d(const ScalarField3D& f) {
  const Grid3& g = f.grid;
  ScalarField3D out(g, f.loc);
  Shifted s{g, f.v};
  const double ix = 1.0 / (g.h[0] * g.h[0]), iy = 1.0 / (g.h[1] * g.h[1]), iz = 1.0 / (g.h[2] * g.h[2]);
  for_each(g, [&](int i, int j, int k, std::size_t n) {
    const double c = 2.0 * f.v[n];
    out.v[n] = ix * (c - s(i + 1, j, k) - s(i - 1, j, k)) + iy * (c - s(i, j + 1, k) - s(i, j - 1, k)) +
               iz * (c - s(i, j, k + 1) - s(i, j, k - 1));
  });
  return out;
}

GaugeFn symmetric_gauge() {
  return [](const Vec3& x) { return Vec3{-0.5 * x[1], 0.5 * x[0], 0.0}; };
}

VectorField3D sample_gauge(const Grid3& g, const GaugeFn& a) {
  VectorField3D out(g, VectorLayout::faces);
  for (int d = 0; d < 3; ++d) {
    const Stagger s = face_stagger(d);
    for_each(g, [&](int i, int j, int k, std::size_t n) { out.c[d][n] = a(g.position(s, i, j, k))[d]; });
  }
  return out;
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double max_abs(const VectorField3D& v) {
  double m = 0.0;
  for (const auto& c : v.c) m = std::max(m, max_abs(c));
  return m;
}

}  // namespace hc1
