#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace hc1 {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

/// Planar shape Omega. contains() is the open set; boundary points are outside.
class Shape {
 public:
  enum class Kind { disk, rectangle, polygon };

  static Shape disk(double radius);
  static Shape rectangle(double width, double height);
  /// Simple polygon, either orientation, at least three vertices.
  static Shape polygon(std::vector<Vec2> vertices);

  Kind kind() const { return kind_; }
  double radius() const { return radius_; }
  double width() const { return width_; }
  double height() const { return height_; }
  const std::vector<Vec2>& vertices() const { return vertices_; }

  bool contains(Vec2 p) const;
  double boundary_distance(Vec2 p) const;
  Vec2 lower() const;
  Vec2 upper() const;
  double diameter() const;
  double area() const;
  double perimeter() const;
  std::string describe() const;

 private:
  Kind kind_ = Kind::disk;
  double radius_ = 0.0, width_ = 0.0, height_ = 0.0;
  std::vector<Vec2> vertices_;
};

enum class GridAlignment { cell_centered, node_centered };

/// cut_edge: symmetric second-order Dirichlet weights on edges crossing the boundary.
/// staircase: plain masking, every edge has unit weight.
enum class BoundaryTreatment { cut_edge, staircase };

struct CrossSectionOptions {
  GridAlignment alignment = GridAlignment::cell_centered;
  BoundaryTreatment boundary = BoundaryTreatment::cut_edge;
  double min_fraction = 1e-3;
};

/// Masked node grid over Omega with one ring of exterior padding.
///
/// Edge storage: the vertical edge (i, j+1/2) and the horizontal edge (i+1/2, j)
/// are both stored at index(i, j). An edge belongs to the discrete domain when it
/// touches an interior node; its fraction is the part of the segment inside Omega.
class CrossSection {
 public:
  CrossSection() = default;

  const Shape& shape() const;
  double h() const;
  int nx() const;
  int ny() const;
  Vec2 origin() const;
  Vec2 node(int i, int j) const;
  std::size_t size() const { return static_cast<std::size_t>(nx()) * ny(); }
  std::size_t index(int i, int j) const { return static_cast<std::size_t>(i) + static_cast<std::size_t>(nx()) * j; }

  bool interior(int i, int j) const;
  const std::vector<std::uint8_t>& mask() const;
  const std::vector<int>& boundary_nodes() const;
  /// Cut edges: grid-line midpoint quadrature from the edge fractions. Staircase: node count times h^2.
  double area() const;
  GridAlignment alignment() const;
  BoundaryTreatment boundary_treatment() const;

  /// Interior nodes in lexicographic order (i fastest), as flat indices.
  const std::vector<int>& interior_nodes() const;
  int interior_count() const;
  /// Compact position of a flat node index, -1 when not interior.
  int compact(std::size_t flat) const;

  double fraction_v(int i, int j) const;
  double fraction_h(int i, int j) const;
  /// 1/fraction on domain edges, 0 elsewhere.
  double weight_v(int i, int j) const;
  double weight_h(int i, int j) const;
  bool edge_v_in_domain(int i, int j) const { return fraction_v(i, j) > 0.0; }
  bool edge_h_in_domain(int i, int j) const { return fraction_h(i, j) > 0.0; }

  bool valid() const { return static_cast<bool>(d_); }
  bool same_grid(const CrossSection& o) const { return d_ == o.d_; }

 private:
  struct Data;
  std::shared_ptr<const Data> d_;
  friend CrossSection build_cross_section(const Shape&, double, const CrossSectionOptions&);
};

CrossSection build_cross_section(const Shape& shape, double h, const CrossSectionOptions& opts = {});

/// Node-located scalar on a cross-section grid.
struct ScalarField2D {
  CrossSection cs;
  std::vector<double> v;

  ScalarField2D() = default;
  explicit ScalarField2D(const CrossSection& c) : cs(c), v(c.size(), 0.0) {}
  double& operator()(int i, int j) { return v[cs.index(i, j)]; }
  double operator()(int i, int j) const { return v[cs.index(i, j)]; }
};

/// Edge-located vector: v1 on vertical edges (i, j+1/2), v2 on horizontal edges (i+1/2, j).
struct VectorField2D {
  CrossSection cs;
  std::vector<double> v1;
  std::vector<double> v2;

  VectorField2D() = default;
  explicit VectorField2D(const CrossSection& c) : cs(c), v1(c.size(), 0.0), v2(c.size(), 0.0) {}
};

}  // namespace hc1
