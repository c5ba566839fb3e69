#include "hc1/cross_section.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>
#include <sstream>

#include "hc1/error.hpp"

namespace hc1 {

namespace {

double segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0.0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(p.x - (a.x + t * dx), p.y - (a.y + t * dy));
}

}  // namespace

// ============================================================================
// Shape
// ============================================================================

Shape Shape::disk(double radius) {
  require(std::isfinite(radius) && radius > 0.0, "disk radius must be positive");
  Shape s;
  s.kind_ = Kind::disk;
  s.radius_ = radius;
  return s;
}

Shape Shape::rectangle(double width, double height) {
  require(std::isfinite(width) && std::isfinite(height) && width > 0.0 && height > 0.0,
          "rectangle width and height must be positive");
  Shape s;
  s.kind_ = Kind::rectangle;
  s.width_ = width;
  s.height_ = height;
  return s;
}

Shape Shape::polygon(std::vector<Vec2> vertices) {
  require(vertices.size() >= 3, "polygon needs at least three vertices");
  for (const auto& v : vertices) require(std::isfinite(v.x) && std::isfinite(v.y), "polygon vertex not finite");
  Shape s;
  s.kind_ = Kind::polygon;
  s.vertices_ = std::move(vertices);
  require(s.area() > 0.0, "polygon has zero area");
  return s;
}

bool Shape::contains(Vec2 p) const {
  switch (kind_) {
    case Kind::disk:
      return p.x * p.x + p.y * p.y < radius_ * radius_;
    case Kind::rectangle:
      return std::abs(p.x) < 0.5 * width_ && std::abs(p.y) < 0.5 * height_;
    case Kind::polygon: {
      if (boundary_distance(p) <= 1e-14 * diameter()) return false;
      bool in = false;
      const std::size_t n = vertices_.size();
      for (std::size_t a = 0, b = n - 1; a < n; b = a++) {
        const Vec2 va = vertices_[a], vb = vertices_[b];
        if ((va.y > p.y) != (vb.y > p.y) && p.x < (vb.x - va.x) * (p.y - va.y) / (vb.y - va.y) + va.x) in = !in;
      }
      return in;
    }
  }
  return false;
}

double Shape::boundary_distance(Vec2 p) const {
  switch (kind_) {
    case Kind::disk:
      return std::abs(radius_ - std::hypot(p.x, p.y));
    case Kind::rectangle: {
      const double hx = 0.5 * width_, hy = 0.5 * height_;
      const Vec2 c[4] = {{-hx, -hy}, {hx, -hy}, {hx, hy}, {-hx, hy}};
      double d = segment_distance(p, c[3], c[0]);
      for (int k = 0; k < 3; ++k) d = std::min(d, segment_distance(p, c[k], c[k + 1]));
      return d;
    }
    case Kind::polygon: {
      double d = segment_distance(p, vertices_.back(), vertices_.front());
      for (std::size_t k = 0; k + 1 < vertices_.size(); ++k) d = std::min(d, segment_distance(p, vertices_[k], vertices_[k + 1]));
      return d;
    }
  }
  return 0.0;
}

Vec2 Shape::lower() const {
  switch (kind_) {
    case Kind::disk:
      return {-radius_, -radius_};
    case Kind::rectangle:
      return {-0.5 * width_, -0.5 * height_};
    case Kind::polygon: {
      Vec2 lo = vertices_.front();
      for (const auto& v : vertices_) lo = {std::min(lo.x, v.x), std::min(lo.y, v.y)};
      return lo;
    }
  }
  return {};
}

Vec2 Shape::upper() const {
  switch (kind_) {
    case Kind::disk:
      return {radius_, radius_};
    case Kind::rectangle:
      return {0.5 * width_, 0.5 * height_};
    case Kind::polygon: {
      Vec2 hi = vertices_.front();
      for (const auto& v : vertices_) hi = {std::max(hi.x, v.x), std::max(hi.y, v.y)};
      return hi;
    }
  }
  return {};
}

double Shape::diameter() const {
  switch (kind_) {
    case Kind::disk:
      return 2.0 * radius_;
    case Kind::rectangle:
      return std::hypot(width_, height_);
    case Kind::polygon: {
      double d = 0.0;
      for (const auto& a : vertices_)
        for (const auto& b : vertices_) d = std::max(d, std::hypot(a.x - b.x, a.y - b.y));
      return d;
    }
  }
  return 0.0;
}

double Shape::area() const {
  switch (kind_) {
    case Kind::disk:
      return std::numbers::pi * radius_ * radius_;
    case Kind::rectangle:
      return width_ * height_;
    case Kind::polygon: {
      double s = 0.0;
      const std::size_t n = vertices_.size();
      for (std::size_t a = 0, b = n - 1; a < n; b = a++) s += vertices_[b].x * vertices_[a].y - vertices_[a].x * vertices_[b].y;
      return 0.5 * std::abs(s);
    }
  }
  return 0.0;
}

double Shape::perimeter() const {
  switch (kind_) {
    case Kind::disk:
      return 2.0 * std::numbers::pi * radius_;
    case Kind::rectangle:
      return 2.0 * (width_ + height_);
    case Kind::polygon: {
      double s = 0.0;
      const std::size_t n = vertices_.size();
      for (std::size_t a = 0, b = n - 1; a < n; b = a++)
        s += std::hypot(vertices_[a].x - vertices_[b].x, vertices_[a].y - vertices_[b].y);
      return s;
    }
  }
  return 0.0;
}

std::string Shape::describe() const {
  std::ostringstream os;
  os.precision(17);
  switch (kind_) {
    case Kind::disk:
      os << "disk(" << radius_ << ")";
      break;
    case Kind::rectangle:
      os << "rectangle(" << width_ << "," << height_ << ")";
      break;
    case Kind::polygon:
      os << "polygon(";
      for (std::size_t k = 0; k < vertices_.size(); ++k) os << (k ? ";" : "") << vertices_[k].x << "," << vertices_[k].y;
      os << ")";
      break;
  }
  return os.str();
}

// ============================================================================
// CrossSection
// ============================================================================

struct CrossSection::Data {
  Shape shape;
  double h = 0.0;
  int nx = 0, ny = 0;
  Vec2 origin;
  GridAlignment alignment = GridAlignment::cell_centered;
  BoundaryTreatment boundary = BoundaryTreatment::cut_edge;
  std::vector<std::uint8_t> mask;
  std::vector<int> boundary_nodes;
  std::vector<int> interior_nodes;
  std::vector<int> compact;
  std::vector<double> frac_v, frac_h;
  double area = 0.0;
};

const Shape& CrossSection::shape() const { return d_->shape; }
double CrossSection::h() const { return d_->h; }
int CrossSection::nx() const { return d_->nx; }
int CrossSection::ny() const { return d_->ny; }
Vec2 CrossSection::origin() const { return d_->origin; }
Vec2 CrossSection::node(int i, int j) const { return {d_->origin.x + i * d_->h, d_->origin.y + j * d_->h}; }
bool CrossSection::interior(int i, int j) const {
  if (i < 0 || j < 0 || i >= d_->nx || j >= d_->ny) return false;
  return d_->mask[index(i, j)] != 0;
}
const std::vector<std::uint8_t>& CrossSection::mask() const { return d_->mask; }
const std::vector<int>& CrossSection::boundary_nodes() const { return d_->boundary_nodes; }
double CrossSection::area() const { return d_->area; }
GridAlignment CrossSection::alignment() const { return d_->alignment; }
BoundaryTreatment CrossSection::boundary_treatment() const { return d_->boundary; }
const std::vector<int>& CrossSection::interior_nodes() const { return d_->interior_nodes; }
int CrossSection::interior_count() const { return static_cast<int>(d_->interior_nodes.size()); }
int CrossSection::compact(std::size_t flat) const { return d_->compact[flat]; }

double CrossSection::fraction_v(int i, int j) const {
  if (i < 0 || j < 0 || i >= d_->nx || j >= d_->ny - 1) return 0.0;
  return d_->frac_v[index(i, j)];
}
double CrossSection::fraction_h(int i, int j) const {
  if (i < 0 || j < 0 || i >= d_->nx - 1 || j >= d_->ny) return 0.0;
  return d_->frac_h[index(i, j)];
}
double CrossSection::weight_v(int i, int j) const {
  const double f = fraction_v(i, j);
  return f > 0.0 ? 1.0 / f : 0.0;
}
double CrossSection::weight_h(int i, int j) const {
  const double f = fraction_h(i, j);
  return f > 0.0 ? 1.0 / f : 0.0;
}

namespace {

// Inside fraction of the segment from an interior node p toward an exterior node q.
double inside_fraction(const Shape& s, Vec2 p, Vec2 q, double min_fraction) {
  if (!s.contains(p)) return 1.0;  // filled pinhole
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 60; ++it) {
    const double t = 0.5 * (lo + hi);
    if (s.contains({p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)}))
      lo = t;
    else
      hi = t;
  }
  return std::clamp(0.5 * (lo + hi), min_fraction, 1.0);
}

}  // namespace

CrossSection build_cross_section(const Shape& shape, double h, const CrossSectionOptions& opts) {
  require(std::isfinite(h) && h > 0.0, "grid spacing h2 must be positive");
  require(opts.min_fraction > 0.0 && opts.min_fraction <= 1.0, "min_fraction must lie in (0,1]");
  auto d = std::make_shared<CrossSection::Data>();
  d->shape = shape;
  d->h = h;
  d->alignment = opts.alignment;
  d->boundary = opts.boundary;

  const Vec2 lo = shape.lower(), hi = shape.upper();
  const Vec2 c{0.5 * (lo.x + hi.x), 0.5 * (lo.y + hi.y)};
  const double ex = 0.5 * (hi.x - lo.x), ey = 0.5 * (hi.y - lo.y);
  const double cells_limit = 1e8;
  require(ex / h < cells_limit && ey / h < cells_limit, "grid spacing too fine for shape extent");
  const int extra = opts.alignment == GridAlignment::cell_centered ? 2 : 3;
  d->nx = 2 * static_cast<int>(std::ceil(ex / h)) + extra;
  d->ny = 2 * static_cast<int>(std::ceil(ey / h)) + extra;
  d->origin = {c.x - 0.5 * (d->nx - 1) * h, c.y - 0.5 * (d->ny - 1) * h};

  const int nx = d->nx, ny = d->ny;
  auto idx = [nx](int i, int j) { return static_cast<std::size_t>(i) + static_cast<std::size_t>(nx) * j; };
  auto pos = [&](int i, int j) { return Vec2{d->origin.x + i * h, d->origin.y + j * h}; };

  d->mask.assign(static_cast<std::size_t>(nx) * ny, 0);
  for (int j = 1; j < ny - 1; ++j)
    for (int i = 1; i < nx - 1; ++i) d->mask[idx(i, j)] = shape.contains(pos(i, j)) ? 1 : 0;
  // Fill isolated pinholes so every exterior node has an exterior neighbour.
  for (int j = 1; j < ny - 1; ++j)
    for (int i = 1; i < nx - 1; ++i)
      if (!d->mask[idx(i, j)] && d->mask[idx(i - 1, j)] && d->mask[idx(i + 1, j)] && d->mask[idx(i, j - 1)] &&
          d->mask[idx(i, j + 1)])
        d->mask[idx(i, j)] = 1;

  std::vector<int> cols(nx, 0), rows(ny, 0);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i)
      if (d->mask[idx(i, j)]) {
        cols[i] = 1;
        rows[j] = 1;
      }
  const int ncols = static_cast<int>(std::count(cols.begin(), cols.end(), 1));
  const int nrows = static_cast<int>(std::count(rows.begin(), rows.end(), 1));
  if (std::min(ncols, nrows) < 4) {
    std::ostringstream os;
    os << "h2 = " << h << " too coarse for " << shape.describe() << ": " << std::min(ncols, nrows)
       << " interior nodes across (need 4)";
    fail(os.str());
  }

  d->compact.assign(d->mask.size(), -1);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i)
      if (d->mask[idx(i, j)]) {
        d->compact[idx(i, j)] = static_cast<int>(d->interior_nodes.size());
        d->interior_nodes.push_back(static_cast<int>(idx(i, j)));
      }

  // Connectivity of the interior and of the exterior (no holes).
  auto flood = [&](std::uint8_t want, std::vector<std::pair<int, int>> seeds) {
    std::vector<std::uint8_t> seen(d->mask.size(), 0);
    std::queue<std::pair<int, int>> q;
    for (auto s : seeds)
      if (!seen[idx(s.first, s.second)]) {
        seen[idx(s.first, s.second)] = 1;
        q.push(s);
      }
    std::size_t count = 0;
    while (!q.empty()) {
      auto [i, j] = q.front();
      q.pop();
      ++count;
      const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
      for (int k = 0; k < 4; ++k) {
        const int a = i + di[k], b = j + dj[k];
        if (a < 0 || b < 0 || a >= nx || b >= ny) continue;
        if (seen[idx(a, b)] || d->mask[idx(a, b)] != want) continue;
        seen[idx(a, b)] = 1;
        q.push({a, b});
      }
    }
    return count;
  };
  const int first = d->interior_nodes.front();
  if (flood(1, {{first % nx, first / nx}}) != d->interior_nodes.size())
    fail("rasterized cross-section is disconnected at h2 = " + std::to_string(h));
  std::vector<std::pair<int, int>> border;
  for (int i = 0; i < nx; ++i) border.insert(border.end(), {{i, 0}, {i, ny - 1}});
  for (int j = 0; j < ny; ++j) border.insert(border.end(), {{0, j}, {nx - 1, j}});
  if (flood(0, border) != d->mask.size() - d->interior_nodes.size())
    fail("rasterized cross-section has holes at h2 = " + std::to_string(h));

  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      if (d->mask[idx(i, j)]) continue;
      bool adj = false;
      if (i > 0 && d->mask[idx(i - 1, j)]) adj = true;
      if (i + 1 < nx && d->mask[idx(i + 1, j)]) adj = true;
      if (j > 0 && d->mask[idx(i, j - 1)]) adj = true;
      if (j + 1 < ny && d->mask[idx(i, j + 1)]) adj = true;
      if (adj) d->boundary_nodes.push_back(static_cast<int>(idx(i, j)));
    }

  d->frac_v.assign(d->mask.size(), 0.0);
  d->frac_h.assign(d->mask.size(), 0.0);
  const bool cut = opts.boundary == BoundaryTreatment::cut_edge;
  auto edge_fraction = [&](int ia, int ja, int ib, int jb) {
    const bool a = d->mask[idx(ia, ja)], b = d->mask[idx(ib, jb)];
    if (!a && !b) return 0.0;
    if (a && b) return 1.0;
    if (!cut) return 1.0;
    return a ? inside_fraction(shape, pos(ia, ja), pos(ib, jb), opts.min_fraction)
             : inside_fraction(shape, pos(ib, jb), pos(ia, ja), opts.min_fraction);
  };
  for (int j = 0; j < ny - 1; ++j)
    for (int i = 0; i < nx; ++i) d->frac_v[idx(i, j)] = edge_fraction(i, j, i, j + 1);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx - 1; ++i) d->frac_h[idx(i, j)] = edge_fraction(i, j, i + 1, j);

  // Cut edges: midpoint rule over the inside lengths of the grid lines, averaged over both
  // directions. Node counting converges erratically (lattice-point noise).
  if (cut) {
    double sv = 0.0, sh = 0.0;
    for (double f : d->frac_v) sv += f;
    for (double f : d->frac_h) sh += f;
    d->area = 0.5 * (sv + sh) * h * h;
  } else {
    d->area = static_cast<double>(d->interior_nodes.size()) * h * h;
  }

  CrossSection cs;
  cs.d_ = std::move(d);
  return cs;
}

}  // namespace hc1
