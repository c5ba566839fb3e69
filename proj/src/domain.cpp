#include "hc1/domain.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hc1/error.hpp"

namespace hc1 {

int next_fft_size(int n) {
  require(n >= 1, "fft size must be positive");
  for (int m = n;; ++m) {
    int r = m;
    for (int p : {2, 3, 5, 7})
      while (r % p == 0) r /= p;
    if (r == 1) return m;
  }
}

double DiscretizedDomain::diameter() const { return std::hypot(cs_.shape().diameter(), L_); }

Vec3 DiscretizedDomain::box_extent() const {
  const Vec2 lo = cs_.shape().lower(), hi = cs_.shape().upper();
  const Vec3 c{0.5 * (lo.x + hi.x), 0.5 * (lo.y + hi.y), 0.5 * L_};
  Vec3 e{};
  for (int d = 0; d < 3; ++d) {
    const double a = box_.origin[d], b = box_.origin[d] + (box_.n[d] - 1) * box_.h[d];
    e[d] = std::min(c[d] - a, b - c[d]);
  }
  return e;
}

Grid3 DiscretizedDomain::window(int margin) const {
  require(margin >= 0, "window margin must be nonnegative");
  const double h = cs_.h();
  Grid3 g;
  g.n = {cs_.nx() + 2 * margin, cs_.ny() + 2 * margin, nz_ + 2 * margin};
  g.h = {h, h, h3()};
  g.origin = {cs_.origin().x - margin * h, cs_.origin().y - margin * h, -margin * h3()};
  return g;
}

Index3 DiscretizedDomain::offset_in(const Grid3& g) const {
  const double h = cs_.h();
  const Index3 o{static_cast<int>(std::lround((cs_.origin().x - g.origin[0]) / h)),
                 static_cast<int>(std::lround((cs_.origin().y - g.origin[1]) / h)),
                 static_cast<int>(std::lround(-g.origin[2] / h3()))};
  const double tol = 1e-9;
  require(std::abs(g.h[0] - h) <= tol * h && std::abs(g.h[1] - h) <= tol * h && std::abs(g.h[2] - h3()) <= tol * h3(),
          "grid spacing does not match the domain lattice");
  require(std::abs(g.origin[0] + o[0] * h - cs_.origin().x) <= tol * h &&
              std::abs(g.origin[1] + o[1] * h - cs_.origin().y) <= tol * h && std::abs(g.origin[2] + o[2] * h3()) <= tol * h3(),
          "grid is not aligned with the domain lattice");
  return o;
}

double DiscretizedDomain::convolution_bytes(const Grid3& source, const Grid3& target) {
  double m = 1.0, half = 1.0;
  for (int d = 0; d < 3; ++d) {
    const int md = next_fft_size(source.n[d] + target.n[d] + 1);
    m *= md;
    half *= d == 0 ? (md / 2 + 1) : md;
  }
  return 8.0 * m + 2.0 * 16.0 * half + 12.0 * 8.0 * static_cast<double>(target.size());
}

DiscretizedDomain embed_cylinder(const CrossSection& cs, double L, int nz, const EmbedOptions& opts) {
  require(cs.valid(), "cross-section not built");
  require(std::isfinite(L) && L > 0.0, "cylinder height L must be positive");
  require(nz >= 2, "need at least 2 slices (Nz >= 2)");
  require(opts.pad_factor >= 0.5, "pad_factor must be at least 0.5");
  require(opts.memory_budget_mb > 0.0, "memory budget must be positive");

  DiscretizedDomain dom;
  dom.cs_ = cs;
  dom.L_ = L;
  dom.nz_ = nz;
  dom.pad_ = opts.pad_factor;

  const double h = cs.h(), h3 = L / nz;
  const double pad = opts.pad_factor * dom.diameter();
  const int p = static_cast<int>(std::ceil(pad / h)) + 1;
  const int pz = static_cast<int>(std::ceil(pad / h3)) + 1;
  Grid3& b = dom.box_;
  b.h = {h, h, h3};
  b.n = {next_fft_size(cs.nx() + 2 * p), next_fft_size(cs.ny() + 2 * p), next_fft_size(nz + 1 + 2 * pz)};
  const int lx = (b.n[0] - cs.nx()) / 2, ly = (b.n[1] - cs.ny()) / 2, lz = (b.n[2] - (nz + 1)) / 2;
  b.origin = {cs.origin().x - lx * h, cs.origin().y - ly * h, -lz * h3};

  const double need = DiscretizedDomain::convolution_bytes(dom.window(0), b) / (1024.0 * 1024.0);
  if (need > opts.memory_budget_mb) {
    std::ostringstream os;
    os << "box " << b.n[0] << "x" << b.n[1] << "x" << b.n[2] << " needs about " << std::lround(need)
       << " MB, over the memory budget of " << opts.memory_budget_mb << " MB";
    throw Error(ErrorKind::resource, os.str());
  }

  dom.d_mask_.assign(b.size(), 0);
  for (int k = lz; k < lz + nz; ++k)
    for (int j = 0; j < cs.ny(); ++j)
      for (int i = 0; i < cs.nx(); ++i)
        if (cs.interior(i, j)) dom.d_mask_[b.index(i + lx, j + ly, k)] = 1;
  return dom;
}

VectorField3D gauge_field_a(const DiscretizedDomain& dom) { return sample_gauge(dom.box(), symmetric_gauge()); }

}  // namespace hc1
