#pragma once

#include <cstdint>
#include <vector>

#include "hc1/cross_section.hpp"
#include "hc1/staggered.hpp"

namespace hc1 {

/// Smallest m >= n whose prime factors are all in {2,3,5,7}.
int next_fft_size(int n);

struct EmbedOptions {
  double pad_factor = 1.0;
  double memory_budget_mb = 4096.0;
};

/// Cylinder D = Omega x (0,L) inside a truncated box lattice.
///
/// The box shares the in-plane lattice of the cross-section (spacing h2) and uses
/// spacing h3 = L/Nz along x3 with z = 0 on a node, so slice k of a stream family
/// sits at the z-edges (i, j, k+1/2).
class DiscretizedDomain {
 public:
  const CrossSection& cross_section() const { return cs_; }
  double L() const { return L_; }
  int nz() const { return nz_; }
  double h2() const { return cs_.h(); }
  double h3() const { return L_ / nz_; }
  double pad_factor() const { return pad_; }
  double volume() const { return cs_.area() * L_; }
  /// Diameter of the continuum cylinder.
  double diameter() const;

  const Grid3& box() const { return box_; }
  Index3 box_resolution() const { return box_.n; }
  /// Distance from the centre of D to the box faces along each axis (minimum over both sides).
  Vec3 box_extent() const;

  /// Lattice aligned with the box covering the cross-section grid and the Nz slices,
  /// enlarged by `margin` cells on every side.
  Grid3 window(int margin = 0) const;
  /// Index in g of cross-section node (0,0) and of the z-node at x3 = 0.
  Index3 offset_in(const Grid3& g) const;

  /// Membership of D at z-edge (i, j, k+1/2) of the box.
  const std::vector<std::uint8_t>& d_mask() const { return d_mask_; }
  bool in_d(int i, int j, int k) const { return d_mask_[box_.index(i, j, k)] != 0; }

  /// Estimated peak bytes for a free-space convolution from the slab window onto g.
  static double convolution_bytes(const Grid3& source, const Grid3& target);

 private:
  CrossSection cs_;
  double L_ = 0.0;
  int nz_ = 0;
  double pad_ = 1.0;
  Grid3 box_;
  std::vector<std::uint8_t> d_mask_;
  friend DiscretizedDomain embed_cylinder(const CrossSection&, double, int, const EmbedOptions&);
};

DiscretizedDomain embed_cylinder(const CrossSection& cs, double L, int nz, const EmbedOptions& opts = {});

/// a sampled on the faces of the domain box.
VectorField3D gauge_field_a(const DiscretizedDomain& dom);

}  // namespace hc1
