#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/SparseCholesky>

#include "hc1/domain.hpp"
#include "hc1/elliptic.hpp"

namespace hc1 {

/// One Dirichlet stream function per slice k, placed at x3 = (k + 1/2) h3.
struct StreamFamily {
  CrossSection cs;
  std::vector<ScalarField2D> slices;

  int nz() const { return static_cast<int>(slices.size()); }
};

StreamFamily zero_stream(const DiscretizedDomain& dom);
/// Slice-major concatenation of interior values.
std::vector<double> pack(const StreamFamily& w);
StreamFamily unpack(const DiscretizedDomain& dom, std::span<const double> x);

/// The quadratic form of the stream-parametrized energy
///   J(w) = 1/2 <xi, G xi> + 1/2 sum_D |perp_grad w + a|^2
/// written as J(w) = V (1/2 w.Aw - b.w) + J(0) over packed interior values, V = h2^2 h3.
/// G is the free-space convolution of the in-plane current on the slab window.
class ReducedOperator {
 public:
  explicit ReducedOperator(const DiscretizedDomain& dom, const GaugeFn& gauge = symmetric_gauge());
  ~ReducedOperator();

  std::size_t size() const;
  void apply(std::span<const double> w, std::span<double> out) const;
  const std::vector<double>& rhs() const;
  std::vector<double> diagonal() const;
  /// Slice-wise exact inverse of -Delta_h.
  void slice_laplacian_inverse(std::span<const double> r, std::span<double> z) const;

  double energy(std::span<const double> w) const;
  double zero_energy() const;
  /// <xi, G xi> with volume weights: the whole-space field energy times two.
  double field_energy(std::span<const double> w) const;

  /// Fraction-weighted in-plane current of w on the faces of the slab window.
  VectorField3D current(std::span<const double> w) const;
  const FreeSpaceConvolver& convolver() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> p_;
};

enum class FieldRegion { box, window };
enum class AReconstruction { current_potential, field_curl };

struct BStarOptions {
  GaugeFn gauge = symmetric_gauge();
  /// Where B_star and A_star are tabulated: the whole domain box, or the slab window
  /// enlarged by window_margin cells.
  FieldRegion field_region = FieldRegion::box;
  int window_margin = 3;
  AReconstruction a_method = AReconstruction::current_potential;
  /// Exclusion distance from the cylinder boundary for the interior residual; 0 selects 2 max(h2, h3).
  double el_exclusion = 0.0;
};

struct ElDiagnostics {
  double el_residual_interior = 0.0;
  long el_nodes = 0;
  double exclusion = 0.0;
  double div_B = 0.0;
  double curl_support_leak = 0.0;
  double curl_leak_discrete = 0.0;
  double curlB3 = 0.0;
  double b3_min = 0.0;
  double b3_max = 0.0;
};

struct BStarSolution {
  StreamFamily w_star;
  Grid3 field_grid;
  VectorField3D B_star;  // edges of field_grid
  VectorField3D A_star;  // faces of field_grid
  double energy = 0.0;
  double energy_zero = 0.0;
  double field_energy = 0.0;  // 1/2 |B|^2 over all space
  ElDiagnostics diagnostics;
  SolveReport solve_report;
  std::vector<std::string> warnings;
};

StreamFamily apply_reduced_operator(const StreamFamily& w, const DiscretizedDomain& dom, const SolverConfig& cfg);

BStarSolution solve_bstar(const DiscretizedDomain& dom, const SolverConfig& cfg, const BStarOptions& opts = {});

/// Fields of a given stream family (not necessarily the minimizer) on a lattice aligned with dom.
/// B = curl(G xi), and A from the chosen reconstruction.
void stream_fields(const StreamFamily& w, const DiscretizedDomain& dom, const Grid3& field_grid, const GaugeFn& gauge,
                   AReconstruction method, VectorField3D* B, VectorField3D* A);

/// A = a + curl(G B) (field_curl, truncated to sol.field_grid) or a + G xi (current_potential).
VectorField3D reconstruct_A(const BStarSolution& sol, const DiscretizedDomain& dom, const SolverConfig& cfg,
                            AReconstruction method = AReconstruction::current_potential,
                            const GaugeFn& gauge = symmetric_gauge());

ElDiagnostics el_residual(const BStarSolution& sol, const DiscretizedDomain& dom, double exclusion = 0.0);

/// B^3 of the solution on slice k, sampled at the cross-section nodes.
ScalarField2D slice_b3(const BStarSolution& sol, const DiscretizedDomain& dom, int k);
/// In-plane components of A at slice k, on the cross-section edges.
VectorField2D slice_a(const BStarSolution& sol, const DiscretizedDomain& dom, int k);

/// Distance from a point to the boundary of the cylinder (positive inside).
double cylinder_depth(const DiscretizedDomain& dom, const Vec3& p);

}  // namespace hc1
