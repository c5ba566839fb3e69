#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hc1/bstar.hpp"
#include "hc1/obstacle.hpp"

namespace hc1 {

struct SliceCurvePoint {
  double x3 = 0.0;
  double sup_norm = 0.0;         // route 1: |w_star| on the slice
  double sup_norm_route2 = 0.0;  // re-solved from B_star^3
  int i = -1;                    // argmax node of route 1
  int j = -1;
};

struct XiResult {
  double xi = 0.0;
  double xi_route2 = 0.0;
  int argmax_slice = -1;
  std::vector<SliceCurvePoint> slice_curve;
  /// Route 2 slice solutions, one per slice.
  std::vector<ScalarField2D> psi_route2;

  double route_disagreement() const;
};

/// Route 1 reads the sup norm off the reduced minimizer; route 2 re-solves the slice
/// Poisson problems with the source taken from B_star^3.
XiResult compute_xi(const BStarSolution& sol, const DiscretizedDomain& dom, const SolverConfig& cfg);

/// 1/(2 xi).
double hc1_coefficient(double xi);

struct Hc1Estimate {
  double epsilon = 0.0;
  double value = 0.0;
  /// The o(1) correction is never included.
  std::string provenance = "leading-order-only";
};

/// |ln eps| / (2 xi).
Hc1Estimate hc1_estimate(double xi, double epsilon);

/// Extrapolates two slice-sampled values assuming error ~ Nz^-order with the fine run at twice Nz.
double richardson(double coarse, double fine, double order = 2.0);

struct SweepOptions {
  VIConfig vi;
  /// Onset threshold as a fraction of |D|.
  double mass_tol_rel = 1e-6;
  int threads = 1;
};

struct SweepPoint {
  double h0 = 0.0;
  double mass = 0.0;  // sum over slices of slice mass times h3
  std::vector<double> slice_mass;
  long coincidence_nodes = 0;
  int max_iterations = 0;
  bool converged = true;
};

enum class OnsetStatus { found, below_onset, above_onset };

struct SweepResult {
  std::vector<SweepPoint> points;
  std::optional<double> onset_h0;
  OnsetStatus status = OnsetStatus::below_onset;
  double mass_tol = 0.0;
  /// Obstacle solutions at the last grid value, one per slice.
  std::vector<VIReport> last;
};

std::string to_string(OnsetStatus s);

/// Solves the constrained slice problems at every h0 of a strictly increasing grid,
/// warm-starting each slice from the previous grid value.
SweepResult sweep_h0(const BStarSolution& sol, const DiscretizedDomain& dom, std::span<const double> h0_grid,
                     const SweepOptions& opts = {});

/// Constrained slice solutions at a single h0.
std::vector<VIReport> constrained_slices(const BStarSolution& sol, const DiscretizedDomain& dom, double h0,
                                         const VIConfig& cfg, int threads = 1);

struct VorticityReport {
  /// v = perp_grad psi + A_hat on every slice.
  std::vector<VectorField2D> v;
  /// Sum of |curl v| over D from the lattice curl of v on the field grid.
  double tv_3d = 0.0;
  /// Sum over slices of the slice masses times h3.
  double tv_slices = 0.0;
};

/// `slice_masses` are the per-slice coincidence-set masses; pass an empty span to
/// use the full slice total variation of curl v instead.
VorticityReport reconstruct_v(const std::vector<ScalarField2D>& psi, const BStarSolution& sol,
                              const DiscretizedDomain& dom, std::span<const double> slice_masses = {});

/// Full slice total variation of curl v over the interior nodes.
double slice_total_variation(const VectorField2D& v);

struct MeanFieldEnergy {
  double kinetic = 0.0;    // |v - A_hat|^2 over D
  double vorticity = 0.0;  // |curl v|(D)
  double field = 0.0;      // |B|^2 over all space
  double total = 0.0;      // (kinetic + vorticity / h0 + field) / 2
};

/// Energy of a decoupled configuration: slices v, in-plane potential slices a_hat and
/// the squared field norm.
MeanFieldEnergy mean_field_energy(const std::vector<VectorField2D>& v, const std::vector<VectorField2D>& a_hat,
                                  double field_norm_sq, const DiscretizedDomain& dom, double h0);

/// Same with a_hat and the field norm taken from the solution.
MeanFieldEnergy mean_field_energy(const std::vector<VectorField2D>& v, const BStarSolution& sol,
                                  const DiscretizedDomain& dom, double h0);

/// Runs fn(k) for k in [0, n) on up to `threads` threads with a fixed static partition.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

}  // namespace hc1
