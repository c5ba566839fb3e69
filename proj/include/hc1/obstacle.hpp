#pragma once

#include <cstdint>
#include <vector>

#include "hc1/bstar.hpp"
#include "hc1/cross_section.hpp"
#include "hc1/elliptic.hpp"

namespace hc1 {

/// min over a1 <= u <= a2, u = 0 on the boundary, of 1/2 |grad u|^2 - (u, f).
struct ObstacleProblem {
  CrossSection cs;
  ScalarField2D f;
  double a1 = -1.0;
  double a2 = 1.0;

  void validate() const;
};

struct VIConfig {
  double omega = 1.7;
  /// Stop when the estimated distance to the fixed point, change * rho / (1 - rho),
  /// drops below tol_vi * max|u|.
  double tol_vi = 1e-9;
  int max_iter = 200000;
  /// Coincidence-set membership: |u - bound| <= active_tol_rel * (a2 - a1).
  double active_tol_rel = 1e-7;

  void validate() const;
};

struct VIReport {
  ScalarField2D u;
  std::vector<std::uint8_t> lower_set;
  std::vector<std::uint8_t> upper_set;
  ScalarField2D residual_measure;  // -Delta_h u - f on interior nodes
  double mass = 0.0;               // sum of |residual| over the coincidence sets times h^2
  int lower_count = 0;
  int upper_count = 0;
  int iterations = 0;
  double last_change = 0.0;
  bool converged = false;
};

/// -Delta_h psi = -(b3 + 1), psi = 0 on the boundary.
ScalarField2D solve_slice_linear(const ScalarField2D& b3, const SolverConfig& cfg);

/// Projected SOR with lexicographic ordering. `initial` is clamped into the bounds.
/// When `objective_trace` is given, the discrete objective after each sweep is appended.
VIReport solve_double_obstacle(const ObstacleProblem& p, const VIConfig& cfg, const ScalarField2D* initial = nullptr,
                               std::vector<double>* objective_trace = nullptr);

/// Bounds +-1/(2 h0) and source -(b3 + 1).
VIReport solve_constrained_slice(const ScalarField2D& b3, double h0, const VIConfig& cfg,
                                 const ScalarField2D* initial = nullptr);

ObstacleProblem constrained_slice_problem(const ScalarField2D& b3, double h0);

struct DualNormResult {
  double xi = 0.0;
  int slice = -1;
  int i = -1;
  int j = -1;
};

/// max over slices and nodes of |psi|.
DualNormResult dual_norm(const std::vector<ScalarField2D>& psi);
DualNormResult dual_norm(const StreamFamily& w);

struct BoundsCheck {
  bool ok = true;
  long violations = 0;
  double worst = 0.0;  // largest excess over the band
};

/// -f^- - tol <= -Delta_h u <= f^+ + tol at every interior node.
BoundsCheck verify_vi_bounds(const VIReport& rep, const ObstacleProblem& p, double tol);

/// max over interior nodes of |residual| * min(u - a1, a2 - u).
double complementarity_residual(const VIReport& rep, const ObstacleProblem& p);

/// 1/2 (u, -Delta_h u) - (u, f) with h^2 node weights.
double discrete_objective(const ScalarField2D& u, const ScalarField2D& f);

double l2_norm(const ScalarField2D& f);
/// sqrt(|u|_1^2 + |u|_0^2) with the h^2-weighted discrete norms.
double h1_norm(const ScalarField2D& u);

/// Smallest eigenvalue of -Delta_h on the interior (inverse iteration).
double smallest_laplacian_eigenvalue(const CrossSection& cs);

/// sqrt(1/lambda1 + 1/lambda1^2): the H1/L2 Lipschitz bound of the unconstrained solve.
double poincare_stability_bound(const CrossSection& cs);

/// |u1 - u2|_{H1} / |f1 - f2|_{L2} for two obstacle problems sharing cs and bounds. 0 when f1 = f2.
double stability_check(const ScalarField2D& f1, const ScalarField2D& f2, const ObstacleProblem& tmpl, const VIConfig& cfg);

}  // namespace hc1
