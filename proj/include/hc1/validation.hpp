#pragma once

#include <string>
#include <vector>

#include "hc1/elliptic.hpp"

namespace hc1 {

struct CheckResult {
  std::string name;
  double measured = 0.0;
  double threshold = 0.0;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct ValidationConfig {
  /// Base resolution 1/h of the torsion, Gaussian, loop and radial checks.
  int resolution = 32;
  SolverConfig solver;
};

/// Torsion on disk(1) at resolution N, 2N, 4N: error of max|psi| against (1+c)R^2/4 in units
/// of h^2 (threshold 2) and the observed orders (threshold: within [1.8, 2.2]).
std::vector<CheckResult> check_torsion(const ValidationConfig& cfg);

/// Gaussian potential on a (2N)^3 box, sigma = 7/32: worst relative error at sigma, 2 sigma,
/// 3 sigma for the kernel path, and the kernel vs padded Dirichlet disagreement.
std::vector<CheckResult> check_gaussian(const ValidationConfig& cfg);

/// B3 at the centre of a slab of azimuthal current against the ring-integral formula.
CheckResult check_loop_field(const ValidationConfig& cfg);

/// 5x5 interior nodes, Nz = 3: CG against a dense solve of the assembled reduced operator,
/// symmetry and positive definiteness of the assembled operator.
std::vector<CheckResult> check_dense_reduced(const ValidationConfig& cfg);

/// 4x4 interior nodes, Nz = 2: LP brute force of the dual norm against the slice sup.
CheckResult check_lp_dual_norm(const ValidationConfig& cfg);

/// Double obstacle on disk(1) with constant source against the radial shooting solution.
CheckResult check_radial_obstacle(const ValidationConfig& cfg);

std::vector<CheckResult> run_validation(const ValidationConfig& cfg);

}  // namespace hc1
