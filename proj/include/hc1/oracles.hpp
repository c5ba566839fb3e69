#pragma once

#include <vector>

#include <Eigen/Dense>

#include "hc1/bstar.hpp"
#include "hc1/elliptic.hpp"

// Reference solutions used by the validation battery and the tests.
namespace hc1::oracle {

struct LpResult {
  enum class Status { optimal, unbounded, iteration_limit } status = Status::optimal;
  double value = 0.0;
  std::vector<double> x;
};

/// max c.x subject to A x <= b, x >= 0, with b >= 0. Dense tableau simplex with Bland's rule.
LpResult simplex_max(const std::vector<double>& c, const std::vector<std::vector<double>>& A,
                     const std::vector<double>& b, int max_pivots = 100000);

/// Brute-force dual norm of the field generated by a stream family:
///   max sum_k <plane_current(w_k), phi_k> V   subject to   V sum_k sum_nodes |curl2d phi_k| <= 1
/// over in-plane test fields phi on the domain edges.
struct DualNormLp {
  double value = 0.0;
  int unknowns = 0;
  int constraints = 0;
  LpResult::Status status = LpResult::Status::optimal;
};
DualNormLp dual_norm_lp(const StreamFamily& w, double V);

/// Radial double-obstacle problem on disk(R) with constant source f: the bound whose
/// sign matches f is active on a central disk of radius rho. Found by shooting on
/// u'' + u'/r = -f from r = rho with u = bound, u' = 0, bisecting on rho so that u(R) = 0.
class RadialObstacle {
 public:
  RadialObstacle(double R, double f, double a1, double a2);
  double rho() const { return rho_; }
  double value(double r) const;
  /// Closed-form u(R) for a given contact radius; zero at the true rho.
  double closed_form_residual(double rho) const;

 private:
  double shoot(double rho, double r_end) const;
  double R_, f_, bound_, rho_ = 0.0;
};

/// max of the torsion-type solution of -Delta u = s on disk(R): s R^2 / 4.
inline double disk_torsion_max(double R, double s) { return s * R * R / 4.0; }

/// Unit-mass Gaussian of width sigma and its free-space potential Gamma_3 * rho.
double gaussian_density(double r, double sigma);
double gaussian_potential(double r, double sigma);

/// B3 at the centre of a slab |x3| < t/2 carrying the azimuthal current J(r) = -d/dr psi(r),
/// psi(r) = (1 - r^2/b^2)^2 for r < b.
double bump_current_center_field(double b, double t);
/// Same field at height z above the slab centre.
double bump_current_axis_field(double b, double t, double z);
double bump_stream(double r, double b);

/// Columns A e_i of a linear map of dimension n.
Eigen::MatrixXd assemble_dense(int n, const LinearOp& op);

}  // namespace hc1::oracle
