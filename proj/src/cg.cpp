#include <cmath>
#include <numeric>
#include <sstream>

#include "hc1/elliptic.hpp"
#include "hc1/error.hpp"
#include "hc1/plane_ops.hpp"

namespace hc1 {

void SolverConfig::validate() const {
  require(tol_rel > 0.0 && tol_rel <= 1e-2, "tol_rel must lie in (0, 1e-2]");
  require(max_iter >= 0, "max_iter must be positive (0 selects the default)");
}

int SolverConfig::resolved_max_iter(std::size_t unknowns) const {
  if (max_iter > 0) return max_iter;
  return std::max(500, static_cast<int>(std::ceil(10.0 * std::sqrt(static_cast<double>(unknowns)))));
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

}  // namespace

CgResult cg_solve(const LinearOp& A, std::span<const double> b, const SolverConfig& cfg, const LinearOp& precond,
                  std::span<const double> x0) {
  cfg.validate();
  const std::size_t n = b.size();
  for (double v : b)
    if (!std::isfinite(v)) throw Error(ErrorKind::numerical, "cg_solve: right-hand side is not finite");
  CgResult res;
  res.x.assign(n, 0.0);
  if (!x0.empty()) {
    require(x0.size() == n, "cg_solve: initial guess has the wrong size");
    std::copy(x0.begin(), x0.end(), res.x.begin());
  }
  const double bnorm = std::sqrt(dot(b, b));
  if (bnorm == 0.0) {
    res.x.assign(n, 0.0);
    res.report = {0, 0.0, true};
    return res;
  }

  const int max_iter = cfg.resolved_max_iter(n);
  std::vector<double> r(n), z(n), p(n), Ap(n);
  auto true_residual = [&] {
    A(res.x, Ap);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - Ap[i];
    const double rn = std::sqrt(dot(r, r));
    if (!std::isfinite(rn)) throw Error(ErrorKind::numerical, "cg_solve: non-finite residual");
    return rn;
  };
  auto apply_m = [&] {
    if (precond)
      precond(r, z);
    else
      z = r;
  };

  int it = 0;
  double rnorm = true_residual();
  // Restart from the true residual if recurrence drift hides a residual above tolerance.
  for (int restart = 0; restart < 4 && rnorm > cfg.tol_rel * bnorm && it < max_iter; ++restart) {
    apply_m();
    p = z;
    double rz = dot(r, z);
    while (it < max_iter) {
      A(p, Ap);
      const double pAp = dot(p, Ap);
      ++it;
      if (!std::isfinite(pAp) || !std::isfinite(rz))
        throw Error(ErrorKind::numerical, "cg_solve: non-finite value, operator is likely indefinite");
      if (pAp <= 0.0) {
        std::ostringstream os;
        os << "cg_solve: nonpositive curvature p.Ap = " << pAp << " at iteration " << it;
        throw Error(ErrorKind::numerical, os.str());
      }
      const double alpha = rz / pAp;
      for (std::size_t i = 0; i < n; ++i) {
        res.x[i] += alpha * p[i];
        r[i] -= alpha * Ap[i];
      }
      rnorm = std::sqrt(dot(r, r));
      if (rnorm <= cfg.tol_rel * bnorm) break;
      apply_m();
      const double rz_new = dot(r, z);
      const double beta = rz_new / rz;
      rz = rz_new;
      for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    rnorm = true_residual();
  }
  res.report.iterations = it;
  res.report.final_residual_rel = rnorm / bnorm;
  res.report.converged = res.report.final_residual_rel <= cfg.tol_rel;
  return res;
}

ScalarField2D poisson_dirichlet_2d(const ScalarField2D& f, const SolverConfig& cfg, SolveReport* report) {
  const CrossSection& cs = f.cs;
  require(cs.valid() && f.v.size() == cs.size(), "source does not match its grid");
  for (double v : f.v)
    if (!std::isfinite(v)) fail("poisson_dirichlet_2d: source is not finite");
  const auto A = laplacian_matrix(cs);
  const std::vector<double> b = to_compact(f);
  Eigen::VectorXd inv_diag = A.diagonal().cwiseInverse();
  LinearOp apply = [&](std::span<const double> x, std::span<double> y) {
    Eigen::Map<Eigen::VectorXd>(y.data(), y.size()) = A * Eigen::Map<const Eigen::VectorXd>(x.data(), x.size());
  };
  LinearOp precond;
  if (cfg.preconditioner != Preconditioner::none)
    precond = [&](std::span<const double> x, std::span<double> y) {
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = inv_diag[static_cast<Eigen::Index>(i)] * x[i];
    };
  CgResult r = cg_solve(apply, b, cfg, precond);
  if (report) *report = r.report;
  if (!r.report.converged) {
    std::ostringstream os;
    os << "poisson_dirichlet_2d: CG did not converge (relative residual " << r.report.final_residual_rel << " after "
       << r.report.iterations << " iterations)";
    throw Error(ErrorKind::convergence, os.str());
  }
  return from_compact(cs, r.x);
}

}  // namespace hc1
