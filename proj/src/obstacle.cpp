#include "hc1/obstacle.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/SparseCholesky>

#include "hc1/error.hpp"
#include "hc1/plane_ops.hpp"

namespace hc1 {

void ObstacleProblem::validate() const {
  require(cs.valid() && f.cs.same_grid(cs), "obstacle source does not match the cross-section");
  require(std::isfinite(a1) && std::isfinite(a2) && a1 < 0.0 && a2 > 0.0, "obstacle bounds must satisfy a1 < 0 < a2");
  for (int n : cs.interior_nodes())
    if (!std::isfinite(f.v[n])) fail("obstacle source is not finite");
}

void VIConfig::validate() const {
  require(omega > 0.0 && omega < 2.0, "SOR relaxation must lie in (0,2)");
  require(tol_vi > 0.0, "tol_vi must be positive");
  require(max_iter >= 1, "max_iter must be at least 1");
  require(active_tol_rel > 0.0, "active_tol_rel must be positive");
}

ScalarField2D solve_slice_linear(const ScalarField2D& b3, const SolverConfig& cfg) {
  ScalarField2D f(b3.cs);
  for (int n : b3.cs.interior_nodes()) {
    if (!std::isfinite(b3.v[n])) fail("slice source B3 is not finite");
    f.v[n] = -(b3.v[n] + 1.0);
  }
  return poisson_dirichlet_2d(f, cfg);
}

namespace {

struct Stencil {
  int nb[4];
  double w[4];
  double diag;
};

std::vector<Stencil> stencils(const CrossSection& cs) {
  const double ih2 = 1.0 / (cs.h() * cs.h());
  std::vector<Stencil> s(cs.interior_count());
  for (int r = 0; r < cs.interior_count(); ++r) {
    const int n = cs.interior_nodes()[r];
    const int i = n % cs.nx(), j = n / cs.nx();
    const int ni[4] = {i + 1, i - 1, i, i};
    const int nj[4] = {j, j, j + 1, j - 1};
    const double w[4] = {cs.weight_h(i, j), cs.weight_h(i - 1, j), cs.weight_v(i, j), cs.weight_v(i, j - 1)};
    s[r].diag = 0.0;
    for (int k = 0; k < 4; ++k) {
      s[r].nb[k] = cs.compact(cs.index(ni[k], nj[k]));
      s[r].w[k] = w[k] * ih2;
      s[r].diag += w[k] * ih2;
    }
  }
  return s;
}

double objective(const std::vector<Stencil>& st, const std::vector<double>& u, const std::vector<double>& f, double h2) {
  double q = 0.0, l = 0.0;
  for (std::size_t r = 0; r < u.size(); ++r) {
    double Au = st[r].diag * u[r];
    for (int k = 0; k < 4; ++k)
      if (st[r].nb[k] >= 0) Au -= st[r].w[k] * u[st[r].nb[k]];
    q += u[r] * Au;
    l += u[r] * f[r];
  }
  return h2 * (0.5 * q - l);
}

}  // namespace

VIReport solve_double_obstacle(const ObstacleProblem& p, const VIConfig& cfg, const ScalarField2D* initial,
                               std::vector<double>* objective_trace) {
  p.validate();
  cfg.validate();
  const CrossSection& cs = p.cs;
  const auto st = stencils(cs);
  const std::vector<double> f = to_compact(p.f);
  const double h2 = cs.h() * cs.h();
  std::vector<double> u(f.size(), 0.0);
  if (initial) {
    require(initial->cs.same_grid(cs), "initial guess does not match the cross-section");
    u = to_compact(*initial);
    for (double& x : u) x = std::clamp(x, p.a1, p.a2);
  }

  VIReport rep;
  double d1 = -1.0, d2 = -1.0;
  int it = 0;
  for (; it < cfg.max_iter;) {
    double change = 0.0, umax = 0.0;
    for (std::size_t r = 0; r < u.size(); ++r) {
      const Stencil& s = st[r];
      double acc = f[r];
      for (int k = 0; k < 4; ++k)
        if (s.nb[k] >= 0) acc += s.w[k] * u[s.nb[k]];
      const double gs = acc / s.diag;
      const double nu = std::clamp(u[r] + cfg.omega * (gs - u[r]), p.a1, p.a2);
      change = std::max(change, std::abs(nu - u[r]));
      u[r] = nu;
      umax = std::max(umax, std::abs(nu));
    }
    ++it;
    if (objective_trace) objective_trace->push_back(objective(st, u, f, h2));
    if (!std::isfinite(change)) throw Error(ErrorKind::numerical, "projected SOR produced a non-finite iterate");
    rep.last_change = change;
    if (change == 0.0) {
      rep.converged = true;
      break;
    }
    if (d1 > 0.0 && d2 > 0.0) {
      const double rho = std::min(std::max(change / d1, d1 / d2), 0.9999);
      if (change * rho / (1.0 - rho) <= cfg.tol_vi * umax) {
        rep.converged = true;
        break;
      }
    }
    d2 = d1;
    d1 = change;
  }
  rep.iterations = it;

  rep.u = from_compact(cs, u);
  rep.residual_measure = ScalarField2D(cs);
  const ScalarField2D lap = neg_laplacian_2d(rep.u);
  rep.lower_set.assign(cs.size(), 0);
  rep.upper_set.assign(cs.size(), 0);
  const double tol_active = cfg.active_tol_rel * (p.a2 - p.a1);
  for (int n : cs.interior_nodes()) {
    const double r = lap.v[n] - p.f.v[n];
    rep.residual_measure.v[n] = r;
    const double x = rep.u.v[n];
    if (x <= p.a1 + tol_active) {
      rep.lower_set[n] = 1;
      ++rep.lower_count;
      rep.mass += std::abs(r) * h2;
    } else if (x >= p.a2 - tol_active) {
      rep.upper_set[n] = 1;
      ++rep.upper_count;
      rep.mass += std::abs(r) * h2;
    }
  }
  return rep;
}

ObstacleProblem constrained_slice_problem(const ScalarField2D& b3, double h0) {
  require(std::isfinite(h0) && h0 > 0.0, "h0 must be positive");
  ObstacleProblem p;
  p.cs = b3.cs;
  p.f = ScalarField2D(b3.cs);
  for (int n : b3.cs.interior_nodes()) p.f.v[n] = -(b3.v[n] + 1.0);
  p.a1 = -0.5 / h0;
  p.a2 = 0.5 / h0;
  return p;
}

VIReport solve_constrained_slice(const ScalarField2D& b3, double h0, const VIConfig& cfg, const ScalarField2D* initial) {
  return solve_double_obstacle(constrained_slice_problem(b3, h0), cfg, initial);
}

DualNormResult dual_norm(const std::vector<ScalarField2D>& psi) {
  DualNormResult r;
  for (int k = 0; k < static_cast<int>(psi.size()); ++k) {
    const CrossSection& cs = psi[k].cs;
    for (int n : cs.interior_nodes()) {
      const double a = std::abs(psi[k].v[n]);
      if (a > r.xi || r.slice < 0) {
        r.xi = a;
        r.slice = k;
        r.i = n % cs.nx();
        r.j = n / cs.nx();
      }
    }
  }
  return r;
}

DualNormResult dual_norm(const StreamFamily& w) { return dual_norm(w.slices); }

BoundsCheck verify_vi_bounds(const VIReport& rep, const ObstacleProblem& p, double tol) {
  BoundsCheck c;
  const ScalarField2D lap = neg_laplacian_2d(rep.u);
  for (int n : p.cs.interior_nodes()) {
    const double fp = std::max(p.f.v[n], 0.0), fm = std::max(-p.f.v[n], 0.0);
    const double excess = std::max(-fm - lap.v[n], lap.v[n] - fp);
    c.worst = std::max(c.worst, excess);
    if (excess > tol) ++c.violations;
  }
  c.ok = c.violations == 0;
  return c;
}

double complementarity_residual(const VIReport& rep, const ObstacleProblem& p) {
  double m = 0.0;
  for (int n : p.cs.interior_nodes()) {
    const double gap = std::min(rep.u.v[n] - p.a1, p.a2 - rep.u.v[n]);
    m = std::max(m, std::abs(rep.residual_measure.v[n]) * std::max(gap, 0.0));
  }
  return m;
}

double discrete_objective(const ScalarField2D& u, const ScalarField2D& f) {
  const ScalarField2D lap = neg_laplacian_2d(u);
  const double h2 = u.cs.h() * u.cs.h();
  double q = 0.0, l = 0.0;
  for (int n : u.cs.interior_nodes()) {
    q += u.v[n] * lap.v[n];
    l += u.v[n] * f.v[n];
  }
  return h2 * (0.5 * q - l);
}

double l2_norm(const ScalarField2D& f) {
  double s = 0.0;
  for (int n : f.cs.interior_nodes()) s += f.v[n] * f.v[n];
  return std::sqrt(s) * f.cs.h();
}

double h1_norm(const ScalarField2D& u) {
  const ScalarField2D lap = neg_laplacian_2d(u);
  double s = 0.0, g = 0.0;
  for (int n : u.cs.interior_nodes()) {
    s += u.v[n] * u.v[n];
    g += u.v[n] * lap.v[n];
  }
  const double h2 = u.cs.h() * u.cs.h();
  return std::sqrt(h2 * (s + g));
}

double smallest_laplacian_eigenvalue(const CrossSection& cs) {
  const auto A = laplacian_matrix(cs);
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(A);
  if (ldlt.info() != Eigen::Success) throw Error(ErrorKind::numerical, "Laplacian factorization failed");
  Eigen::VectorXd x = Eigen::VectorXd::Ones(A.rows());
  double lambda = 0.0;
  for (int it = 0; it < 500; ++it) {
    x.normalize();
    Eigen::VectorXd y = ldlt.solve(x);
    const double next = 1.0 / x.dot(y);
    x = y;
    if (std::abs(next - lambda) <= 1e-13 * next) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return lambda;
}

double poincare_stability_bound(const CrossSection& cs) {
  const double l = smallest_laplacian_eigenvalue(cs);
  return std::sqrt(1.0 / l + 1.0 / (l * l));
}

double stability_check(const ScalarField2D& f1, const ScalarField2D& f2, const ObstacleProblem& tmpl, const VIConfig& cfg) {
  require(f1.cs.same_grid(tmpl.cs) && f2.cs.same_grid(tmpl.cs), "stability_check: sources must share the cross-section");
  ScalarField2D df(tmpl.cs);
  for (int n : tmpl.cs.interior_nodes()) df.v[n] = f1.v[n] - f2.v[n];
  const double den = l2_norm(df);
  if (den == 0.0) return 0.0;
  ObstacleProblem p1 = tmpl, p2 = tmpl;
  p1.f = f1;
  p2.f = f2;
  const VIReport r1 = solve_double_obstacle(p1, cfg);
  const VIReport r2 = solve_double_obstacle(p2, cfg);
  ScalarField2D du(tmpl.cs);
  for (int n : tmpl.cs.interior_nodes()) du.v[n] = r1.u.v[n] - r2.u.v[n];
  return h1_norm(du) / den;
}

}  // namespace hc1
