#include "hc1/oracles.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "hc1/error.hpp"
#include "hc1/plane_ops.hpp"

namespace hc1::oracle {

LpResult simplex_max(const std::vector<double>& c, const std::vector<std::vector<double>>& A,
                     const std::vector<double>& b, int max_pivots) {
  const int m = static_cast<int>(A.size()), n = static_cast<int>(c.size());
  require(static_cast<int>(b.size()) == m, "simplex: row count mismatch");
  const int w = n + m + 1;
  // Rows 0..m-1 are constraints with slack columns n..n+m-1; row m holds -c.
  std::vector<double> T(static_cast<std::size_t>(m + 1) * w, 0.0);
  auto at = [&](int r, int col) -> double& { return T[static_cast<std::size_t>(r) * w + col]; };
  std::vector<int> basis(m);
  for (int r = 0; r < m; ++r) {
    require(static_cast<int>(A[r].size()) == n, "simplex: column count mismatch");
    require(b[r] >= 0.0, "simplex: the origin must be feasible");
    for (int j = 0; j < n; ++j) at(r, j) = A[r][j];
    at(r, n + r) = 1.0;
    at(r, w - 1) = b[r];
    basis[r] = n + r;
  }
  for (int j = 0; j < n; ++j) at(m, j) = -c[j];

  const double eps = 1e-12;
  LpResult res;
  int pivots = 0;
  for (;; ++pivots) {
    if (pivots >= max_pivots) {
      res.status = LpResult::Status::iteration_limit;
      break;
    }
    int enter = -1;
    for (int j = 0; j < w - 1; ++j)
      if (at(m, j) < -eps) {
        enter = j;
        break;
      }
    if (enter < 0) break;
    int leave = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int r = 0; r < m; ++r)
      if (at(r, enter) > eps) {
        const double ratio = at(r, w - 1) / at(r, enter);
        if (leave < 0 || ratio < best - eps ||(std::abs(ratio - best) <= eps && basis[r] < basis[leave])) {
          best = ratio;
          leave = r;
        }
      }
    if (leave < 0) {
      res.status = LpResult::Status::unbounded;
      return res;
    }
    const double piv = at(leave, enter);
    for (int j = 0; j < w; ++j) at(leave, j) /= piv;
    for (int r = 0; r <= m; ++r) {
      if (r == leave) continue;
      const double f = at(r, enter);
      if (f == 0.0) continue;
      for (int j = 0; j < w; ++j) at(r, j) -= f * at(leave, j);
    }
    basis[leave] = enter;
  }
  res.x.assign(n, 0.0);
  for (int r = 0; r < m; ++r)
    if (basis[r] < n) res.x[basis[r]] = at(r, w - 1);
  res.value = at(m, w - 1);
  return res;
}

DualNormLp dual_norm_lp(const StreamFamily& w, double V) {
  const CrossSection& cs = w.cs;
  const int nz = w.nz();
  const int nodes = cs.interior_count();

  // Domain edges of one slice: (component, flat index).
  std::vector<std::pair<int, std::size_t>> edges;
  for (int j = 0; j < cs.ny(); ++j)
    for (int i = 0; i < cs.nx(); ++i) {
      if (cs.edge_v_in_domain(i, j)) edges.push_back({0, cs.index(i, j)});
      if (cs.edge_h_in_domain(i, j)) edges.push_back({1, cs.index(i, j)});
    }
  const int ne = static_cast<int>(edges.size());

  // Curl of each unit edge field, restricted to interior nodes.
  std::vector<std::vector<double>> M(ne, std::vector<double>(nodes, 0.0));
  for (int e = 0; e < ne; ++e) {
    VectorField2D phi(cs);
    (edges[e].first == 0 ? phi.v1 : phi.v2)[edges[e].second] = 1.0;
    const ScalarField2D c = curl2d(phi);
    for (int r = 0; r < nodes; ++r) M[e][r] = c.v[cs.interior_nodes()[r]];
  }

  // Variables: phi+ and phi- per slice edge, then s per slice node.
  const int nphi = 2 * ne * nz, ns = nodes * nz, n = nphi + ns;
  std::vector<double> c(n, 0.0);
  for (int k = 0; k < nz; ++k) {
    const VectorField2D xi = plane_current(w.slices[k]);
    for (int e = 0; e < ne; ++e) {
      const double g = V * (edges[e].first == 0 ? xi.v1 : xi.v2)[edges[e].second];
      c[2 * (k * ne + e)] = g;
      c[2 * (k * ne + e) + 1] = -g;
    }
  }
  std::vector<std::vector<double>> A;
  std::vector<double> b;
  for (int k = 0; k < nz; ++k)
    for (int r = 0; r < nodes; ++r)
      for (int sign : {1, -1}) {
        std::vector<double> row(n, 0.0);
        for (int e = 0; e < ne; ++e) {
          row[2 * (k * ne + e)] = sign * M[e][r];
          row[2 * (k * ne + e) + 1] = -sign * M[e][r];
        }
        row[nphi + k * nodes + r] = -1.0;
        A.push_back(std::move(row));
        b.push_back(0.0);
      }
  std::vector<double> budget(n, 0.0);
  for (int q = 0; q < ns; ++q) budget[nphi + q] = V;
  A.push_back(std::move(budget));
  b.push_back(1.0);

  const LpResult r = simplex_max(c, A, b);
  DualNormLp out;
  out.value = r.value;
  out.status = r.status;
  out.unknowns = n;
  out.constraints = static_cast<int>(A.size());
  return out;
}

RadialObstacle::RadialObstacle(double R, double f, double a1, double a2) : R_(R), f_(f) {
  require(R > 0.0 && a1 < 0.0 && a2 > 0.0, "radial obstacle: need R > 0 and a1 < 0 < a2");
  bound_ = f >= 0.0 ? a2 : a1;
  if (std::abs(f) * R * R / 4.0 <= std::abs(bound_)) {
    rho_ = 0.0;
    return;
  }
  // u(R; rho) has the sign of the bound near rho = R and the opposite sign as rho -> 0.
  double lo = 1e-9 * R, hi = R;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * R; ++it) {
    const double mid = 0.5 * (lo + hi);
    (shoot(mid, R) * bound_ > 0.0 ? hi : lo) = mid;
  }
  rho_ = 0.5 * (lo + hi);
}

double RadialObstacle::shoot(double rho, double r_end) const {
  // y = (u, u'), y' = (u', -f - u'/r).
  const int steps = 4000;
  const double dr = (r_end - rho) / steps;
  double r = rho, u = bound_, p = 0.0;
  auto rhs = [&](double rr, double pp) { return -f_ - pp / rr; };
  for (int s = 0; s < steps; ++s) {
    const double k1u = p, k1p = rhs(r, p);
    const double k2u = p + 0.5 * dr * k1p, k2p = rhs(r + 0.5 * dr, p + 0.5 * dr * k1p);
    const double k3u = p + 0.5 * dr * k2p, k3p = rhs(r + 0.5 * dr, p + 0.5 * dr * k2p);
    const double k4u = p + dr * k3p, k4p = rhs(r + dr, p + dr * k3p);
    u += dr / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u);
    p += dr / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p);
    r += dr;
  }
  return u;
}

double RadialObstacle::value(double r) const {
  r = std::abs(r);
  if (r >= R_) return 0.0;
  if (rho_ == 0.0) return f_ * (R_ * R_ - r * r) / 4.0;
  if (r <= rho_) return bound_;
  return shoot(rho_, r);
}

double RadialObstacle::closed_form_residual(double rho) const {
  return bound_ - f_ * (R_ * R_ - rho * rho) / 4.0 + f_ * rho * rho / 2.0 * std::log(R_ / rho);
}

double gaussian_density(double r, double sigma) {
  return std::exp(-r * r / (2.0 * sigma * sigma)) / std::pow(2.0 * std::numbers::pi * sigma * sigma, 1.5);
}

double gaussian_potential(double r, double sigma) {
  if (r < 1e-12 * sigma) return std::sqrt(2.0 / std::numbers::pi) / (4.0 * std::numbers::pi * sigma);
  return std::erf(r / (std::sqrt(2.0) * sigma)) / (4.0 * std::numbers::pi * r);
}

double bump_stream(double r, double b) {
  if (r >= b) return 0.0;
  const double q = 1.0 - r * r / (b * b);
  return q * q;
}

double bump_current_axis_field(double b, double t, double z) {
  // A ring of radius r at height s carries J(r) dr ds and gives r^2 / (2 (r^2 + (z-s)^2)^{3/2})
  // on the axis; the s-integral over |s| < t/2 is done in closed form. Composite Simpson in r.
  const double c = t / 2.0;
  auto g = [&](double r) {
    const double J = 4.0 * r / (b * b) * (1.0 - r * r / (b * b));
    return J * ((c - z) / std::sqrt(r * r + (c - z) * (c - z)) + (c + z) / std::sqrt(r * r + (c + z) * (c + z)));
  };
  const int n = 20000;
  const double dr = b / n;
  double s = 0.0;  // J vanishes at both ends
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * g(i * dr);
  return 0.5 * s * dr / 3.0;
}

double bump_current_center_field(double b, double t) { return bump_current_axis_field(b, t, 0.0); }

Eigen::MatrixXd assemble_dense(int n, const LinearOp& op) {
  Eigen::MatrixXd A(n, n);
  std::vector<double> e(n, 0.0), col(n);
  for (int i = 0; i < n; ++i) {
    e[i] = 1.0;
    op(e, col);
    for (int r = 0; r < n; ++r) A(r, i) = col[r];
    e[i] = 0.0;
  }
  return A;
}

}  // namespace hc1::oracle
