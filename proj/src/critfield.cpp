#include "hc1/critfield.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "hc1/error.hpp"
#include "hc1/plane_ops.hpp"

namespace hc1 {

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  threads = std::clamp(threads, 1, std::max(n, 1));
  if (threads == 1) {
    for (int k = 0; k < n; ++k) fn(k);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      try {
        for (int k = t * n / threads; k < (t + 1) * n / threads; ++k) fn(k);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

double XiResult::route_disagreement() const {
  const double s = std::max(std::abs(xi), std::abs(xi_route2));
  return s > 0.0 ? std::abs(xi - xi_route2) / s : 0.0;
}

XiResult compute_xi(const BStarSolution& sol, const DiscretizedDomain& dom, const SolverConfig& cfg) {
  const int nz = dom.nz();
  require(sol.w_star.nz() == nz, "solution does not match the domain");
  XiResult r;
  r.slice_curve.resize(nz);
  r.psi_route2.resize(nz);
  for (int k = 0; k < nz; ++k) {
    r.psi_route2[k] = solve_slice_linear(slice_b3(sol, dom, k), cfg);
    const DualNormResult d = dual_norm(std::vector<ScalarField2D>{sol.w_star.slices[k]});
    SliceCurvePoint& p = r.slice_curve[k];
    p.x3 = (k + 0.5) * dom.h3();
    p.sup_norm = d.xi;
    p.sup_norm_route2 = max_abs(r.psi_route2[k]);
    p.i = d.i;
    p.j = d.j;
  }
  const DualNormResult d1 = dual_norm(sol.w_star);
  r.xi = d1.xi;
  r.argmax_slice = d1.slice;
  r.xi_route2 = dual_norm(r.psi_route2).xi;
  return r;
}

double hc1_coefficient(double xi) {
  if (!(xi > 0.0) || !std::isfinite(xi)) fail("degenerate domain: xi must be positive");
  return 1.0 / (2.0 * xi);
}

Hc1Estimate hc1_estimate(double xi, double epsilon) {
  require(epsilon > 0.0 && epsilon < 1.0, "epsilon must lie in (0,1)");
  Hc1Estimate e;
  e.epsilon = epsilon;
  e.value = hc1_coefficient(xi) * std::abs(std::log(epsilon));
  return e;
}

double richardson(double coarse, double fine, double order) {
  return fine + (fine - coarse) / (std::pow(2.0, order) - 1.0);
}

std::string to_string(OnsetStatus s) {
  switch (s) {
    case OnsetStatus::found: return "found";
    case OnsetStatus::below_onset: return "grid entirely below onset";
    case OnsetStatus::above_onset: return "grid entirely above onset";
  }
  return "";
}

namespace {

std::vector<ScalarField2D> slice_sources(const BStarSolution& sol, const DiscretizedDomain& dom) {
  std::vector<ScalarField2D> b(dom.nz());
  for (int k = 0; k < dom.nz(); ++k) b[k] = slice_b3(sol, dom, k);
  return b;
}

}  // namespace

std::vector<VIReport> constrained_slices(const BStarSolution& sol, const DiscretizedDomain& dom, double h0,
                                         const VIConfig& cfg, int threads) {
  const auto b3 = slice_sources(sol, dom);
  std::vector<VIReport> out(dom.nz());
  parallel_for(dom.nz(), threads, [&](int k) { out[k] = solve_constrained_slice(b3[k], h0, cfg); });
  return out;
}

SweepResult sweep_h0(const BStarSolution& sol, const DiscretizedDomain& dom, std::span<const double> h0_grid,
                     const SweepOptions& opts) {
  require(!h0_grid.empty(), "h0 grid is empty");
  for (std::size_t m = 0; m < h0_grid.size(); ++m) {
    require(std::isfinite(h0_grid[m]) && h0_grid[m] > 0.0, "h0 grid values must be positive");
    require(m == 0 || h0_grid[m] > h0_grid[m - 1], "h0 grid must be strictly increasing");
  }
  opts.vi.validate();
  const auto b3 = slice_sources(sol, dom);
  const int nz = dom.nz();
  SweepResult res;
  res.mass_tol = opts.mass_tol_rel * dom.volume();
  std::vector<VIReport> prev(nz);
  for (double h0 : h0_grid) {
    std::vector<VIReport> cur(nz);
    parallel_for(nz, opts.threads, [&](int k) {
      const ScalarField2D* init = prev[k].u.cs.valid() ? &prev[k].u : nullptr;
      cur[k] = solve_constrained_slice(b3[k], h0, opts.vi, init);
    });
    SweepPoint p;
    p.h0 = h0;
    for (int k = 0; k < nz; ++k) {
      p.slice_mass.push_back(cur[k].mass);
      p.mass += cur[k].mass * dom.h3();
      p.coincidence_nodes += cur[k].lower_count + cur[k].upper_count;
      p.max_iterations = std::max(p.max_iterations, cur[k].iterations);
      p.converged = p.converged && cur[k].converged;
    }
    res.points.push_back(std::move(p));
    prev = std::move(cur);
  }
  res.last = std::move(prev);

  for (const SweepPoint& p : res.points)
    if (p.mass > res.mass_tol) {
      res.onset_h0 = p.h0;
      break;
    }
  if (!res.onset_h0) {
    res.status = OnsetStatus::below_onset;
  } else if (*res.onset_h0 == res.points.front().h0) {
    res.status = OnsetStatus::above_onset;
    res.onset_h0.reset();
  } else {
    res.status = OnsetStatus::found;
  }
  return res;
}

double slice_total_variation(const VectorField2D& v) {
  const CrossSection& cs = v.cs;
  const ScalarField2D c = curl2d(v);
  double s = 0.0;
  for (int n : cs.interior_nodes()) s += std::abs(c.v[n]);
  return s * cs.h() * cs.h();
}

VorticityReport reconstruct_v(const std::vector<ScalarField2D>& psi, const BStarSolution& sol,
                              const DiscretizedDomain& dom, std::span<const double> slice_masses) {
  const int nz = dom.nz();
  require(static_cast<int>(psi.size()) == nz, "stream family does not match the domain");
  require(slice_masses.empty() || static_cast<int>(slice_masses.size()) == nz, "slice mass count does not match the domain");
  const CrossSection& cs = dom.cross_section();
  const Grid3& G = sol.field_grid;
  const Index3 o = dom.offset_in(G);
  VorticityReport r;
  VectorField3D v3 = sol.A_star;
  for (int k = 0; k < nz; ++k) {
    require(psi[k].cs.same_grid(cs), "stream slice does not match the cross-section");
    VectorField2D v = perp_grad_2d(psi[k]);
    const VectorField2D a = slice_a(sol, dom, k);
    for (std::size_t n = 0; n < cs.size(); ++n) {
      v.v1[n] += a.v1[n];
      v.v2[n] += a.v2[n];
    }
    for (int j = 0; j < cs.ny(); ++j)
      for (int i = 0; i < cs.nx(); ++i) {
        const int I = i + o[0], J = j + o[1], K = k + o[2];
        if (I < 0 || J < 0 || K < 0 || I >= G.n[0] || J >= G.n[1] || K >= G.n[2]) continue;
        v3.c[0][G.index(I, J, K)] = v.v1[cs.index(i, j)];
        v3.c[1][G.index(I, J, K)] = v.v2[cs.index(i, j)];
      }
    r.tv_slices += (slice_masses.empty() ? slice_total_variation(v) : slice_masses[k]) * dom.h3();
    r.v.push_back(std::move(v));
  }

  const VectorField3D c = curl3d(v3);
  const double V = dom.h2() * dom.h2() * dom.h3();
  for (int k = 0; k < nz; ++k)
    for (int n : cs.interior_nodes()) {
      const int I = n % cs.nx() + o[0], J = n / cs.nx() + o[1], K = k + o[2];
      r.tv_3d += std::abs(c.c[2][G.index(I, J, K)]) * V;
    }
  return r;
}

MeanFieldEnergy mean_field_energy(const std::vector<VectorField2D>& v, const std::vector<VectorField2D>& a_hat,
                                  double field_norm_sq, const DiscretizedDomain& dom, double h0) {
  require(h0 > 0.0, "h0 must be positive");
  require(v.size() == a_hat.size() && static_cast<int>(v.size()) == dom.nz(), "slice families do not match the domain");
  const CrossSection& cs = dom.cross_section();
  const double V = dom.h2() * dom.h2() * dom.h3();
  MeanFieldEnergy e;
  for (std::size_t k = 0; k < v.size(); ++k) {
    for (int j = 0; j < cs.ny(); ++j)
      for (int i = 0; i < cs.nx(); ++i) {
        const std::size_t n = cs.index(i, j);
        const double d1 = v[k].v1[n] - a_hat[k].v1[n], d2 = v[k].v2[n] - a_hat[k].v2[n];
        e.kinetic += (cs.fraction_v(i, j) * d1 * d1 + cs.fraction_h(i, j) * d2 * d2) * V;
      }
    e.vorticity += slice_total_variation(v[k]) * dom.h3();
  }
  e.field = field_norm_sq;
  e.total = 0.5 * (e.kinetic + e.vorticity / h0 + e.field);
  return e;
}

MeanFieldEnergy mean_field_energy(const std::vector<VectorField2D>& v, const BStarSolution& sol,
                                  const DiscretizedDomain& dom, double h0) {
  std::vector<VectorField2D> a;
  for (int k = 0; k < dom.nz(); ++k) a.push_back(slice_a(sol, dom, k));
  return mean_field_energy(v, a, 2.0 * sol.field_energy, dom, h0);
}

}  // namespace hc1
