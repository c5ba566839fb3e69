#include <cmath>
#include <numbers>

#include "doctest.h"
#include "hc1/elliptic.hpp"
#include "hc1/error.hpp"
#include "hc1/obstacle.hpp"
#include "hc1/oracles.hpp"
#include "hc1/plane_ops.hpp"
#include "hc1/validation.hpp"
#include "support.hpp"

using namespace hc1;

namespace {

const CrossSection& disk32() {
  static const CrossSection cs = build_cross_section(Shape::disk(1.0), 1.0 / 32);
  return cs;
}

const CrossSection& disk16() {
  static const CrossSection cs = build_cross_section(Shape::disk(1.0), 1.0 / 16);
  return cs;
}

ScalarField2D constant(const CrossSection& cs, double c) {
  ScalarField2D f(cs);
  for (int n : cs.interior_nodes()) f.v[n] = c;
  return f;
}

ObstacleProblem problem(const CrossSection& cs, const ScalarField2D& f, double a1, double a2) {
  ObstacleProblem p;
  p.cs = cs;
  p.f = f;
  p.a1 = a1;
  p.a2 = a2;
  return p;
}

ScalarField2D random_source(const CrossSection& cs, double amp) {
  ScalarField2D f(cs);
  for (int n : cs.interior_nodes()) f.v[n] = test::uniform(-amp, amp);
  return f;
}

VIConfig tight_vi() {
  VIConfig c;
  c.tol_vi = 1e-12;
  return c;
}

// h0 at which the constant-source slice (b3 = 0) first touches its bounds, from the discrete torsion.
double slice_onset(const CrossSection& cs) {
  const ScalarField2D psi = solve_slice_linear(ScalarField2D(cs), SolverConfig{1e-12});
  return 0.5 / max_abs(psi);
}

}  // namespace

TEST_SUITE("obstacle") {

TEST_CASE("zero source gives the zero solution") {
  const ObstacleProblem p = problem(disk16(), ScalarField2D(disk16()), -1.0, 1.0);
  const VIReport r = solve_double_obstacle(p, VIConfig{});
  CHECK(r.converged);
  CHECK(max_abs(r.u) == 0.0);
  CHECK(r.mass == 0.0);
  CHECK(r.lower_count + r.upper_count == 0);
}

TEST_CASE("inactive bounds reproduce the Poisson solve") {
  const CrossSection& cs = disk32();
  for (int t = 0; t < 3; ++t) {
    const ScalarField2D f = random_source(cs, 1.0);
    const ScalarField2D ref = poisson_dirichlet_2d(f, SolverConfig{1e-13});
    const VIReport r = solve_double_obstacle(problem(cs, f, -100.0, 100.0), tight_vi());
    CHECK(r.converged);
    double err = 0.0;
    for (int n : cs.interior_nodes()) err = std::max(err, std::abs(r.u.v[n] - ref.v[n]));
    CHECK(err <= 1e-8 * max_abs(ref));
    CHECK(r.mass == 0.0);
  }
}

TEST_CASE("radial problem against the shooting solution") {
  const CrossSection& cs = disk32();
  for (double f : {1.0, -1.0}) {
    const VIReport r = solve_double_obstacle(problem(cs, constant(cs, f), -0.2, 0.2), VIConfig{});
    const oracle::RadialObstacle ref(1.0, f, -0.2, 0.2);
    CHECK(ref.rho() > 0.1);
    double err = 0.0;
    for (int n : cs.interior_nodes()) {
      const Vec2 x = cs.node(n % cs.nx(), n / cs.nx());
      err = std::max(err, std::abs(r.u.v[n] - ref.value(std::hypot(x.x, x.y))));
    }
    CAPTURE(f);
    CHECK(err <= 0.02 * 0.2);
    CHECK((f > 0 ? r.upper_count : r.lower_count) > 0);
    CHECK((f > 0 ? r.lower_count : r.upper_count) == 0);
  }
  CHECK(check_radial_obstacle(ValidationConfig{}).passed);
}

TEST_CASE("random problems: bounds, band, complementarity, monotone objective") {
  const CrossSection& cs = disk16();
  const double h = cs.h();
  for (int t = 0; t < 20; ++t) {
    const double a2 = test::uniform(0.005, 0.1), a1 = -test::uniform(0.005, 0.1);
    const ObstacleProblem p = problem(cs, random_source(cs, test::uniform(1.0, 10.0)), a1, a2);
    std::vector<double> trace;
    const VIReport r = solve_double_obstacle(p, VIConfig{}, nullptr, &trace);
    CAPTURE(t);
    REQUIRE(r.converged);
    for (int n : cs.interior_nodes()) {
      CHECK(r.u.v[n] >= a1);
      CHECK(r.u.v[n] <= a2);
    }
    const BoundsCheck b = verify_vi_bounds(r, p, 10.0 * h * h);
    CHECK(b.ok);
    CHECK(complementarity_residual(r, p) <= 1e-6 * (a2 - a1) * max_abs(p.f));
    // Sign conditions of the multiplier on the coincidence sets.
    for (int n : cs.interior_nodes()) {
      if (r.upper_set[n]) CHECK(r.residual_measure.v[n] <= 1e-6 * max_abs(p.f));
      if (r.lower_set[n]) CHECK(r.residual_measure.v[n] >= -1e-6 * max_abs(p.f));
    }
    REQUIRE(trace.size() >= 2);
    for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1] + 1e-12 * std::abs(trace[i - 1]));
    CHECK(trace.back() == doctest::Approx(discrete_objective(r.u, p.f)).epsilon(1e-12));
  }
}

TEST_CASE("solution minimizes the objective over the box") {
  const CrossSection& cs = disk16();
  const ObstacleProblem p = problem(cs, random_source(cs, 5.0), -0.05, 0.03);
  const VIReport r = solve_double_obstacle(p, tight_vi());
  const double J0 = discrete_objective(r.u, p.f);
  for (int t = 0; t < 20; ++t) {
    ScalarField2D u = r.u;
    for (int n : cs.interior_nodes()) u.v[n] = std::clamp(u.v[n] + test::uniform(-0.01, 0.01), p.a1, p.a2);
    CHECK(discrete_objective(u, p.f) >= J0 - 1e-12);
  }
}

TEST_CASE("initial iterate is clamped and does not change the answer") {
  const CrossSection& cs = disk16();
  const ObstacleProblem p = problem(cs, random_source(cs, 5.0), -0.05, 0.05);
  ScalarField2D init = constant(cs, 3.0);
  const VIReport a = solve_double_obstacle(p, tight_vi());
  const VIReport b = solve_double_obstacle(p, tight_vi(), &init);
  double d = 0.0;
  for (int n : cs.interior_nodes()) d = std::max(d, std::abs(a.u.v[n] - b.u.v[n]));
  CHECK(d <= 1e-9);
}

TEST_CASE("slice problem: onset, monotone mass, strong-field limit") {
  const CrossSection& cs = disk16();
  const ScalarField2D b3(cs);
  const double hc = slice_onset(cs);
  // Continuum value 1/(2 * R^2/4) = 2.
  CHECK(hc == doctest::Approx(2.0).epsilon(0.01));

  const VIReport below = solve_constrained_slice(b3, 0.99 * hc, VIConfig{});
  CHECK(below.mass == 0.0);
  CHECK(below.upper_count + below.lower_count == 0);
  const VIReport above = solve_constrained_slice(b3, 1.01 * hc, VIConfig{});
  CHECK(above.mass > 0.0);

  // The coincidence set of a disk starts at the centre.
  const VIReport r105 = solve_constrained_slice(b3, 1.05 * hc, VIConfig{});
  for (int n : cs.interior_nodes()) {
    const Vec2 x = cs.node(n % cs.nx(), n / cs.nx());
    if (std::hypot(x.x, x.y) < cs.h()) CHECK(r105.lower_set[n]);
  }
  // Source -(b3+1) is negative, so only the lower bound is touched.
  CHECK(r105.upper_count == 0);

  double prev = -1.0;
  for (double s : {0.8, 1.0, 1.02, 1.1, 1.3, 2.0, 4.0}) {
    const VIReport r = solve_constrained_slice(b3, s * hc, VIConfig{});
    CHECK(r.mass >= prev - 1e-12);
    prev = r.mass;
  }

  // Bounds collapse to zero: every node is active and the mass is the integral of |f|.
  const VIReport inf = solve_constrained_slice(b3, 1e9, VIConfig{});
  const double full = cs.interior_count() * cs.h() * cs.h();
  CHECK(inf.mass == doctest::Approx(full).epsilon(1e-3));
}

TEST_CASE("constrained slice problem carries the bounds exactly") {
  const ScalarField2D b3 = constant(disk16(), -0.25);
  const ObstacleProblem p = constrained_slice_problem(b3, 0.8);
  CHECK(p.a1 == -0.625);
  CHECK(p.a2 == 0.625);
  for (int n : disk16().interior_nodes()) CHECK(p.f.v[n] == -0.75);
  CHECK_THROWS_AS(constrained_slice_problem(b3, 0.0), Error);
  CHECK_THROWS_AS(constrained_slice_problem(b3, -1.0), Error);
}

TEST_CASE("dual norm") {
  const CrossSection& cs = disk16();
  CHECK(dual_norm(std::vector<ScalarField2D>{ScalarField2D(cs), ScalarField2D(cs)}).xi == 0.0);
  // Unit torsion: max |psi| close to R^2/4.
  const ScalarField2D psi = solve_slice_linear(ScalarField2D(cs), SolverConfig{1e-12});
  ScalarField2D half = psi;
  for (double& v : half.v) v *= 0.5;
  const DualNormResult d = dual_norm(std::vector<ScalarField2D>{half, psi});
  CHECK(d.xi == doctest::Approx(0.25).epsilon(0.01));
  CHECK(d.slice == 1);
  CHECK(std::hypot(cs.node(d.i, d.j).x, cs.node(d.i, d.j).y) <= 2.0 * cs.h());
  CHECK(check_lp_dual_norm(ValidationConfig{}).passed);
}

TEST_CASE("stability against source perturbations") {
  const CrossSection& cs = disk16();
  const double bound = poincare_stability_bound(cs);
  const ObstacleProblem tmpl = problem(cs, ScalarField2D(cs), -0.05, 0.05);
  for (int t = 0; t < 20; ++t) {
    const ScalarField2D f1 = random_source(cs, 5.0), f2 = random_source(cs, 5.0);
    const double ratio = stability_check(f1, f2, tmpl, VIConfig{});
    CHECK(ratio <= 10.0 * bound);
  }
  const ScalarField2D f = random_source(cs, 5.0);
  CHECK(stability_check(f, f, tmpl, VIConfig{}) == 0.0);

  // For small perturbations the ratio settles to a fixed value.
  const ScalarField2D g = random_source(cs, 1.0);
  std::vector<double> ratios;
  for (double eps : {1e-2, 1e-3}) {
    ScalarField2D f2 = f;
    for (int n : cs.interior_nodes()) f2.v[n] += eps * g.v[n];
    ratios.push_back(stability_check(f, f2, tmpl, tight_vi()));
  }
  CHECK(ratios[0] > 0.0);
  CHECK(std::abs(ratios[0] - ratios[1]) <= 0.2 * ratios[1]);
}

TEST_CASE("smallest Dirichlet eigenvalue of the unit disk") {
  // First zero of J0, squared.
  CHECK(smallest_laplacian_eigenvalue(disk32()) == doctest::Approx(5.783186).epsilon(0.01));
  const double l = smallest_laplacian_eigenvalue(disk16());
  CHECK(poincare_stability_bound(disk16()) == doctest::Approx(std::sqrt(1 / l + 1 / (l * l))));
}

TEST_CASE("norms") {
  const CrossSection& cs = disk32();
  // |1|_{L2} over the disk is sqrt(pi) up to the boundary layer.
  CHECK(l2_norm(constant(cs, 1.0)) == doctest::Approx(std::sqrt(std::numbers::pi)).epsilon(0.05));
  CHECK(h1_norm(ScalarField2D(cs)) == 0.0);
  const ScalarField2D u = random_source(cs, 1.0);
  CHECK(h1_norm(u) >= l2_norm(u));
}

TEST_CASE("argument validation") {
  const CrossSection& cs = disk16();
  const ScalarField2D f(cs);
  CHECK_THROWS_AS(solve_double_obstacle(problem(cs, f, 0.0, 1.0), VIConfig{}), Error);
  CHECK_THROWS_AS(solve_double_obstacle(problem(cs, f, -1.0, 0.0), VIConfig{}), Error);
  CHECK_THROWS_AS(solve_double_obstacle(problem(cs, f, -1.0, INFINITY), VIConfig{}), Error);
  ScalarField2D bad(cs);
  bad.v[cs.interior_nodes()[0]] = NAN;
  CHECK_THROWS_AS(solve_double_obstacle(problem(cs, bad, -1.0, 1.0), VIConfig{}), Error);
  CHECK_THROWS_AS(solve_double_obstacle(problem(cs, ScalarField2D(disk32()), -1.0, 1.0), VIConfig{}), Error);
  for (double w : {0.0, 2.0}) {
    VIConfig c;
    c.omega = w;
    CHECK_THROWS_AS(c.validate(), Error);
  }
  VIConfig c;
  c.tol_vi = 0.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = VIConfig{};
  c.max_iter = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  CHECK_THROWS_AS(solve_slice_linear(bad, SolverConfig{}), Error);
}

TEST_CASE("iteration cap is reported, not hidden") {
  const CrossSection& cs = disk16();
  VIConfig c;
  c.max_iter = 3;
  const VIReport r = solve_double_obstacle(problem(cs, constant(cs, 1.0), -1.0, 1.0), c);
  CHECK_FALSE(r.converged);
  CHECK(r.iterations == 3);
}

}  // TEST_SUITE
