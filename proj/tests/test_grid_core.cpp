#include <cmath>
#include <numbers>
#include <queue>

#include "doctest.h"
#include "hc1/domain.hpp"
#include "hc1/error.hpp"
#include "hc1/plane_ops.hpp"
#include "hc1/staggered.hpp"
#include "support.hpp"

using namespace hc1;
using hc1::test::uniform;

namespace {

bool smooth_size(int n) {
  for (int p : {2, 3, 5, 7})
    while (n % p == 0) n /= p;
  return n == 1;
}

}  // namespace

TEST_SUITE("grid_core") {

TEST_CASE("coarse disk has about twelve nodes and area near pi") {
  const CrossSection cs = build_cross_section(Shape::disk(1.0), 0.5);
  CHECK(cs.interior_count() == 12);
  CHECK(std::abs(cs.area() - std::numbers::pi) <= 0.5 * 2.0 * std::numbers::pi);
}

TEST_CASE("aligned rectangle has exact area") {
  const CrossSection cs = build_cross_section(Shape::rectangle(2.0, 1.0), 0.25);
  CHECK(cs.area() == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(cs.interior_count() == 32);
}

TEST_CASE("fine disk area") {
  const CrossSection cs = build_cross_section(Shape::disk(1.0), 1.0 / 128);
  CHECK(std::abs(cs.area() - std::numbers::pi) < 0.05);
}

TEST_CASE("disk area error bounded by h times perimeter") {
  for (auto b : {BoundaryTreatment::cut_edge, BoundaryTreatment::staircase})
    for (int N : {4, 8, 16, 32, 64}) {
      CrossSectionOptions o;
      o.boundary = b;
      const Shape s = Shape::disk(0.83);
      const CrossSection cs = build_cross_section(s, 1.0 / N, o);
      CHECK(std::abs(cs.area() - s.area()) <= s.perimeter() / N);
    }
}

TEST_CASE("disk area converges regularly under halving") {
  // R = 1 keeps the boundary at the same lattice offset under halving.
  for (auto al : {GridAlignment::cell_centered, GridAlignment::node_centered}) {
    CrossSectionOptions o;
    o.alignment = al;
    double prev = 0.0;
    for (int N : {8, 16, 32, 64, 128, 256}) {
      const CrossSection cs = build_cross_section(Shape::disk(1.0), 1.0 / N, o);
      const double err = std::abs(cs.area() - std::numbers::pi);
      if (prev > 0.0) {
        CAPTURE(N);
        CHECK(prev / err >= 1.8);
      }
      prev = err;
    }
  }
}

TEST_CASE("disk area is first order for generic radii") {
  // The endpoint offset changes with N here, so successive ratios oscillate.
  for (auto al : {GridAlignment::cell_centered, GridAlignment::node_centered})
    for (double R : {0.61, 0.73, 0.9}) {
      CrossSectionOptions o;
      o.alignment = al;
      double first = 0.0, last = 0.0;
      for (int N : {8, 16, 32, 64, 128, 256, 512}) {
        const CrossSection cs = build_cross_section(Shape::disk(R), 1.0 / N, o);
        const double scaled = std::abs(cs.area() - std::numbers::pi * R * R) * N;
        CAPTURE(N);
        CAPTURE(R);
        CHECK(scaled <= 0.25);
        if (N <= 16) first = std::max(first, scaled);
        if (N >= 256) last = std::max(last, scaled);
      }
      // Envelope of err/h shrinks.
      CHECK(last <= 0.5 * first);
    }
}

TEST_CASE("mask is connected and boundary nodes touch both sides") {
  for (const Shape& s : {Shape::disk(1.0), Shape::rectangle(1.5, 0.7), Shape::polygon({{0, 0}, {1.1, 0.1}, {0.3, 0.9}})}) {
    const CrossSection cs = build_cross_section(s, 1.0 / 24);
    std::vector<char> seen(cs.size(), 0);
    std::queue<int> q;
    q.push(cs.interior_nodes().front());
    seen[cs.interior_nodes().front()] = 1;
    int count = 0;
    while (!q.empty()) {
      const int n = q.front();
      q.pop();
      ++count;
      const int i = n % cs.nx(), j = n / cs.nx();
      const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
      for (int k = 0; k < 4; ++k)
        if (cs.interior(i + di[k], j + dj[k]) && !seen[cs.index(i + di[k], j + dj[k])]) {
          seen[cs.index(i + di[k], j + dj[k])] = 1;
          q.push(static_cast<int>(cs.index(i + di[k], j + dj[k])));
        }
    }
    CHECK(count == cs.interior_count());
    for (int n : cs.boundary_nodes()) {
      const int i = n % cs.nx(), j = n / cs.nx();
      CHECK_FALSE(cs.interior(i, j));
      CHECK((cs.interior(i + 1, j) || cs.interior(i - 1, j) || cs.interior(i, j + 1) || cs.interior(i, j - 1)));
    }
    for (int n : cs.interior_nodes()) {
      const Vec2 x = cs.node(n % cs.nx(), n / cs.nx());
      CHECK(s.contains(x));
    }
  }
}

TEST_CASE("cross-section errors") {
  CHECK_THROWS_AS(build_cross_section(Shape::disk(1.0), 0.0), Error);
  CHECK_THROWS_AS(build_cross_section(Shape::disk(1.0), 0.7), Error);
  CHECK_THROWS_AS(Shape::disk(0.0), Error);
  CHECK_THROWS_AS(Shape::rectangle(1.0, -1.0), Error);
  CHECK_THROWS_AS(Shape::polygon({{0, 0}, {1, 0}, {2, 0}}), Error);
}

TEST_CASE("cut-edge fractions lie in (0,1] and staircase is unit") {
  const CrossSection cut = build_cross_section(Shape::disk(1.0), 1.0 / 16);
  CrossSectionOptions o;
  o.boundary = BoundaryTreatment::staircase;
  const CrossSection st = build_cross_section(Shape::disk(1.0), 1.0 / 16, o);
  bool partial = false;
  for (int j = 0; j < cut.ny(); ++j)
    for (int i = 0; i < cut.nx(); ++i) {
      const double f = cut.fraction_v(i, j);
      CHECK(f >= 0.0);
      CHECK(f <= 1.0);
      if (f > 0.0 && f < 1.0) partial = true;
      if (st.edge_v_in_domain(i, j)) CHECK(st.fraction_v(i, j) == 1.0);
    }
  CHECK(partial);
}

TEST_CASE("embedded disk cylinder") {
  const CrossSection cs = build_cross_section(Shape::disk(1.0), 1.0 / 8);
  const DiscretizedDomain dom = embed_cylinder(cs, 1.0, 8, {1.0, 4096.0});
  const Vec3 e = dom.box_extent();
  CHECK(e[0] >= 2.0);
  CHECK(e[1] >= 2.0);
  CHECK(e[2] >= 1.5);
  CHECK(e[0] >= 1.0 + dom.diameter() - 1e-12);
  for (int d = 0; d < 3; ++d) CHECK(smooth_size(dom.box_resolution()[d]));
  CHECK(dom.h3() == doctest::Approx(0.125));

  const Index3 off = dom.offset_in(dom.box());
  const Grid3& g = dom.box();
  for (int k = 0; k < g.n[2]; ++k) {
    const int kk = k - off[2];
    for (int j = 0; j < g.n[1]; ++j)
      for (int i = 0; i < g.n[0]; ++i) {
        const int ii = i - off[0], jj = j - off[1];
        const bool want = kk >= 0 && kk < dom.nz() && cs.interior(ii, jj);
        if (dom.in_d(i, j, k) != want) {
          FAIL("d_mask differs from the cross-section mask at box index " << i << "," << j << "," << k);
        }
      }
  }
}

TEST_CASE("rectangle cylinder volume") {
  const CrossSection cs = build_cross_section(Shape::rectangle(1.0, 1.0), 1.0 / 16);
  const DiscretizedDomain dom = embed_cylinder(cs, 2.0, 4);
  long count = 0;
  for (auto m : dom.d_mask()) count += m;
  const double vol = count * dom.h2() * dom.h2() * dom.h3();
  CHECK(std::abs(vol - 2.0) <= 4.0 * dom.h2());
  CHECK(dom.volume() == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("embedding errors") {
  const CrossSection cs = build_cross_section(Shape::disk(1.0), 1.0 / 8);
  CHECK_THROWS_AS(embed_cylinder(cs, 1.0, 1), Error);
  CHECK_THROWS_AS(embed_cylinder(cs, 0.0, 4), Error);
  CHECK_THROWS_AS(embed_cylinder(cs, 1.0, 4, {0.4, 4096.0}), Error);
  try {
    embed_cylinder(cs, 1.0, 4, {1.0, 0.01});
    FAIL("expected a resource error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::resource);
  }
}

TEST_CASE("next_fft_size") {
  CHECK(next_fft_size(1) == 1);
  CHECK(next_fft_size(11) == 12);
  CHECK(next_fft_size(13) == 14);
  CHECK(next_fft_size(97) == 98);
  for (int n = 1; n < 300; ++n) {
    const int m = next_fft_size(n);
    CHECK(m >= n);
    CHECK(smooth_size(m));
    for (int q = n; q < m; ++q) CHECK_FALSE(smooth_size(q));
  }
}

TEST_CASE("perp_grad of zero and of a linear field") {
  const CrossSection cs = build_cross_section(Shape::disk(1.0), 1.0 / 16);
  const VectorField2D z = perp_grad_2d(ScalarField2D(cs));
  CHECK(max_abs(z.v1) == 0.0);
  CHECK(max_abs(z.v2) == 0.0);

  ScalarField2D w(cs);
  for (int n : cs.interior_nodes()) w.v[n] = cs.node(n % cs.nx(), n / cs.nx()).x;
  const VectorField2D g = perp_grad_2d(w);
  for (int j = 0; j < cs.ny(); ++j)
    for (int i = 0; i < cs.nx(); ++i) {
      if (cs.interior(i, j) && cs.interior(i, j + 1)) CHECK(std::abs(g.v1[cs.index(i, j)]) < 1e-12);
      if (cs.interior(i, j) && cs.interior(i + 1, j)) CHECK(g.v2[cs.index(i, j)] == doctest::Approx(-1.0).epsilon(1e-12));
    }
}

TEST_CASE("perp_grad rejects values outside the mask") {
  const CrossSection cs = build_cross_section(Shape::disk(1.0), 1.0 / 8);
  ScalarField2D w(cs);
  w.v[cs.boundary_nodes().front()] = 1.0;
  CHECK_THROWS_AS(perp_grad_2d(w), Error);
}

TEST_CASE("curl2d of perp_grad is the five-point Laplacian") {
  for (auto b : {BoundaryTreatment::cut_edge, BoundaryTreatment::staircase}) {
    CrossSectionOptions o;
    o.boundary = b;
    const CrossSection cs = build_cross_section(Shape::disk(1.0), 1.0 / 20, o);
    const auto L = laplacian_matrix(cs);
    for (int t = 0; t < 50; ++t) {
      const ScalarField2D w = test::random_interior(cs);
      const ScalarField2D c = curl2d(perp_grad_2d(w));
      const ScalarField2D l = neg_laplacian_2d(w);
      const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(to_compact(w).data(), cs.interior_count());
      const Eigen::VectorXd Lx = L * x;
      const double scale = max_abs(l);
      double err = 0.0, errm = 0.0;
      for (int r = 0; r < cs.interior_count(); ++r) {
        const int n = cs.interior_nodes()[r];
        err = std::max(err, std::abs(c.v[n] - l.v[n]));
        errm = std::max(errm, std::abs(Lx[r] - l.v[n]));
      }
      CHECK(err <= 1e-12 * scale);
      CHECK(errm <= 1e-12 * scale);
    }
  }
}

TEST_CASE("div3d of curl3d vanishes") {
  const Grid3 g{{17, 12, 9}, {0.1, 0.07, 0.2}, {0, 0, 0}};
  for (auto l : {VectorLayout::edges, VectorLayout::faces})
    for (int t = 0; t < 20; ++t) {
      const VectorField3D v = test::random_field(g, l);
      const VectorField3D c = curl3d(v);
      const double scale = max_abs(v) / (0.07 * 0.07);
      CHECK(max_abs(div3d(c).v) <= 1e-12 * scale);
    }
}

TEST_CASE("constant fields have zero curl and divergence away from the array edge") {
  const Grid3 g{{8, 8, 8}, {0.5, 0.5, 0.5}, {0, 0, 0}};
  VectorField3D v(g, VectorLayout::faces);
  for (int d = 0; d < 3; ++d) std::fill(v.c[d].begin(), v.c[d].end(), d + 1.0);
  const VectorField3D c = curl3d(v);
  const ScalarField3D dv = div3d(v);
  for (int k = 1; k < 7; ++k)
    for (int j = 1; j < 7; ++j)
      for (int i = 1; i < 7; ++i) {
        for (int d = 0; d < 3; ++d) CHECK(c.c[d][g.index(i, j, k)] == 0.0);
        CHECK(dv(i, j, k) == 0.0);
      }
}

TEST_CASE("operators are linear") {
  const CrossSection cs = build_cross_section(Shape::disk(1.0), 1.0 / 12);
  const Grid3 g{{9, 8, 7}, {0.1, 0.1, 0.15}, {0, 0, 0}};
  for (int t = 0; t < 10; ++t) {
    const double a = uniform(), b = uniform();
    const ScalarField2D u = test::random_interior(cs), w = test::random_interior(cs);
    ScalarField2D s(cs);
    for (std::size_t n = 0; n < s.v.size(); ++n) s.v[n] = a * u.v[n] + b * w.v[n];
    auto check2 = [&](const std::vector<double>& ls, const std::vector<double>& lu, const std::vector<double>& lw) {
      double e = 0.0, m = 0.0;
      for (std::size_t n = 0; n < ls.size(); ++n) {
        e = std::max(e, std::abs(ls[n] - a * lu[n] - b * lw[n]));
        m = std::max(m, std::abs(ls[n]));
      }
      CHECK(e <= 1e-12 * std::max(m, 1.0));
    };
    const VectorField2D ps = perp_grad_2d(s), pu = perp_grad_2d(u), pw = perp_grad_2d(w);
    check2(ps.v1, pu.v1, pw.v1);
    check2(ps.v2, pu.v2, pw.v2);
    check2(curl2d(ps).v, curl2d(pu).v, curl2d(pw).v);
    check2(neg_laplacian_2d(s).v, neg_laplacian_2d(u).v, neg_laplacian_2d(w).v);

    const VectorField3D x = test::random_field(g, VectorLayout::faces), y = test::random_field(g, VectorLayout::faces);
    VectorField3D z(g, VectorLayout::faces);
    for (int d = 0; d < 3; ++d)
      for (std::size_t n = 0; n < g.size(); ++n) z.c[d][n] = a * x.c[d][n] + b * y.c[d][n];
    const VectorField3D cz = curl3d(z), cx = curl3d(x), cy = curl3d(y);
    for (int d = 0; d < 3; ++d) check2(cz.c[d], cx.c[d], cy.c[d]);
    check2(div3d(z).v, div3d(x).v, div3d(y).v);
    const ScalarField3D p = test::random_field(g, Stagger::node), q = test::random_field(g, Stagger::node);
    ScalarField3D r(g, Stagger::node);
    for (std::size_t n = 0; n < g.size(); ++n) r.v[n] = a * p.v[n] + b * q.v[n];
    const VectorField3D gr = grad3d(r), gp = grad3d(p), gq = grad3d(q);
    for (int d = 0; d < 3; ++d) check2(gr.c[d], gp.c[d], gq.c[d]);
  }
}

TEST_CASE("grad3d and div3d on edges are negative transposes") {
  const Grid3 g{{7, 6, 5}, {0.3, 0.2, 0.1}, {0, 0, 0}};
  for (int t = 0; t < 5; ++t) {
    const ScalarField3D f = test::random_field(g, Stagger::node);
    const VectorField3D v = test::random_field(g, VectorLayout::edges);
    const VectorField3D gf = grad3d(f);
    double lhs = 0.0;
    for (int d = 0; d < 3; ++d) lhs += test::dot(gf.c[d], v.c[d]);
    const double rhs = -test::dot(f.v, div3d(v).v);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }
}

TEST_CASE("curl3d on faces and on edges are transposes") {
  const Grid3 g{{6, 7, 5}, {0.3, 0.2, 0.1}, {0, 0, 0}};
  for (int t = 0; t < 5; ++t) {
    const VectorField3D e = test::random_field(g, VectorLayout::edges), f = test::random_field(g, VectorLayout::faces);
    const VectorField3D ce = curl3d(e), cf = curl3d(f);
    double a = 0.0, b = 0.0;
    for (int d = 0; d < 3; ++d) {
      a += test::dot(ce.c[d], f.c[d]);
      b += test::dot(e.c[d], cf.c[d]);
    }
    CHECK(a == doctest::Approx(b).epsilon(1e-12));
  }
}

TEST_CASE("gauge formula") {
  const GaugeFn a = symmetric_gauge();
  const Vec3 z = a({0.0, 0.0, 0.0});
  CHECK(z[0] == 0.0);
  CHECK(z[1] == 0.0);
  CHECK(z[2] == 0.0);
  const Vec3 p = a({2.0, 0.0, 5.0});
  CHECK(p[0] == 0.0);
  CHECK(p[1] == 1.0);
  CHECK(p[2] == 0.0);
}

TEST_CASE("sampled gauge has unit axial curl and no divergence") {
  const CrossSection cs = build_cross_section(Shape::disk(1.0), 1.0 / 8);
  const DiscretizedDomain dom = embed_cylinder(cs, 1.0, 4);
  const VectorField3D a = gauge_field_a(dom);
  const Grid3& g = a.grid;
  CHECK(max_abs(a.c[2]) == 0.0);
  const VectorField3D c = curl3d(a);
  const ScalarField3D d = div3d(a);
  double ec = 0.0, ed = 0.0;
  for (int k = 1; k < g.n[2] - 1; ++k)
    for (int j = 1; j < g.n[1] - 1; ++j)
      for (int i = 1; i < g.n[0] - 1; ++i) {
        const std::size_t n = g.index(i, j, k);
        ec = std::max({ec, std::abs(c.c[0][n]), std::abs(c.c[1][n]), std::abs(c.c[2][n] - 1.0)});
        ed = std::max(ed, std::abs(d.v[n]));
      }
  CHECK(ec < 1e-12);
  CHECK(ed < 1e-12);
  CHECK(g == dom.box());
}

}  // TEST_SUITE
