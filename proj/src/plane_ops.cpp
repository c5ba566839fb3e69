#include "hc1/plane_ops.hpp"

#include <cmath>

#include "hc1/error.hpp"

namespace hc1 {

void check_dirichlet(const ScalarField2D& f) {
  require(f.cs.valid() && f.v.size() == f.cs.size(), "scalar field does not match its grid");
  const auto& m = f.cs.mask();
  for (std::size_t n = 0; n < f.v.size(); ++n)
    if (!m[n] && f.v[n] != 0.0) fail("stream field is nonzero outside the interior mask");
}

namespace {

VectorField2D edge_differences(const ScalarField2D& w, bool weighted) {
  check_dirichlet(w);
  const CrossSection& cs = w.cs;
  VectorField2D out(cs);
  const double ih = 1.0 / cs.h();
  for (int j = 0; j < cs.ny(); ++j)
    for (int i = 0; i < cs.nx(); ++i) {
      const std::size_t n = cs.index(i, j);
      if (j + 1 < cs.ny() && cs.edge_v_in_domain(i, j)) {
        const double s = weighted ? cs.weight_v(i, j) : 1.0;
        out.v1[n] = s * (w.v[cs.index(i, j + 1)] - w.v[n]) * ih;
      }
      if (i + 1 < cs.nx() && cs.edge_h_in_domain(i, j)) {
        const double s = weighted ? cs.weight_h(i, j) : 1.0;
        out.v2[n] = -s * (w.v[cs.index(i + 1, j)] - w.v[n]) * ih;
      }
    }
  return out;
}

}  // namespace

VectorField2D perp_grad_2d(const ScalarField2D& w) { return edge_differences(w, true); }

VectorField2D plane_current(const ScalarField2D& w) { return edge_differences(w, false); }

ScalarField2D curl2d(const VectorField2D& v) {
  const CrossSection& cs = v.cs;
  require(cs.valid() && v.v1.size() == cs.size() && v.v2.size() == cs.size(), "vector field does not match its grid");
  ScalarField2D out(cs);
  const double ih = 1.0 / cs.h();
  for (int j = 1; j + 1 < cs.ny(); ++j)
    for (int i = 1; i + 1 < cs.nx(); ++i) {
      const std::size_t n = cs.index(i, j);
      out.v[n] = (v.v2[n] - v.v2[cs.index(i - 1, j)]) * ih - (v.v1[n] - v.v1[cs.index(i, j - 1)]) * ih;
    }
  return out;
}

ScalarField2D neg_laplacian_2d(const ScalarField2D& w) {
  const CrossSection& cs = w.cs;
  require(cs.valid() && w.v.size() == cs.size(), "scalar field does not match its grid");
  ScalarField2D out(cs);
  const double ih2 = 1.0 / (cs.h() * cs.h());
  for (int n : cs.interior_nodes()) {
    const int i = n % cs.nx(), j = n / cs.nx();
    const double c = w.v[n];
    out.v[n] = ih2 * (cs.weight_h(i, j) * (c - w.v[cs.index(i + 1, j)]) + cs.weight_h(i - 1, j) * (c - w.v[cs.index(i - 1, j)]) +
                      cs.weight_v(i, j) * (c - w.v[cs.index(i, j + 1)]) + cs.weight_v(i, j - 1) * (c - w.v[cs.index(i, j - 1)]));
  }
  return out;
}

Eigen::SparseMatrix<double> laplacian_matrix(const CrossSection& cs) {
  const int N = cs.interior_count();
  const double ih2 = 1.0 / (cs.h() * cs.h());
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(N) * 5);
  for (int r = 0; r < N; ++r) {
    const int n = cs.interior_nodes()[r];
    const int i = n % cs.nx(), j = n / cs.nx();
    const int ni[4] = {i + 1, i - 1, i, i};
    const int nj[4] = {j, j, j + 1, j - 1};
    const double w[4] = {cs.weight_h(i, j), cs.weight_h(i - 1, j), cs.weight_v(i, j), cs.weight_v(i, j - 1)};
    double diag = 0.0;
    for (int k = 0; k < 4; ++k) {
      diag += w[k];
      const int c = cs.compact(cs.index(ni[k], nj[k]));
      if (c >= 0) t.emplace_back(r, c, -w[k] * ih2);
    }
    t.emplace_back(r, r, diag * ih2);
  }
  Eigen::SparseMatrix<double> A(N, N);
  A.setFromTriplets(t.begin(), t.end());
  return A;
}

std::vector<double> to_compact(const ScalarField2D& f) {
  std::vector<double> x(f.cs.interior_count());
  for (std::size_t r = 0; r < x.size(); ++r) x[r] = f.v[f.cs.interior_nodes()[r]];
  return x;
}

ScalarField2D from_compact(const CrossSection& cs, std::span<const double> x) {
  require(x.size() == static_cast<std::size_t>(cs.interior_count()), "compact vector size mismatch");
  ScalarField2D f(cs);
  for (std::size_t r = 0; r < x.size(); ++r) f.v[cs.interior_nodes()[r]] = x[r];
  return f;
}

double max_abs(const ScalarField2D& f) {
  double m = 0.0;
  for (double x : f.v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace hc1
