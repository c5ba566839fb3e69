#include "hc1/bstar.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "hc1/error.hpp"
#include "hc1/plane_ops.hpp"

namespace hc1 {

StreamFamily zero_stream(const DiscretizedDomain& dom) {
  StreamFamily w;
  w.cs = dom.cross_section();
  w.slices.assign(dom.nz(), ScalarField2D(w.cs));
  return w;
}

std::vector<double> pack(const StreamFamily& w) {
  const int N = w.cs.interior_count();
  std::vector<double> x(static_cast<std::size_t>(N) * w.nz());
  for (int k = 0; k < w.nz(); ++k) {
    check_dirichlet(w.slices[k]);
    for (int r = 0; r < N; ++r) x[static_cast<std::size_t>(k) * N + r] = w.slices[k].v[w.cs.interior_nodes()[r]];
  }
  return x;
}

StreamFamily unpack(const DiscretizedDomain& dom, std::span<const double> x) {
  const CrossSection& cs = dom.cross_section();
  const std::size_t N = cs.interior_count();
  require(x.size() == N * dom.nz(), "packed stream family has the wrong size");
  StreamFamily w = zero_stream(dom);
  for (int k = 0; k < dom.nz(); ++k) w.slices[k] = from_compact(cs, x.subspan(k * N, N));
  return w;
}

// ============================================================================
// ReducedOperator
// ============================================================================

namespace {

// Domain edge of the cross-section with the node-to-edge coefficients of S C.
struct PlaneEdge {
  std::size_t flat;  // storage index in the cross-section (and in a window plane)
  int a, b;          // compact indices of the end nodes, -1 when exterior
  double ca, cb;
  double weight, fraction;
  int axis;  // 0: vertical edge, x-face; 1: horizontal edge, y-face
};

std::vector<PlaneEdge> plane_edges(const CrossSection& cs) {
  std::vector<PlaneEdge> e;
  const double ih = 1.0 / cs.h();
  for (int j = 0; j < cs.ny(); ++j)
    for (int i = 0; i < cs.nx(); ++i) {
      const std::size_t n = cs.index(i, j);
      if (cs.edge_v_in_domain(i, j))
        e.push_back({n, cs.compact(n), cs.compact(cs.index(i, j + 1)), -ih, ih, cs.weight_v(i, j), cs.fraction_v(i, j), 0});
      if (cs.edge_h_in_domain(i, j))
        e.push_back({n, cs.compact(n), cs.compact(cs.index(i + 1, j)), ih, -ih, cs.weight_h(i, j), cs.fraction_h(i, j), 1});
    }
  return e;
}

}  // namespace

struct ReducedOperator::Impl {
  CrossSection cs;
  int nz = 0;
  int N = 0;
  double h = 0.0, V = 0.0;
  Grid3 win;
  std::vector<PlaneEdge> edges;
  FreeSpaceConvolver conv;
  std::vector<double> ahat;  // gauge on domain edges, slice-major over edges
  std::vector<double> b;
  double e0 = 0.0;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> lap;

  Impl(const DiscretizedDomain& dom, const GaugeFn& gauge) : conv(dom.window(0), dom.window(0)) {
    cs = dom.cross_section();
    nz = dom.nz();
    N = cs.interior_count();
    h = cs.h();
    win = dom.window(0);
    V = win.cell_volume();
    edges = plane_edges(cs);
    ahat.resize(edges.size() * nz);
    b.assign(static_cast<std::size_t>(N) * nz, 0.0);
    const std::size_t plane = cs.size();
    for (int k = 0; k < nz; ++k)
      for (std::size_t q = 0; q < edges.size(); ++q) {
        const PlaneEdge& e = edges[q];
        const int i = static_cast<int>(e.flat % cs.nx()), j = static_cast<int>(e.flat / cs.nx());
        const Vec3 x = win.position(face_stagger(e.axis), i, j, k);
        const double a = gauge(x)[e.axis];
        ahat[k * edges.size() + q] = a;
        e0 += 0.5 * V * e.fraction * a * a;
        double* bk = b.data() + static_cast<std::size_t>(k) * N;
        if (e.a >= 0) bk[e.a] -= e.ca * a;
        if (e.b >= 0) bk[e.b] -= e.cb * a;
      }
    (void)plane;
    lap.compute(laplacian_matrix(cs));
    if (lap.info() != Eigen::Success) throw Error(ErrorKind::numerical, "slice Laplacian factorization failed");
  }

  void current(std::span<const double> w, std::vector<double>& jx, std::vector<double>& jy) const {
    jx.assign(win.size(), 0.0);
    jy.assign(win.size(), 0.0);
    const std::size_t plane = cs.size();
    for (int k = 0; k < nz; ++k) {
      const double* wk = w.data() + static_cast<std::size_t>(k) * N;
      for (const PlaneEdge& e : edges) {
        const double v = (e.a >= 0 ? e.ca * wk[e.a] : 0.0) + (e.b >= 0 ? e.cb * wk[e.b] : 0.0);
        (e.axis == 0 ? jx : jy)[k * plane + e.flat] = v;
      }
    }
  }
};

ReducedOperator::ReducedOperator(const DiscretizedDomain& dom, const GaugeFn& gauge)
    : p_(std::make_unique<Impl>(dom, gauge)) {}
ReducedOperator::~ReducedOperator() = default;

std::size_t ReducedOperator::size() const { return static_cast<std::size_t>(p_->N) * p_->nz; }
const std::vector<double>& ReducedOperator::rhs() const { return p_->b; }
const FreeSpaceConvolver& ReducedOperator::convolver() const { return p_->conv; }
double ReducedOperator::zero_energy() const { return p_->e0; }

void ReducedOperator::apply(std::span<const double> w, std::span<double> out) const {
  const Impl& p = *p_;
  require(w.size() == size() && out.size() == size(), "reduced operator size mismatch");
  std::vector<double> jx, jy, kx(p.win.size()), ky(p.win.size());
  p.current(w, jx, jy);
  p.conv.apply(jx, kx);
  p.conv.apply(jy, ky);
  std::fill(out.begin(), out.end(), 0.0);
  const std::size_t plane = p.cs.size();
  for (int k = 0; k < p.nz; ++k) {
    double* ok = out.data() + static_cast<std::size_t>(k) * p.N;
    for (const PlaneEdge& e : p.edges) {
      const std::size_t n = k * plane + e.flat;
      const double E = e.axis == 0 ? kx[n] + e.weight * jx[n] : ky[n] + e.weight * jy[n];
      if (e.a >= 0) ok[e.a] += e.ca * E;
      if (e.b >= 0) ok[e.b] += e.cb * E;
    }
  }
}

std::vector<double> ReducedOperator::diagonal() const {
  const Impl& p = *p_;
  const double k0 = p.conv.kernel(0, 0, 0), kx = p.conv.kernel(1, 0, 0), ky = p.conv.kernel(0, 1, 0);
  const double ih2 = 1.0 / (p.h * p.h);
  std::vector<double> d(p.N, 0.0);
  for (const PlaneEdge& e : p.edges) {
    if (e.a >= 0) d[e.a] += (e.weight + k0) * ih2;
    if (e.b >= 0) d[e.b] += (e.weight + k0) * ih2;
  }
  for (double& x : d) x -= 2.0 * (kx + ky) * ih2;
  std::vector<double> out(size());
  for (int k = 0; k < p.nz; ++k) std::copy(d.begin(), d.end(), out.begin() + static_cast<std::ptrdiff_t>(k) * p.N);
  return out;
}

void ReducedOperator::slice_laplacian_inverse(std::span<const double> r, std::span<double> z) const {
  const Impl& p = *p_;
  for (int k = 0; k < p.nz; ++k) {
    Eigen::Map<const Eigen::VectorXd> rk(r.data() + static_cast<std::size_t>(k) * p.N, p.N);
    Eigen::Map<Eigen::VectorXd> zk(z.data() + static_cast<std::size_t>(k) * p.N, p.N);
    zk = p.lap.solve(rk);
  }
}

double ReducedOperator::energy(std::span<const double> w) const {
  std::vector<double> Aw(size());
  apply(w, Aw);
  double q = 0.0, l = 0.0;
  for (std::size_t i = 0; i < size(); ++i) {
    q += w[i] * Aw[i];
    l += p_->b[i] * w[i];
  }
  return p_->V * (0.5 * q - l) + p_->e0;
}

double ReducedOperator::field_energy(std::span<const double> w) const {
  const Impl& p = *p_;
  std::vector<double> jx, jy, kx(p.win.size()), ky(p.win.size());
  p.current(w, jx, jy);
  p.conv.apply(jx, kx);
  p.conv.apply(jy, ky);
  double s = 0.0;
  for (std::size_t n = 0; n < jx.size(); ++n) s += jx[n] * kx[n] + jy[n] * ky[n];
  return p.V * s;
}

VectorField3D ReducedOperator::current(std::span<const double> w) const {
  VectorField3D j(p_->win, VectorLayout::faces);
  p_->current(w, j.c[0], j.c[1]);
  return j;
}

StreamFamily apply_reduced_operator(const StreamFamily& w, const DiscretizedDomain& dom, const SolverConfig& cfg) {
  cfg.validate();
  require(w.cs.same_grid(dom.cross_section()) && w.nz() == dom.nz(), "stream family does not match the domain");
  ReducedOperator op(dom);
  const std::vector<double> x = pack(w);
  std::vector<double> y(x.size());
  op.apply(x, y);
  return unpack(dom, y);
}

// ============================================================================
// Fields from a stream family
// ============================================================================

namespace {

Grid3 extended(const Grid3& g, int low, int high) {
  Grid3 t = g;
  for (int d = 0; d < 3; ++d) {
    t.n[d] += low + high;
    t.origin[d] -= low * g.h[d];
  }
  return t;
}

void crop(const Grid3& from, const std::vector<double>& src, const Grid3& to, std::vector<double>& dst, int shift) {
  dst.assign(to.size(), 0.0);
  for (int k = 0; k < to.n[2]; ++k)
    for (int j = 0; j < to.n[1]; ++j)
      for (int i = 0; i < to.n[0]; ++i) dst[to.index(i, j, k)] = src[from.index(i + shift, j + shift, k + shift)];
}

}  // namespace

void stream_fields(const StreamFamily& w, const DiscretizedDomain& dom, const Grid3& field_grid, const GaugeFn& gauge,
                   AReconstruction method, VectorField3D* B, VectorField3D* A) {
  require(w.cs.same_grid(dom.cross_section()) && w.nz() == dom.nz(), "stream family does not match the domain");
  dom.offset_in(field_grid);
  const Grid3 win = dom.window(0);
  VectorField3D j(win, VectorLayout::faces);
  for (int k = 0; k < w.nz(); ++k) {
    const VectorField2D c = plane_current(w.slices[k]);
    std::copy(c.v1.begin(), c.v1.end(), j.c[0].begin() + static_cast<std::ptrdiff_t>(k) * w.cs.size());
    std::copy(c.v2.begin(), c.v2.end(), j.c[1].begin() + static_cast<std::ptrdiff_t>(k) * w.cs.size());
  }
  const Grid3 T = extended(field_grid, 1, 0);
  FreeSpaceConvolver conv(win, T);
  VectorField3D chi(T, VectorLayout::faces);
  conv.apply(j.c[0], chi.c[0]);
  conv.apply(j.c[1], chi.c[1]);

  VectorField3D Bf(field_grid, VectorLayout::edges);
  {
    const VectorField3D BT = curl3d(chi);
    for (int d = 0; d < 3; ++d) crop(T, BT.c[d], field_grid, Bf.c[d], 1);
  }
  if (A) {
    VectorField3D Af = sample_gauge(field_grid, gauge);
    if (method == AReconstruction::current_potential) {
      std::vector<double> tmp;
      for (int d = 0; d < 2; ++d) {
        crop(T, chi.c[d], field_grid, tmp, 1);
        for (std::size_t n = 0; n < tmp.size(); ++n) Af.c[d][n] += tmp[n];
      }
    } else {
      // a + curl(G B) with B truncated to the field grid; forward differences need one high layer.
      const Grid3 U = extended(field_grid, 0, 1);
      FreeSpaceConvolver cb(field_grid, U);
      VectorField3D gb(U, VectorLayout::edges);
      for (int d = 0; d < 3; ++d) cb.apply(Bf.c[d], gb.c[d]);
      const VectorField3D cu = curl3d(gb);
      std::vector<double> tmp;
      for (int d = 0; d < 3; ++d) {
        crop(U, cu.c[d], field_grid, tmp, 0);
        for (std::size_t n = 0; n < tmp.size(); ++n) Af.c[d][n] += tmp[n];
      }
    }
    *A = std::move(Af);
  }
  if (B) *B = std::move(Bf);
}

// ============================================================================
// B* solve
// ============================================================================

BStarSolution solve_bstar(const DiscretizedDomain& dom, const SolverConfig& cfg, const BStarOptions& opts) {
  cfg.validate();
  ReducedOperator op(dom, opts.gauge);
  LinearOp A = [&](std::span<const double> x, std::span<double> y) { op.apply(x, y); };
  LinearOp M;
  std::vector<double> inv_diag;
  switch (cfg.preconditioner) {
    case Preconditioner::none:
      break;
    case Preconditioner::diagonal:
      inv_diag = op.diagonal();
      for (double& d : inv_diag) d = 1.0 / d;
      M = [&](std::span<const double> r, std::span<double> z) {
        for (std::size_t i = 0; i < r.size(); ++i) z[i] = inv_diag[i] * r[i];
      };
      break;
    case Preconditioner::slice_laplacian:
      M = [&](std::span<const double> r, std::span<double> z) { op.slice_laplacian_inverse(r, z); };
      break;
  }
  CgResult cg = cg_solve(A, op.rhs(), cfg, M);

  BStarSolution sol;
  sol.solve_report = cg.report;
  if (!cg.report.converged) {
    std::ostringstream os;
    os << "B* solve did not converge: relative residual " << cg.report.final_residual_rel << " after "
       << cg.report.iterations << " iterations";
    sol.warnings.push_back(os.str());
  }
  sol.w_star = unpack(dom, cg.x);
  sol.energy = op.energy(cg.x);
  sol.energy_zero = op.zero_energy();
  sol.field_energy = 0.5 * op.field_energy(cg.x);
  sol.field_grid = opts.field_region == FieldRegion::box ? dom.box() : dom.window(opts.window_margin);
  stream_fields(sol.w_star, dom, sol.field_grid, opts.gauge, opts.a_method, &sol.B_star, &sol.A_star);
  sol.diagnostics = el_residual(sol, dom, opts.el_exclusion);
  if (sol.energy > sol.energy_zero) sol.warnings.push_back("energy exceeds the zero-candidate energy");
  return sol;
}

VectorField3D reconstruct_A(const BStarSolution& sol, const DiscretizedDomain& dom, const SolverConfig& cfg,
                            AReconstruction method, const GaugeFn& gauge) {
  cfg.validate();
  VectorField3D A;
  stream_fields(sol.w_star, dom, sol.field_grid, gauge, method, nullptr, &A);
  return A;
}

// ============================================================================
// Diagnostics
// ============================================================================

double cylinder_depth(const DiscretizedDomain& dom, const Vec3& p) {
  const Shape& s = dom.cross_section().shape();
  const Vec2 q{p[0], p[1]};
  const double dplane = s.contains(q) ? s.boundary_distance(q) : -s.boundary_distance(q);
  return std::min({dplane, p[2], dom.L() - p[2]});
}

ElDiagnostics el_residual(const BStarSolution& sol, const DiscretizedDomain& dom, double exclusion) {
  const Grid3& G = sol.field_grid;
  const CrossSection& cs = dom.cross_section();
  const Index3 o = dom.offset_in(G);
  ElDiagnostics d;
  d.exclusion = exclusion > 0.0 ? exclusion : 2.0 * std::max(dom.h2(), dom.h3());
  const auto& Bz = sol.B_star.c[2];
  const double ix = 1.0 / (G.h[0] * G.h[0]), iz = 1.0 / (G.h[2] * G.h[2]);

  double rr = 0.0, ss = 0.0;
  d.b3_min = std::numeric_limits<double>::infinity();
  d.b3_max = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < dom.nz(); ++k)
    for (int n : cs.interior_nodes()) {
      const int I = n % cs.nx() + o[0], J = n / cs.nx() + o[1], K = k + o[2];
      if (I < 1 || J < 1 || K < 1 || I + 1 >= G.n[0] || J + 1 >= G.n[1] || K + 1 >= G.n[2]) continue;
      const double b = Bz[G.index(I, J, K)];
      d.b3_min = std::min(d.b3_min, b);
      d.b3_max = std::max(d.b3_max, b);
      if (cylinder_depth(dom, G.position(Stagger::edge_z, I, J, K)) < d.exclusion) continue;
      const double lap = ix * (4.0 * b - Bz[G.index(I + 1, J, K)] - Bz[G.index(I - 1, J, K)] - Bz[G.index(I, J + 1, K)] -
                               Bz[G.index(I, J - 1, K)]) +
                         iz * (2.0 * b - Bz[G.index(I, J, K + 1)] - Bz[G.index(I, J, K - 1)]);
      const double r = lap + b + 1.0;
      rr += r * r;
      ss += (b + 1.0) * (b + 1.0);
      ++d.el_nodes;
    }
  d.el_residual_interior = ss > 0.0 ? std::sqrt(rr / ss) : 0.0;
  if (d.el_nodes == 0) d.b3_min = d.b3_max = 0.0;

  const double Bmax = max_abs(sol.B_star);
  if (Bmax > 0.0) {
    const ScalarField3D dv = div3d(sol.B_star);
    double m = 0.0;
    for (int k = 1; k < G.n[2]; ++k)
      for (int j = 1; j < G.n[1]; ++j)
        for (int i = 1; i < G.n[0]; ++i) m = std::max(m, std::abs(dv(i, j, k)));
    d.div_B = m * std::min(G.h[0], G.h[2]) / Bmax;
  }

  // Membership of D for in-plane faces of G.
  auto face_in_d = [&](int axis, int I, int J, int K) {
    const int i = I - o[0], j = J - o[1], k = K - o[2];
    if (k < 0 || k >= dom.nz()) return false;
    return axis == 0 ? cs.edge_v_in_domain(i, j) : cs.edge_h_in_domain(i, j);
  };

  // Current handed to the Biot-Savart map, tabulated on G.
  {
    double in = 0.0, out = 0.0;
    for (int k = 0; k < dom.nz(); ++k) {
      const VectorField2D c = plane_current(sol.w_star.slices[k]);
      for (int j = 0; j < cs.ny(); ++j)
        for (int i = 0; i < cs.nx(); ++i) {
          const std::size_t n = cs.index(i, j);
          for (int axis = 0; axis < 2; ++axis) {
            const double v = axis == 0 ? c.v1[n] : c.v2[n];
            (face_in_d(axis, i + o[0], j + o[1], k + o[2]) ? in : out) += v * v;
          }
        }
    }
    d.curl_support_leak = in > 0.0 ? std::sqrt(out / in) : 0.0;
  }

  // Discrete curl of the tabulated field.
  {
    const VectorField3D C = curl3d(sol.B_star);
    double in = 0.0, out = 0.0, z = 0.0;
    for (int K = 0; K + 1 < G.n[2]; ++K)
      for (int J = 0; J + 1 < G.n[1]; ++J)
        for (int I = 0; I + 1 < G.n[0]; ++I) {
          const std::size_t n = G.index(I, J, K);
          for (int axis = 0; axis < 2; ++axis) (face_in_d(axis, I, J, K) ? in : out) += C.c[axis][n] * C.c[axis][n];
          z += C.c[2][n] * C.c[2][n];
        }
    d.curl_leak_discrete = in > 0.0 ? std::sqrt((out + z) / in) : 0.0;
    d.curlB3 = (in + out + z) > 0.0 ? std::sqrt(z / (in + out + z)) : 0.0;
  }
  return d;
}

ScalarField2D slice_b3(const BStarSolution& sol, const DiscretizedDomain& dom, int k) {
  require(k >= 0 && k < dom.nz(), "slice index out of range");
  const CrossSection& cs = dom.cross_section();
  const Grid3& G = sol.field_grid;
  const Index3 o = dom.offset_in(G);
  ScalarField2D b(cs);
  for (int j = 0; j < cs.ny(); ++j)
    for (int i = 0; i < cs.nx(); ++i) {
      const int I = i + o[0], J = j + o[1], K = k + o[2];
      if (I < 0 || J < 0 || K < 0 || I >= G.n[0] || J >= G.n[1] || K >= G.n[2]) continue;
      b(i, j) = sol.B_star.c[2][G.index(I, J, K)];
    }
  return b;
}

VectorField2D slice_a(const BStarSolution& sol, const DiscretizedDomain& dom, int k) {
  require(k >= 0 && k < dom.nz(), "slice index out of range");
  const CrossSection& cs = dom.cross_section();
  const Grid3& G = sol.field_grid;
  const Index3 o = dom.offset_in(G);
  VectorField2D a(cs);
  for (int j = 0; j < cs.ny(); ++j)
    for (int i = 0; i < cs.nx(); ++i) {
      const int I = i + o[0], J = j + o[1], K = k + o[2];
      if (I < 0 || J < 0 || K < 0 || I >= G.n[0] || J >= G.n[1] || K >= G.n[2]) continue;
      a.v1[cs.index(i, j)] = sol.A_star.c[0][G.index(I, J, K)];
      a.v2[cs.index(i, j)] = sol.A_star.c[1][G.index(I, J, K)];
    }
  return a;
}

}  // namespace hc1
