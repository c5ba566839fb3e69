#include <fftw3.h>

#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>
#include <sstream>

#include "hc1/elliptic.hpp"
#include "hc1/error.hpp"

namespace hc1 {

namespace {

// FFTW's planner is not thread safe.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

constexpr double inv4pi = 1.0 / (4.0 * std::numbers::pi);

}  // namespace

double corner_box_integral(double a, double b, double c) {
  require(a > 0.0 && b > 0.0 && c > 0.0, "corner_box_integral needs positive sides");
  const double d = std::sqrt(a * a + b * b + c * c);
  return b * c * std::log((a + d) / std::hypot(b, c)) + a * c * std::log((b + d) / std::hypot(a, c)) +
         a * b * std::log((c + d) / std::hypot(a, b)) - 0.5 * a * a * std::atan(b * c / (a * d)) -
         0.5 * b * b * std::atan(a * c / (b * d)) - 0.5 * c * c * std::atan(a * b / (c * d));
}

// ============================================================================
// FreeSpaceConvolver
// ============================================================================

struct FreeSpaceConvolver::Impl {
  Grid3 src, tgt;
  Index3 off{};
  Index3 m{};
  std::size_t nreal = 0, ncomplex = 0;
  double* rbuf = nullptr;
  fftw_complex* cbuf = nullptr;
  fftw_complex* khat = nullptr;
  fftw_plan fwd = nullptr, bwd = nullptr;
  std::mutex mu;

  double kernel(int di, int dj, int dk) const {
    const double hx = src.h[0], hy = src.h[1], hz = src.h[2];
    if (di == 0 && dj == 0 && dk == 0) return 8.0 * corner_box_integral(0.5 * hx, 0.5 * hy, 0.5 * hz) * inv4pi;
    const double r = std::sqrt((di * hx) * (di * hx) + (dj * hy) * (dj * hy) + (dk * hz) * (dk * hz));
    return hx * hy * hz * inv4pi / r;
  }

  ~Impl() {
    std::lock_guard lk(planner_mutex());
    if (fwd) fftw_destroy_plan(fwd);
    if (bwd) fftw_destroy_plan(bwd);
    fftw_free(rbuf);
    fftw_free(cbuf);
    fftw_free(khat);
  }
};

FreeSpaceConvolver::FreeSpaceConvolver(const Grid3& source, const Grid3& target) : p_(std::make_unique<Impl>()) {
  Impl& p = *p_;
  p.src = source;
  p.tgt = target;
  for (int d = 0; d < 3; ++d) {
    require(source.n[d] >= 1 && target.n[d] >= 1, "convolution grids must be nonempty");
    require(std::abs(source.h[d] - target.h[d]) <= 1e-12 * source.h[d], "convolution grids must share the spacing");
    const double o = (target.origin[d] - source.origin[d]) / source.h[d];
    p.off[d] = static_cast<int>(std::lround(o));
    require(std::abs(o - p.off[d]) <= 1e-8, "convolution grids are not lattice aligned");
    p.m[d] = next_fft_size(source.n[d] + target.n[d] - 1);
  }
  p.nreal = static_cast<std::size_t>(p.m[0]) * p.m[1] * p.m[2];
  p.ncomplex = static_cast<std::size_t>(p.m[0] / 2 + 1) * p.m[1] * p.m[2];
  p.rbuf = fftw_alloc_real(p.nreal);
  p.cbuf = fftw_alloc_complex(p.ncomplex);
  p.khat = fftw_alloc_complex(p.ncomplex);
  if (!p.rbuf || !p.cbuf || !p.khat) throw Error(ErrorKind::resource, "out of memory allocating convolution buffers");
  {
    std::lock_guard lk(planner_mutex());
    p.fwd = fftw_plan_dft_r2c_3d(p.m[2], p.m[1], p.m[0], p.rbuf, p.cbuf, FFTW_ESTIMATE);
    p.bwd = fftw_plan_dft_c2r_3d(p.m[2], p.m[1], p.m[0], p.cbuf, p.rbuf, FFTW_ESTIMATE);
  }
  if (!p.fwd || !p.bwd) throw Error(ErrorKind::resource, "FFTW could not plan the convolution");

  // Wrapped kernel: entry d (mod m) holds K(d + off) for d in [-(ns-1), nt-1].
  auto disp = [&](int d, int idx) -> int {
    if (idx <= target.n[d] - 1) return idx;
    if (idx >= p.m[d] - (source.n[d] - 1)) return idx - p.m[d];
    return INT32_MIN;
  };
  for (int k = 0; k < p.m[2]; ++k) {
    const int dk = disp(2, k);
    for (int j = 0; j < p.m[1]; ++j) {
      const int dj = disp(1, j);
      for (int i = 0; i < p.m[0]; ++i) {
        const int di = disp(0, i);
        const std::size_t n = static_cast<std::size_t>(i) + static_cast<std::size_t>(p.m[0]) * (j + static_cast<std::size_t>(p.m[1]) * k);
        p.rbuf[n] = (di == INT32_MIN || dj == INT32_MIN || dk == INT32_MIN)
                        ? 0.0
                        : p.kernel(di + p.off[0], dj + p.off[1], dk + p.off[2]);
      }
    }
  }
  fftw_execute(p.fwd);
  const double scale = 1.0 / static_cast<double>(p.nreal);
  for (std::size_t n = 0; n < p.ncomplex; ++n) {
    p.khat[n][0] = p.cbuf[n][0] * scale;
    p.khat[n][1] = p.cbuf[n][1] * scale;
  }
}

FreeSpaceConvolver::~FreeSpaceConvolver() = default;
FreeSpaceConvolver::FreeSpaceConvolver(FreeSpaceConvolver&&) noexcept = default;
FreeSpaceConvolver& FreeSpaceConvolver::operator=(FreeSpaceConvolver&&) noexcept = default;

const Grid3& FreeSpaceConvolver::source() const { return p_->src; }
const Grid3& FreeSpaceConvolver::target() const { return p_->tgt; }
Index3 FreeSpaceConvolver::fft_size() const { return p_->m; }
double FreeSpaceConvolver::kernel(int di, int dj, int dk) const { return p_->kernel(di, dj, dk); }

void FreeSpaceConvolver::apply(std::span<const double> src, std::span<double> dst) const {
  Impl& p = *p_;
  require(src.size() == p.src.size() && dst.size() == p.tgt.size(), "convolution array size mismatch");
  std::lock_guard lk(p.mu);
  std::fill(p.rbuf, p.rbuf + p.nreal, 0.0);
  bool any = false;
  for (int k = 0; k < p.src.n[2]; ++k)
    for (int j = 0; j < p.src.n[1]; ++j)
      for (int i = 0; i < p.src.n[0]; ++i) {
        const double v = src[p.src.index(i, j, k)];
        any = any || v != 0.0;
        p.rbuf[static_cast<std::size_t>(i) + static_cast<std::size_t>(p.m[0]) * (j + static_cast<std::size_t>(p.m[1]) * k)] = v;
      }
  if (!any) {
    std::fill(dst.begin(), dst.end(), 0.0);
    return;
  }
  fftw_execute(p.fwd);
  for (std::size_t n = 0; n < p.ncomplex; ++n) {
    const double a = p.cbuf[n][0], b = p.cbuf[n][1];
    const double c = p.khat[n][0], d = p.khat[n][1];
    p.cbuf[n][0] = a * c - b * d;
    p.cbuf[n][1] = a * d + b * c;
  }
  fftw_execute(p.bwd);
  for (int k = 0; k < p.tgt.n[2]; ++k)
    for (int j = 0; j < p.tgt.n[1]; ++j)
      for (int i = 0; i < p.tgt.n[0]; ++i)
        dst[p.tgt.index(i, j, k)] =
            p.rbuf[static_cast<std::size_t>(i) + static_cast<std::size_t>(p.m[0]) * (j + static_cast<std::size_t>(p.m[1]) * k)];
}

// ============================================================================
// Padded Dirichlet box (DST-I)
// ============================================================================

namespace {

ScalarField3D dirichlet_box_solve(const ScalarField3D& g) {
  const Grid3& G = g.grid;
  for (int d = 0; d < 3; ++d) require(G.n[d] >= 2, "padded_dirichlet needs at least 2 nodes per axis");
  const double V = G.cell_volume();

  // Far field from the monopole and dipole moments of g about the box centre (a fixed
  // centre keeps the solve linear in g).
  const Vec3 c = G.position(g.loc, G.n[0] / 2, G.n[1] / 2, G.n[2] / 2);
  double Q = 0.0;
  Vec3 dip{0.0, 0.0, 0.0};
  for (int k = 0; k < G.n[2]; ++k)
    for (int j = 0; j < G.n[1]; ++j)
      for (int i = 0; i < G.n[0]; ++i) {
        const double q = g(i, j, k) * V;
        const Vec3 x = G.position(g.loc, i, j, k);
        Q += q;
        for (int d = 0; d < 3; ++d) dip[d] += q * (x[d] - c[d]);
      }
  auto far = [&](int i, int j, int k) {
    const Vec3 x = G.position(g.loc, i, j, k);
    const Vec3 r{x[0] - c[0], x[1] - c[1], x[2] - c[2]};
    const double rr = std::sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2]);
    return inv4pi * (Q / rr + (dip[0] * r[0] + dip[1] * r[1] + dip[2] * r[2]) / (rr * rr * rr));
  };

  const int n0 = G.n[0], n1 = G.n[1], n2 = G.n[2];
  const double ix = 1.0 / (G.h[0] * G.h[0]), iy = 1.0 / (G.h[1] * G.h[1]), iz = 1.0 / (G.h[2] * G.h[2]);
  double* buf = fftw_alloc_real(G.size());
  if (!buf) throw Error(ErrorKind::resource, "out of memory in padded_dirichlet");
  for (std::size_t n = 0; n < G.size(); ++n) buf[n] = g.v[n];
  for (int k = 0; k < n2; ++k)
    for (int j = 0; j < n1; ++j) {
      buf[G.index(0, j, k)] += ix * far(-1, j, k);
      buf[G.index(n0 - 1, j, k)] += ix * far(n0, j, k);
    }
  for (int k = 0; k < n2; ++k)
    for (int i = 0; i < n0; ++i) {
      buf[G.index(i, 0, k)] += iy * far(i, -1, k);
      buf[G.index(i, n1 - 1, k)] += iy * far(i, n1, k);
    }
  for (int j = 0; j < n1; ++j)
    for (int i = 0; i < n0; ++i) {
      buf[G.index(i, j, 0)] += iz * far(i, j, -1);
      buf[G.index(i, j, n2 - 1)] += iz * far(i, j, n2);
    }

  fftw_plan plan;
  {
    std::lock_guard lk(planner_mutex());
    plan = fftw_plan_r2r_3d(n2, n1, n0, buf, buf, FFTW_RODFT00, FFTW_RODFT00, FFTW_RODFT00, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  const double norm = 8.0 * (n0 + 1.0) * (n1 + 1.0) * (n2 + 1.0);
  for (int k = 0; k < n2; ++k) {
    const double lz = iz * (2.0 - 2.0 * std::cos(std::numbers::pi * (k + 1) / (n2 + 1.0)));
    for (int j = 0; j < n1; ++j) {
      const double ly = iy * (2.0 - 2.0 * std::cos(std::numbers::pi * (j + 1) / (n1 + 1.0)));
      for (int i = 0; i < n0; ++i) {
        const double lx = ix * (2.0 - 2.0 * std::cos(std::numbers::pi * (i + 1) / (n0 + 1.0)));
        buf[G.index(i, j, k)] /= (lx + ly + lz) * norm;
      }
    }
  }
  fftw_execute(plan);
  ScalarField3D u(G, g.loc);
  for (std::size_t n = 0; n < G.size(); ++n) u.v[n] = buf[n];
  {
    std::lock_guard lk(planner_mutex());
    fftw_destroy_plan(plan);
  }
  fftw_free(buf);
  return u;
}

void check_finite(const std::vector<double>& v, const char* what) {
  for (double x : v)
    if (!std::isfinite(x)) fail(std::string(what) + " is not finite");
}

}  // namespace

// ============================================================================
// Free-space solves
// ============================================================================

ScalarField3D freespace_poisson_3d(const ScalarField3D& g, const SolverConfig& cfg) {
  require(g.v.size() == g.grid.size(), "source does not match its grid");
  check_finite(g.v, "free-space source");
  if (cfg.freespace_method == FreeSpaceMethod::padded_dirichlet) return dirichlet_box_solve(g);
  ScalarField3D u(g.grid, g.loc);
  FreeSpaceConvolver conv(g.grid, g.grid);
  conv.apply(g.v, u.v);
  return u;
}

bool near_cylinder(const DiscretizedDomain& dom, const Vec3& p) {
  const double h3 = dom.h3(), h2 = dom.h2();
  if (p[2] < -h3 || p[2] > dom.L() + h3) return false;
  const Shape& s = dom.cross_section().shape();
  const Vec2 q{p[0], p[1]};
  return s.contains(q) || s.boundary_distance(q) <= h2;
}

namespace {

void check_support(const DiscretizedDomain& dom, const Grid3& g, Stagger s, const std::vector<double>& v) {
  for (int k = 0; k < g.n[2]; ++k)
    for (int j = 0; j < g.n[1]; ++j)
      for (int i = 0; i < g.n[0]; ++i)
        if (v[g.index(i, j, k)] != 0.0 && !near_cylinder(dom, g.position(s, i, j, k))) {
          std::ostringstream os;
          const Vec3 x = g.position(s, i, j, k);
          os << "source is nonzero outside D at (" << x[0] << ", " << x[1] << ", " << x[2] << ")";
          fail(os.str());
        }
}

}  // namespace

ScalarField3D freespace_poisson_3d(const ScalarField3D& g, const DiscretizedDomain& dom, const SolverConfig& cfg) {
  check_support(dom, g.grid, g.loc, g.v);
  return freespace_poisson_3d(g, cfg);
}

double relative_divergence(const VectorField3D& g) {
  require(g.layout == VectorLayout::faces, "relative_divergence expects a face field");
  const double scale = max_abs(g);
  if (scale == 0.0) return 0.0;
  const ScalarField3D dv = div3d(g);
  const Grid3& G = g.grid;
  double m = 0.0;
  // The last layer differences against the zero extension and is skipped.
  for (int k = 0; k + 1 < G.n[2]; ++k)
    for (int j = 0; j + 1 < G.n[1]; ++j)
      for (int i = 0; i + 1 < G.n[0]; ++i) m = std::max(m, std::abs(dv(i, j, k)));
  return m * std::min({G.h[0], G.h[1], G.h[2]}) / scale;
}

VectorField3D biot_savart(const VectorField3D& g, const SolverConfig& cfg, std::vector<std::string>* warnings) {
  require(g.layout == VectorLayout::faces, "biot_savart expects a face-located source");
  for (const auto& c : g.c) check_finite(c, "Biot-Savart source");
  const double dv = relative_divergence(g);
  if (dv > 1e-6 && warnings) {
    std::ostringstream os;
    os << "biot_savart: source divergence " << dv << " (relative) exceeds 1e-6";
    warnings->push_back(os.str());
  }
  const Grid3& G = g.grid;
  VectorField3D chi(G, VectorLayout::faces);
  if (cfg.freespace_method == FreeSpaceMethod::padded_dirichlet) {
    for (int d = 0; d < 3; ++d) {
      ScalarField3D s(G, face_stagger(d));
      s.v = g.c[d];
      chi.c[d] = freespace_poisson_3d(s, cfg).v;
    }
    return curl3d(chi);
  }
  // Potential on the grid extended by one layer on the low sides, so the backward
  // differences of the curl never see the zero extension.
  Grid3 T = G;
  for (int d = 0; d < 3; ++d) {
    T.n[d] += 1;
    T.origin[d] -= G.h[d];
  }
  FreeSpaceConvolver conv(G, T);
  VectorField3D chiT(T, VectorLayout::faces);
  for (int d = 0; d < 3; ++d) conv.apply(g.c[d], chiT.c[d]);
  const VectorField3D BT = curl3d(chiT);
  VectorField3D B(G, VectorLayout::edges);
  for (int d = 0; d < 3; ++d)
    for (int k = 0; k < G.n[2]; ++k)
      for (int j = 0; j < G.n[1]; ++j)
        for (int i = 0; i < G.n[0]; ++i) B.c[d][G.index(i, j, k)] = BT.c[d][T.index(i + 1, j + 1, k + 1)];
  return B;
}

VectorField3D biot_savart(const VectorField3D& g, const DiscretizedDomain& dom, const SolverConfig& cfg,
                          std::vector<std::string>* warnings) {
  for (int d = 0; d < 3; ++d) check_support(dom, g.grid, face_stagger(d), g.c[d]);
  return biot_savart(g, cfg, warnings);
}

}  // namespace hc1
