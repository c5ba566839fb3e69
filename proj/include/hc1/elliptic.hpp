#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "hc1/cross_section.hpp"
#include "hc1/domain.hpp"
#include "hc1/staggered.hpp"

namespace hc1 {

enum class Preconditioner { none, diagonal, slice_laplacian };
enum class FreeSpaceMethod { kernel_convolution, padded_dirichlet };

struct SolverConfig {
  double tol_rel = 1e-8;
  int max_iter = 0;  // 0: max(500, 10 sqrt(N))
  Preconditioner preconditioner = Preconditioner::diagonal;
  FreeSpaceMethod freespace_method = FreeSpaceMethod::kernel_convolution;

  void validate() const;
  int resolved_max_iter(std::size_t unknowns) const;
};

struct SolveReport {
  int iterations = 0;
  double final_residual_rel = 0.0;
  bool converged = false;
};

using LinearOp = std::function<void(std::span<const double>, std::span<double>)>;

struct CgResult {
  std::vector<double> x;
  SolveReport report;
};

/// Preconditioned conjugate gradients. `precond` applies M^{-1}; empty means none.
/// The reported residual is the true residual of the returned iterate.
/// Throws Error(numerical) when a non-finite value appears.
CgResult cg_solve(const LinearOp& A, std::span<const double> b, const SolverConfig& cfg, const LinearOp& precond = {},
                  std::span<const double> x0 = {});

/// -Delta_h u = f on the interior nodes of f.cs, u = 0 elsewhere.
/// Throws Error(convergence) if CG stalls.
ScalarField2D poisson_dirichlet_2d(const ScalarField2D& f, const SolverConfig& cfg, SolveReport* report = nullptr);

/// Integral of 1/|x| over the box [0,a] x [0,b] x [0,c].
double corner_box_integral(double a, double b, double c);

/// Aperiodic lattice convolution with 1/(4 pi |x|), from a source lattice onto a target
/// lattice of the same spacing. The central kernel entry is the integral of the kernel
/// over one cell. Exact on the grid: the FFT length covers source + target extents.
/// apply() is internally synchronized.
class FreeSpaceConvolver {
 public:
  FreeSpaceConvolver(const Grid3& source, const Grid3& target);
  ~FreeSpaceConvolver();
  FreeSpaceConvolver(FreeSpaceConvolver&&) noexcept;
  FreeSpaceConvolver& operator=(FreeSpaceConvolver&&) noexcept;

  const Grid3& source() const;
  const Grid3& target() const;
  Index3 fft_size() const;
  /// dst = sum_s K(t - s) src[s] (the kernel already carries the cell volume).
  void apply(std::span<const double> src, std::span<double> dst) const;
  double kernel(int di, int dj, int dk) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> p_;
};

/// Gamma_3 * g on g's own grid and sublattice.
ScalarField3D freespace_poisson_3d(const ScalarField3D& g, const SolverConfig& cfg);
/// As above after checking that g vanishes away from D.
ScalarField3D freespace_poisson_3d(const ScalarField3D& g, const DiscretizedDomain& dom, const SolverConfig& cfg);

/// curl(Gamma_3 * g) for a face field g; result on the edges of g's grid.
VectorField3D biot_savart(const VectorField3D& g, const SolverConfig& cfg, std::vector<std::string>* warnings = nullptr);
VectorField3D biot_savart(const VectorField3D& g, const DiscretizedDomain& dom, const SolverConfig& cfg,
                          std::vector<std::string>* warnings = nullptr);

/// max |div g| * h / max |g|, the relative divergence of a face field.
double relative_divergence(const VectorField3D& g);

/// True when p lies within one lattice spacing of the closed cylinder.
bool near_cylinder(const DiscretizedDomain& dom, const Vec3& p);

}  // namespace hc1
