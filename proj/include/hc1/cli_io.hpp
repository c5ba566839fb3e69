#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hc1/bstar.hpp"
#include "hc1/critfield.hpp"
#include "hc1/domain.hpp"
#include "hc1/elliptic.hpp"
#include "hc1/obstacle.hpp"

namespace hc1 {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kSchemaVersion = 1;

enum class FieldDump { automatic, on, off };
enum class VtkEncoding { ascii, binary };

/// One run, read from an INI file. Every key has a default; unknown sections or keys are errors.
struct RunConfig {
  struct Domain {
    std::string shape = "disk";  // disk | rectangle | polygon
    double radius = 1.0;
    double width = 2.0;
    double height = 2.0;
    std::vector<Vec2> vertices;  // polygon, "x y; x y; ..."
    double L = 1.0;
    double h = 1.0 / 16.0;
    int nz = 8;
    double pad_factor = 1.0;
    GridAlignment alignment = GridAlignment::cell_centered;
    BoundaryTreatment boundary = BoundaryTreatment::cut_edge;
    double memory_budget_mb = 4096.0;
  } domain;

  struct Solver {
    SolverConfig linear{1e-8, 0, Preconditioner::slice_laplacian, FreeSpaceMethod::kernel_convolution};
    /// Tolerance of the route-2 slice solves.
    double slice_tol = 1e-10;
    VIConfig vi;
    FieldRegion field_region = FieldRegion::window;
    int window_margin = 3;
    AReconstruction a_method = AReconstruction::current_potential;
    double el_exclusion = 0.0;
    double consistency_tol = 1e-2;
    double mass_tol_rel = 1e-6;
  } solver;

  struct Task {
    std::vector<double> h0_grid;
    /// When true the h0 grid is in units of 1/(2 xi).
    bool h0_relative = true;
    std::vector<double> epsilon;
    std::string f_type = "constant";  // constant | file
    double f_value = 1.0;
    std::string f_file;
    double a1 = -1.0;
    double a2 = 1.0;
    int validate_resolution = 32;
  } task;

  struct Output {
    std::filesystem::path directory = "out";
    bool json = true;
    bool csv = true;
    bool vtk = true;
    FieldDump field_dump = FieldDump::automatic;
    VtkEncoding vtk_encoding = VtkEncoding::binary;
  } output;

  std::string source_text;  // raw file content, hashed
  std::filesystem::path source_path;
};

RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// Hex SHA-256.
std::string sha256_hex(const std::string& data);

/// Write to a temporary sibling and rename over the target.
void atomic_write(const std::filesystem::path& path, const std::string& content);

/// Shortest round-trip decimal with '.' separator independent of the locale.
std::string format_double(double v);

/// VTK legacy structured points; staggered components are averaged onto the lattice nodes.
std::string vtk_vector_field(const VectorField3D& f, const std::string& name, const std::string& title, VtkEncoding enc);
/// 2D scalar fields as one-layer structured points.
std::string vtk_slice_fields(const CrossSection& cs, const std::vector<std::pair<std::string, const ScalarField2D*>>& fields,
                             const std::string& title, VtkEncoding enc);

/// Little-endian float64 payload (x fastest, then y, then slice) and its JSON sidecar.
std::string raw_slice_stack(const StreamFamily& w);
std::string raw_slice_stack_sidecar(const StreamFamily& w, double h3, const std::string& payload_name,
                                    const std::string& config_hash);

struct RunOptions {
  std::optional<std::filesystem::path> output_dir;
  bool deterministic = true;
  int threads = 1;
};

/// Exit codes shared by all commands.
enum ExitCode { exit_ok = 0, exit_failure = 1, exit_config = 2, exit_resource = 3, exit_convergence = 4 };

int cmd_hc1(const RunConfig& cfg, const RunOptions& opts);
int cmd_sweep(const RunConfig& cfg, const RunOptions& opts);
int cmd_obstacle(const RunConfig& cfg, const RunOptions& opts);
int cmd_validate(const RunConfig& cfg, const RunOptions& opts);

/// Dispatches by name and maps exceptions onto exit codes, reporting on stderr.
int run_command(const std::string& name, const std::filesystem::path& config_path, const RunOptions& opts);

}  // namespace hc1
