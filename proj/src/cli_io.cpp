#include "hc1/cli_io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstring>
#include <ctime>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <openssl/evp.h>

#include "json.hpp"

#include "hc1/error.hpp"
#include "hc1/plane_ops.hpp"
#include "hc1/validation.hpp"

namespace hc1 {

using nlohmann::json;
namespace fs = std::filesystem;

// ============================================================================
// Config
// ============================================================================

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& why) {
  throw Error(ErrorKind::config, "config key '" + key + "': " + why + " (got '" + value + "')");
}

double parse_double(const std::string& key, const std::string& s) {
  const std::string t = trim(s);
  double v = 0.0;
  const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || r.ec != std::errc() || r.ptr != t.data() + t.size() || !std::isfinite(v))
    bad_value(key, s, "expected a finite number");
  return v;
}

int parse_int(const std::string& key, const std::string& s) {
  const std::string t = trim(s);
  int v = 0;
  const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || r.ec != std::errc() || r.ptr != t.data() + t.size()) bad_value(key, s, "expected an integer");
  return v;
}

bool parse_bool(const std::string& key, const std::string& s) {
  const std::string t = trim(s);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  bad_value(key, s, "expected true or false");
}

template <class E>
E parse_enum(const std::string& key, const std::string& s, const std::vector<std::pair<std::string, E>>& names) {
  const std::string t = trim(s);
  std::string allowed;
  for (const auto& [n, e] : names) {
    if (n == t) return e;
    allowed += (allowed.empty() ? "" : ", ") + n;
  }
  bad_value(key, s, "expected one of " + allowed);
}

std::vector<std::string> split(const std::string& s, const std::string& seps) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (seps.find(c) != std::string::npos) {
      if (!trim(cur).empty()) out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!trim(cur).empty()) out.push_back(trim(cur));
  return out;
}

/// "a, b, c" or "start:stop:step" (stop included up to rounding).
std::vector<double> parse_list(const std::string& key, const std::string& s) {
  const std::string t = trim(s);
  if (t.find(':') != std::string::npos) {
    const auto p = split(t, ":");
    if (p.size() != 3) bad_value(key, s, "expected start:stop:step");
    const double a = parse_double(key, p[0]), b = parse_double(key, p[1]), d = parse_double(key, p[2]);
    if (!(d > 0.0) || b < a) bad_value(key, s, "range needs step > 0 and stop >= start");
    std::vector<double> v;
    const long n = std::lround(std::floor((b - a) / d + 1e-9));
    if (n > 100000) bad_value(key, s, "range is too long");
    for (long m = 0; m <= n; ++m) v.push_back(a + m * d);
    return v;
  }
  std::vector<double> v;
  for (const auto& x : split(t, ", \t")) v.push_back(parse_double(key, x));
  return v;
}

std::vector<Vec2> parse_vertices(const std::string& key, const std::string& s) {
  std::vector<Vec2> v;
  for (const auto& pt : split(s, ";")) {
    const auto xy = split(pt, ", \t");
    if (xy.size() != 2) bad_value(key, s, "expected 'x y; x y; ...'");
    v.push_back({parse_double(key, xy[0]), parse_double(key, xy[1])});
  }
  return v;
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> m = [] {
    std::map<std::string, Setter> s;
    // domain
    s["domain.shape"] = [](RunConfig& c, auto& k, auto& v) {
      c.domain.shape = parse_enum<std::string>(k, v, {{"disk", "disk"}, {"rectangle", "rectangle"}, {"polygon", "polygon"}});
    };
    s["domain.radius"] = [](RunConfig& c, auto& k, auto& v) { c.domain.radius = parse_double(k, v); };
    s["domain.width"] = [](RunConfig& c, auto& k, auto& v) { c.domain.width = parse_double(k, v); };
    s["domain.height"] = [](RunConfig& c, auto& k, auto& v) { c.domain.height = parse_double(k, v); };
    s["domain.vertices"] = [](RunConfig& c, auto& k, auto& v) { c.domain.vertices = parse_vertices(k, v); };
    s["domain.L"] = [](RunConfig& c, auto& k, auto& v) { c.domain.L = parse_double(k, v); };
    s["domain.h"] = [](RunConfig& c, auto& k, auto& v) { c.domain.h = parse_double(k, v); };
    s["domain.nz"] = [](RunConfig& c, auto& k, auto& v) { c.domain.nz = parse_int(k, v); };
    s["domain.pad_factor"] = [](RunConfig& c, auto& k, auto& v) { c.domain.pad_factor = parse_double(k, v); };
    s["domain.alignment"] = [](RunConfig& c, auto& k, auto& v) {
      c.domain.alignment = parse_enum<GridAlignment>(
          k, v, {{"cell_centered", GridAlignment::cell_centered}, {"node_centered", GridAlignment::node_centered}});
    };
    s["domain.boundary"] = [](RunConfig& c, auto& k, auto& v) {
      c.domain.boundary = parse_enum<BoundaryTreatment>(
          k, v, {{"cut_edge", BoundaryTreatment::cut_edge}, {"staircase", BoundaryTreatment::staircase}});
    };
    s["domain.memory_budget_mb"] = [](RunConfig& c, auto& k, auto& v) { c.domain.memory_budget_mb = parse_double(k, v); };
    // solver
    s["solver.tol_rel"] = [](RunConfig& c, auto& k, auto& v) { c.solver.linear.tol_rel = parse_double(k, v); };
    s["solver.max_iter"] = [](RunConfig& c, auto& k, auto& v) { c.solver.linear.max_iter = parse_int(k, v); };
    s["solver.preconditioner"] = [](RunConfig& c, auto& k, auto& v) {
      c.solver.linear.preconditioner = parse_enum<Preconditioner>(k, v,
                                                                  {{"none", Preconditioner::none},
                                                                   {"diagonal", Preconditioner::diagonal},
                                                                   {"slice_laplacian", Preconditioner::slice_laplacian}});
    };
    s["solver.freespace_method"] = [](RunConfig& c, auto& k, auto& v) {
      c.solver.linear.freespace_method = parse_enum<FreeSpaceMethod>(
          k, v,
          {{"kernel_convolution", FreeSpaceMethod::kernel_convolution},
           {"padded_dirichlet", FreeSpaceMethod::padded_dirichlet}});
    };
    s["solver.slice_tol"] = [](RunConfig& c, auto& k, auto& v) { c.solver.slice_tol = parse_double(k, v); };
    s["solver.sor_omega"] = [](RunConfig& c, auto& k, auto& v) { c.solver.vi.omega = parse_double(k, v); };
    s["solver.tol_vi"] = [](RunConfig& c, auto& k, auto& v) { c.solver.vi.tol_vi = parse_double(k, v); };
    s["solver.vi_max_iter"] = [](RunConfig& c, auto& k, auto& v) { c.solver.vi.max_iter = parse_int(k, v); };
    s["solver.active_tol_rel"] = [](RunConfig& c, auto& k, auto& v) { c.solver.vi.active_tol_rel = parse_double(k, v); };
    s["solver.field_region"] = [](RunConfig& c, auto& k, auto& v) {
      c.solver.field_region =
          parse_enum<FieldRegion>(k, v, {{"box", FieldRegion::box}, {"window", FieldRegion::window}});
    };
    s["solver.window_margin"] = [](RunConfig& c, auto& k, auto& v) { c.solver.window_margin = parse_int(k, v); };
    s["solver.a_method"] = [](RunConfig& c, auto& k, auto& v) {
      c.solver.a_method = parse_enum<AReconstruction>(
          k, v,
          {{"current_potential", AReconstruction::current_potential}, {"field_curl", AReconstruction::field_curl}});
    };
    s["solver.el_exclusion"] = [](RunConfig& c, auto& k, auto& v) { c.solver.el_exclusion = parse_double(k, v); };
    s["solver.consistency_tol"] = [](RunConfig& c, auto& k, auto& v) { c.solver.consistency_tol = parse_double(k, v); };
    s["solver.mass_tol_rel"] = [](RunConfig& c, auto& k, auto& v) { c.solver.mass_tol_rel = parse_double(k, v); };
    // task
    s["task.h0_grid"] = [](RunConfig& c, auto& k, auto& v) { c.task.h0_grid = parse_list(k, v); };
    s["task.h0_relative"] = [](RunConfig& c, auto& k, auto& v) { c.task.h0_relative = parse_bool(k, v); };
    s["task.epsilon"] = [](RunConfig& c, auto& k, auto& v) { c.task.epsilon = parse_list(k, v); };
    s["task.f_type"] = [](RunConfig& c, auto& k, auto& v) {
      c.task.f_type = parse_enum<std::string>(k, v, {{"constant", "constant"}, {"file", "file"}});
    };
    s["task.f_value"] = [](RunConfig& c, auto& k, auto& v) { c.task.f_value = parse_double(k, v); };
    s["task.f_file"] = [](RunConfig& c, auto&, auto& v) { c.task.f_file = trim(v); };
    s["task.a1"] = [](RunConfig& c, auto& k, auto& v) { c.task.a1 = parse_double(k, v); };
    s["task.a2"] = [](RunConfig& c, auto& k, auto& v) { c.task.a2 = parse_double(k, v); };
    s["task.validate_resolution"] = [](RunConfig& c, auto& k, auto& v) { c.task.validate_resolution = parse_int(k, v); };
    // output
    s["output.directory"] = [](RunConfig& c, auto&, auto& v) { c.output.directory = trim(v); };
    s["output.formats"] = [](RunConfig& c, auto& k, auto& v) {
      c.output.json = c.output.csv = c.output.vtk = false;
      for (const auto& f : split(v, ", \t")) {
        if (f == "json") c.output.json = true;
        else if (f == "csv") c.output.csv = true;
        else if (f == "vtk") c.output.vtk = true;
        else bad_value(k, v, "formats are json, csv, vtk");
      }
    };
    s["output.field_dump"] = [](RunConfig& c, auto& k, auto& v) {
      c.output.field_dump =
          parse_enum<FieldDump>(k, v, {{"auto", FieldDump::automatic}, {"true", FieldDump::on}, {"false", FieldDump::off}});
    };
    s["output.vtk_encoding"] = [](RunConfig& c, auto& k, auto& v) {
      c.output.vtk_encoding = parse_enum<VtkEncoding>(k, v, {{"ascii", VtkEncoding::ascii}, {"binary", VtkEncoding::binary}});
    };
    return s;
  }();
  return m;
}

void validate_config(const RunConfig& c) {
  auto check = [](bool ok, const std::string& key, const std::string& why) {
    if (!ok) throw Error(ErrorKind::config, "config key '" + key + "': " + why);
  };
  check(c.domain.radius > 0.0, "domain.radius", "must be positive");
  check(c.domain.width > 0.0, "domain.width", "must be positive");
  check(c.domain.height > 0.0, "domain.height", "must be positive");
  check(c.domain.shape != "polygon" || c.domain.vertices.size() >= 3, "domain.vertices", "a polygon needs at least 3 vertices");
  check(c.domain.L > 0.0, "domain.L", "must be positive");
  check(c.domain.h > 0.0, "domain.h", "must be positive");
  check(c.domain.nz >= 2, "domain.nz", "must be at least 2");
  check(c.domain.pad_factor >= 0.5, "domain.pad_factor", "must be at least 0.5");
  check(c.domain.memory_budget_mb > 0.0, "domain.memory_budget_mb", "must be positive");
  check(c.solver.linear.tol_rel > 0.0 && c.solver.linear.tol_rel < 1.0, "solver.tol_rel", "must lie in (0,1)");
  check(c.solver.linear.max_iter >= 0, "solver.max_iter", "must be non-negative");
  check(c.solver.slice_tol > 0.0 && c.solver.slice_tol < 1.0, "solver.slice_tol", "must lie in (0,1)");
  check(c.solver.vi.omega > 0.0 && c.solver.vi.omega < 2.0, "solver.sor_omega", "must lie in (0,2)");
  check(c.solver.vi.tol_vi > 0.0, "solver.tol_vi", "must be positive");
  check(c.solver.vi.max_iter >= 1, "solver.vi_max_iter", "must be at least 1");
  check(c.solver.vi.active_tol_rel > 0.0, "solver.active_tol_rel", "must be positive");
  check(c.solver.window_margin >= 1, "solver.window_margin", "must be at least 1");
  check(c.solver.el_exclusion >= 0.0, "solver.el_exclusion", "must be non-negative");
  check(c.solver.consistency_tol > 0.0, "solver.consistency_tol", "must be positive");
  check(c.solver.mass_tol_rel > 0.0, "solver.mass_tol_rel", "must be positive");
  for (double h0 : c.task.h0_grid) check(h0 > 0.0, "task.h0_grid", "values must be positive");
  for (std::size_t m = 1; m < c.task.h0_grid.size(); ++m)
    check(c.task.h0_grid[m] > c.task.h0_grid[m - 1], "task.h0_grid", "must be strictly increasing");
  for (double e : c.task.epsilon) check(e > 0.0 && e < 1.0, "task.epsilon", "values must lie in (0,1)");
  check(c.task.a1 < 0.0, "task.a1", "the lower bound must be negative");
  check(c.task.a2 > 0.0, "task.a2", "the upper bound must be positive");
  check(c.task.f_type != "file" || !c.task.f_file.empty(), "task.f_file", "required when f_type = file");
  check(c.task.validate_resolution >= 4, "task.validate_resolution", "must be at least 4");
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  boost::property_tree::ptree pt;
  std::istringstream is(text);
  try {
    boost::property_tree::ini_parser::read_ini(is, pt);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw Error(ErrorKind::config, std::string("config parse error: ") + e.message() + " at line " + std::to_string(e.line()));
  }
  RunConfig c;
  const auto& table = setters();
  for (const auto& [section, body] : pt) {
    if (!body.data().empty()) throw Error(ErrorKind::config, "config key '" + section + "': keys must be inside a section");
    if (section != "domain" && section != "solver" && section != "task" && section != "output")
      throw Error(ErrorKind::config, "unknown config section '" + section + "'");
    for (const auto& [key, value] : body) {
      const std::string full = section + "." + key;
      const auto it = table.find(full);
      if (it == table.end()) throw Error(ErrorKind::config, "unknown config key '" + full + "'");
      it->second(c, full, value.data());
    }
  }
  validate_config(c);
  c.source_text = text;
  return c;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::config, "cannot read config file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  RunConfig c = parse_config_text(ss.str());
  c.source_path = path;
  return c;
}

// ============================================================================
// Serialization helpers
// ============================================================================

std::string sha256_hex(const std::string& data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
    throw Error(ErrorKind::resource, "SHA-256 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

void atomic_write(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::resource, "cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw Error(ErrorKind::resource, "write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorKind::resource, "cannot rename '" + tmp.string() + "': " + ec.message());
}

std::string format_double(double v) {
  std::array<char, 64> buf{};
  const auto r = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), r.ptr);
}

namespace {

void put_be_double(std::string& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int b = 7; b >= 0; --b) out += static_cast<char>((bits >> (8 * b)) & 0xff);
}

void put_le_double(std::string& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int b = 0; b < 8; ++b) out += static_cast<char>((bits >> (8 * b)) & 0xff);
}

std::string vtk_header(const std::string& title, VtkEncoding enc, const Index3& n, const Vec3& origin, const Vec3& h) {
  std::string t = title.substr(0, 255);
  for (char& c : t)
    if (c == '\n') c = ' ';
  std::string s = "# vtk DataFile Version 3.0\n" + t + "\n" + (enc == VtkEncoding::binary ? "BINARY\n" : "ASCII\n");
  s += "DATASET STRUCTURED_POINTS\n";
  s += "DIMENSIONS " + std::to_string(n[0]) + " " + std::to_string(n[1]) + " " + std::to_string(n[2]) + "\n";
  s += "ORIGIN " + format_double(origin[0]) + " " + format_double(origin[1]) + " " + format_double(origin[2]) + "\n";
  s += "SPACING " + format_double(h[0]) + " " + format_double(h[1]) + " " + format_double(h[2]) + "\n";
  s += "POINT_DATA " + std::to_string(static_cast<long long>(n[0]) * n[1] * n[2]) + "\n";
  return s;
}

void vtk_value(std::string& out, double v, VtkEncoding enc) {
  if (enc == VtkEncoding::binary) {
    put_be_double(out, v);
  } else {
    out += format_double(v);
    out += '\n';
  }
}

}  // namespace

std::string vtk_vector_field(const VectorField3D& f, const std::string& name, const std::string& title, VtkEncoding enc) {
  const Grid3& g = f.grid;
  std::string s = vtk_header(title, enc, g.n, g.origin, g.h);
  s += "VECTORS " + name + " double\n";
  // Average each staggered component onto the nodes from its half-offset neighbours.
  std::array<Vec3, 3> off;
  for (int a = 0; a < 3; ++a) off[a] = stagger_offset(f.stagger(a));
  auto at = [&](int a, int i, int j, int k) {
    if (i < 0 || j < 0 || k < 0 || i >= g.n[0] || j >= g.n[1] || k >= g.n[2]) return 0.0;
    return f.c[a][g.index(i, j, k)];
  };
  for (int k = 0; k < g.n[2]; ++k)
    for (int j = 0; j < g.n[1]; ++j)
      for (int i = 0; i < g.n[0]; ++i)
        for (int a = 0; a < 3; ++a) {
          const int si = off[a][0] > 0 ? 2 : 1, sj = off[a][1] > 0 ? 2 : 1, sk = off[a][2] > 0 ? 2 : 1;
          double sum = 0.0;
          for (int dk = 0; dk < sk; ++dk)
            for (int dj = 0; dj < sj; ++dj)
              for (int di = 0; di < si; ++di) sum += at(a, i - di, j - dj, k - dk);
          vtk_value(s, sum / (si * sj * sk), enc);
        }
  return s;
}

std::string vtk_slice_fields(const CrossSection& cs, const std::vector<std::pair<std::string, const ScalarField2D*>>& fields,
                             const std::string& title, VtkEncoding enc) {
  std::string s = vtk_header(title, enc, {cs.nx(), cs.ny(), 1}, {cs.origin().x, cs.origin().y, 0.0}, {cs.h(), cs.h(), cs.h()});
  for (const auto& [name, f] : fields) {
    s += (s.back() == '\n' ? "" : "\n");
    s += "SCALARS " + name + " double 1\nLOOKUP_TABLE default\n";
    for (double v : f->v) vtk_value(s, v, enc);
  }
  return s;
}

std::string raw_slice_stack(const StreamFamily& w) {
  std::string out;
  for (const auto& s : w.slices)
    for (double v : s.v) put_le_double(out, v);
  return out;
}

std::string raw_slice_stack_sidecar(const StreamFamily& w, double h3, const std::string& payload_name,
                                    const std::string& config_hash) {
  json j;
  j["schema"] = kSchemaVersion;
  j["config_hash"] = config_hash;
  j["payload"] = payload_name;
  j["dtype"] = "float64";
  j["byte_order"] = "little";
  j["shape"] = {w.nz(), w.cs.ny(), w.cs.nx()};
  j["axis_order"] = "slice, y, x (x fastest)";
  j["spacing"] = {w.cs.h(), w.cs.h(), h3};
  j["origin"] = {w.cs.origin().x, w.cs.origin().y, 0.5 * h3};
  j["location"] = "cross-section nodes; slice k at x3 = (k + 1/2) h3";
  return j.dump(2) + "\n";
}

// ============================================================================
// Commands
// ============================================================================

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json solve_json(const SolveReport& r) {
  return {{"iterations", r.iterations}, {"final_residual_rel", r.final_residual_rel}, {"converged", r.converged}};
}

std::string to_string(Preconditioner p) {
  switch (p) {
    case Preconditioner::none: return "none";
    case Preconditioner::diagonal: return "diagonal";
    case Preconditioner::slice_laplacian: return "slice_laplacian";
  }
  return "";
}

std::string to_string(FreeSpaceMethod m) {
  return m == FreeSpaceMethod::kernel_convolution ? "kernel_convolution" : "padded_dirichlet";
}

json config_json(const RunConfig& c) {
  json d;
  d["shape"] = c.domain.shape;
  if (c.domain.shape == "disk") d["radius"] = c.domain.radius;
  if (c.domain.shape == "rectangle") {
    d["width"] = c.domain.width;
    d["height"] = c.domain.height;
  }
  if (c.domain.shape == "polygon") {
    json v = json::array();
    for (const auto& p : c.domain.vertices) v.push_back({p.x, p.y});
    d["vertices"] = v;
  }
  d["L"] = c.domain.L;
  d["h"] = c.domain.h;
  d["nz"] = c.domain.nz;
  d["pad_factor"] = c.domain.pad_factor;
  d["alignment"] = c.domain.alignment == GridAlignment::cell_centered ? "cell_centered" : "node_centered";
  d["boundary"] = c.domain.boundary == BoundaryTreatment::cut_edge ? "cut_edge" : "staircase";
  d["memory_budget_mb"] = c.domain.memory_budget_mb;
  json s;
  s["tol_rel"] = c.solver.linear.tol_rel;
  s["max_iter"] = c.solver.linear.max_iter;
  s["preconditioner"] = to_string(c.solver.linear.preconditioner);
  s["freespace_method"] = to_string(c.solver.linear.freespace_method);
  s["slice_tol"] = c.solver.slice_tol;
  s["sor_omega"] = c.solver.vi.omega;
  s["tol_vi"] = c.solver.vi.tol_vi;
  s["vi_max_iter"] = c.solver.vi.max_iter;
  s["active_tol_rel"] = c.solver.vi.active_tol_rel;
  s["field_region"] = c.solver.field_region == FieldRegion::box ? "box" : "window";
  s["window_margin"] = c.solver.window_margin;
  s["a_method"] = c.solver.a_method == AReconstruction::current_potential ? "current_potential" : "field_curl";
  s["el_exclusion"] = c.solver.el_exclusion;
  s["consistency_tol"] = c.solver.consistency_tol;
  s["mass_tol_rel"] = c.solver.mass_tol_rel;
  json t;
  t["h0_grid"] = c.task.h0_grid;
  t["h0_relative"] = c.task.h0_relative;
  t["epsilon"] = c.task.epsilon;
  t["f_type"] = c.task.f_type;
  t["f_value"] = c.task.f_value;
  t["f_file"] = c.task.f_file;
  t["a1"] = c.task.a1;
  t["a2"] = c.task.a2;
  t["validate_resolution"] = c.task.validate_resolution;
  json o;
  o["directory"] = c.output.directory.string();
  o["formats"] = {{"json", c.output.json}, {"csv", c.output.csv}, {"vtk", c.output.vtk}};
  o["field_dump"] = c.output.field_dump == FieldDump::automatic ? "auto" : c.output.field_dump == FieldDump::on ? "true" : "false";
  o["vtk_encoding"] = c.output.vtk_encoding == VtkEncoding::binary ? "binary" : "ascii";
  return {{"domain", d}, {"solver", s}, {"task", t}, {"output", o}};
}

/// Output directory, manifest bookkeeping and timing of one command.
class Run {
 public:
  Run(const RunConfig& cfg, const RunOptions& opts, std::string command)
      : cfg_(cfg), opts_(opts), command_(std::move(command)), hash_(sha256_hex(cfg.source_text)), start_(utc_now()) {
    dir_ = opts.output_dir ? *opts.output_dir : cfg.output.directory;
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw Error(ErrorKind::resource, "cannot create output directory '" + dir_.string() + "': " + ec.message());
    // A stale report from an earlier run must not survive a failed one.
    for (const char* f : {"report.json", "manifest.json"}) fs::remove(dir_ / f, ec);
  }

  const std::string& hash() const { return hash_; }
  const fs::path& dir() const { return dir_; }

  void write(const std::string& name, const std::string& content) {
    atomic_write(dir_ / name, content);
    outputs_.push_back(name);
  }
  void write_json(const std::string& name, json j) {
    j["schema"] = kSchemaVersion;
    j["config_hash"] = hash_;
    write(name, j.dump(2) + "\n");
  }
  void csv(const std::string& name, const std::string& header, const std::vector<std::vector<std::string>>& rows) {
    std::string s = "# config_hash=" + hash_ + "\n" + header + "\n";
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) s += (i ? "," : "") + r[i];
      s += "\n";
    }
    write(name, s);
  }

  template <class F>
  auto stage(const std::string& name, F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    auto r = f();
    stages_.push_back({{"stage", name}, {"seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}});
    return r;
  }
  void annotate_stage(const json& extra) { stages_.back().update(extra); }
  void warn(const std::string& w) { warnings_.push_back(w); }
  void note(const std::string& k, const json& v) { notes_[k] = v; }

  void finish(const std::string& status) {
    json m;
    m["command"] = command_;
    m["status"] = status;
    m["tool_version"] = kToolVersion;
    m["config_path"] = cfg_.source_path.string();
    m["config_text"] = cfg_.source_text;
    m["config"] = config_json(cfg_);
    m["deterministic"] = opts_.deterministic;
    m["threads"] = opts_.threads;
    m["start_time"] = start_;
    m["end_time"] = utc_now();
    m["stages"] = stages_;
    m["warnings"] = warnings_;
    m["notes"] = notes_;
    m["outputs"] = outputs_;
    write_json("manifest.json", m);
  }

 private:
  const RunConfig& cfg_;
  RunOptions opts_;
  std::string command_;
  std::string hash_;
  std::string start_;
  fs::path dir_;
  json stages_ = json::array();
  json warnings_ = json::array();
  json notes_ = json::object();
  std::vector<std::string> outputs_;
};

CrossSection make_cross_section(const RunConfig& c) {
  CrossSectionOptions o;
  o.alignment = c.domain.alignment;
  o.boundary = c.domain.boundary;
  Shape s = c.domain.shape == "disk"        ? Shape::disk(c.domain.radius)
            : c.domain.shape == "rectangle" ? Shape::rectangle(c.domain.width, c.domain.height)
                                            : Shape::polygon(c.domain.vertices);
  return build_cross_section(s, c.domain.h, o);
}

BStarOptions bstar_options(const RunConfig& c) {
  BStarOptions o;
  o.field_region = c.solver.field_region;
  o.window_margin = c.solver.window_margin;
  o.a_method = c.solver.a_method;
  o.el_exclusion = c.solver.el_exclusion;
  return o;
}

json diagnostics_json(const ElDiagnostics& d) {
  return {{"el_residual_interior", d.el_residual_interior},
          {"el_nodes", d.el_nodes},
          {"el_exclusion", d.exclusion},
          {"div_B", d.div_B},
          {"curl_support_leak", d.curl_support_leak},
          {"curl_leak_discrete", d.curl_leak_discrete},
          {"curlB3_rel", d.curlB3},
          {"b3_min", d.b3_min},
          {"b3_max", d.b3_max}};
}

/// State shared by hc1 and sweep.
struct Pipeline {
  DiscretizedDomain dom;
  BStarSolution sol;
  XiResult xi;
  json report;
};

/// Solves for B_star and xi and fills the common part of the report. Returns false when CG failed.
bool run_pipeline(Run& run, const RunConfig& cfg, Pipeline& p) {
  const CrossSection cs = run.stage("cross_section", [&] { return make_cross_section(cfg); });
  p.dom = run.stage("embed", [&] {
    return embed_cylinder(cs, cfg.domain.L, cfg.domain.nz, {cfg.domain.pad_factor, cfg.domain.memory_budget_mb});
  });
  p.sol = run.stage("bstar", [&] { return solve_bstar(p.dom, cfg.solver.linear, bstar_options(cfg)); });
  run.annotate_stage({{"solve", solve_json(p.sol.solve_report)}});
  for (const auto& w : p.sol.warnings) run.warn(w);

  json& r = p.report;
  r["domain"] = {{"shape", cs.shape().describe()},
                 {"L", p.dom.L()},
                 {"h2", p.dom.h2()},
                 {"h3", p.dom.h3()},
                 {"nz", p.dom.nz()},
                 {"interior_nodes", cs.interior_count()},
                 {"area", cs.area()},
                 {"volume", p.dom.volume()},
                 {"box_resolution", p.dom.box_resolution()},
                 {"field_grid", p.sol.field_grid.n}};
  r["bstar"] = {{"energy", p.sol.energy},
                {"energy_zero", p.sol.energy_zero},
                {"field_energy", p.sol.field_energy},
                {"solve", solve_json(p.sol.solve_report)},
                {"diagnostics", diagnostics_json(p.sol.diagnostics)}};
  if (!p.sol.solve_report.converged) return false;

  SolverConfig slice = cfg.solver.linear;
  slice.tol_rel = cfg.solver.slice_tol;
  slice.preconditioner = Preconditioner::diagonal;
  p.xi = run.stage("xi", [&] { return compute_xi(p.sol, p.dom, slice); });

  const double xi = p.xi.xi;
  r["xi"] = xi;
  r["xi_route2"] = p.xi.xi_route2;
  r["route_disagreement"] = p.xi.route_disagreement();
  r["consistency_tol"] = cfg.solver.consistency_tol;
  r["routes_consistent"] = p.xi.route_disagreement() <= cfg.solver.consistency_tol;
  if (!(p.xi.route_disagreement() <= cfg.solver.consistency_tol))
    run.warn("xi routes disagree by " + format_double(p.xi.route_disagreement()));
  if (xi > 0.0) {
    r["hc1_coefficient"] = hc1_coefficient(xi);
    json est = json::array();
    for (double e : cfg.task.epsilon) {
      const Hc1Estimate h = hc1_estimate(xi, e);
      est.push_back({{"epsilon", h.epsilon}, {"hc1", h.value}, {"provenance", h.provenance}});
    }
    r["hc1_estimates"] = est;
  } else {
    r["hc1_coefficient"] = nullptr;
    run.warn("xi is zero: degenerate domain, no critical field coefficient");
  }
  const auto& sc = p.xi.slice_curve;
  const SliceCurvePoint& am = sc[std::max(p.xi.argmax_slice, 0)];
  r["argmax"] = {{"slice", p.xi.argmax_slice}, {"x3", am.x3}, {"i", am.i}, {"j", am.j}};
  r["edge_slices"] = {{"first", {{"x3", sc.front().x3}, {"sup_norm", sc.front().sup_norm}}},
                      {"last", {{"x3", sc.back().x3}, {"sup_norm", sc.back().sup_norm}}}};
  return true;
}

void write_common_outputs(Run& run, const RunConfig& cfg, const Pipeline& p) {
  const CrossSection& cs = p.dom.cross_section();
  if (cfg.output.csv) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& s : p.xi.slice_curve) {
      const Vec2 x = s.i >= 0 ? cs.node(s.i, s.j) : Vec2{};
      rows.push_back({format_double(s.x3), format_double(s.sup_norm), format_double(s.sup_norm_route2), std::to_string(s.i),
                      std::to_string(s.j), format_double(x.x), format_double(x.y)});
    }
    run.csv("slice_curve.csv", "x3,sup_norm,sup_norm_route2,argmax_i,argmax_j,argmax_x,argmax_y", rows);
  }
  const Grid3& G = p.sol.field_grid;
  const bool small = G.n[0] <= 64 && G.n[1] <= 64 && G.n[2] <= 64;
  const bool dump = cfg.output.field_dump == FieldDump::on || (cfg.output.field_dump == FieldDump::automatic && small);
  if (!dump) {
    run.note("field_dump", "skipped (field grid above 64^3 or disabled)");
    return;
  }
  if (cfg.output.vtk) {
    run.write("B_star.vtk", vtk_vector_field(p.sol.B_star, "B_star", "B_star config_hash=" + run.hash(), cfg.output.vtk_encoding));
    run.write("A_star.vtk", vtk_vector_field(p.sol.A_star, "A_star", "A_star config_hash=" + run.hash(), cfg.output.vtk_encoding));
  }
  run.write("w_star.bin", raw_slice_stack(p.sol.w_star));
  run.write("w_star.json", raw_slice_stack_sidecar(p.sol.w_star, p.dom.h3(), "w_star.bin", run.hash()));
}

int convergence_failure(Run& run, const Pipeline& p, const std::string& what) {
  json partial = p.report;
  partial["complete"] = false;
  partial["failure"] = what;
  run.write_json("report.partial.json", partial);
  run.finish("convergence_failure");
  std::cerr << "error: " << what << "\n";
  return exit_convergence;
}

}  // namespace

int cmd_hc1(const RunConfig& cfg, const RunOptions& opts) {
  Run run(cfg, opts, "hc1");
  Pipeline p;
  if (!run_pipeline(run, cfg, p)) return convergence_failure(run, p, "reduced CG did not converge");
  write_common_outputs(run, cfg, p);
  if (cfg.output.json) run.write_json("report.json", p.report);
  run.finish("ok");
  return exit_ok;
}

int cmd_sweep(const RunConfig& cfg, const RunOptions& opts) {
  if (cfg.task.h0_grid.empty()) throw Error(ErrorKind::config, "config key 'task.h0_grid': empty h0 grid");
  Run run(cfg, opts, "sweep");
  Pipeline p;
  if (!run_pipeline(run, cfg, p)) return convergence_failure(run, p, "reduced CG did not converge");
  if (!(p.xi.xi > 0.0)) throw Error(ErrorKind::numerical, "xi is zero: nothing to sweep");
  const double hc = hc1_coefficient(p.xi.xi);
  std::vector<double> grid = cfg.task.h0_grid;
  if (cfg.task.h0_relative)
    for (double& g : grid) g *= hc;

  SweepOptions so;
  so.vi = cfg.solver.vi;
  so.mass_tol_rel = cfg.solver.mass_tol_rel;
  so.threads = opts.threads;
  const SweepResult sw = run.stage("sweep", [&] { return sweep_h0(p.sol, p.dom, grid, so); });

  json pts = json::array();
  std::vector<std::vector<std::string>> rows;
  bool all_converged = true;
  double sub_mass = 0.0;
  for (const SweepPoint& q : sw.points) {
    pts.push_back({{"h0", q.h0},
                   {"h0_over_hc", q.h0 / hc},
                   {"mass", q.mass},
                   {"coincidence_nodes", q.coincidence_nodes},
                   {"max_sweeps", q.max_iterations},
                   {"converged", q.converged}});
    rows.push_back({format_double(q.h0), format_double(q.h0 / hc), format_double(q.mass), std::to_string(q.coincidence_nodes),
                    std::to_string(q.max_iterations), q.converged ? "1" : "0"});
    all_converged = all_converged && q.converged;
    if (q.h0 <= 0.95 * hc) sub_mass = std::max(sub_mass, q.mass);
  }
  json& r = p.report;
  r["sweep"] = pts;
  r["mass_tol"] = sw.mass_tol;
  r["onset_status"] = to_string(sw.status);
  r["max_mass_below_0.95_hc"] = sub_mass;
  if (sw.onset_h0) {
    r["onset_h0"] = *sw.onset_h0;
    r["onset_over_hc"] = *sw.onset_h0 / hc;
  } else {
    run.note("onset", to_string(sw.status) + "; onset_h0 absent");
  }

  // Decoupled diagnostic at the last grid value: it solves the slice problem with A_star fixed,
  // which is the mean-field minimizer only in the vortex-free regime.
  std::vector<ScalarField2D> psi;
  std::vector<double> masses;
  for (const VIReport& v : sw.last) {
    psi.push_back(v.u);
    masses.push_back(v.mass);
  }
  const VorticityReport vr = reconstruct_v(psi, p.sol, p.dom, masses);
  const MeanFieldEnergy e = mean_field_energy(vr.v, p.sol, p.dom, grid.back());
  const double denom = std::max(vr.tv_3d, vr.tv_slices);
  r["decoupled_diagnostic"] = {{"label", "decoupled diagnostic"},
                               {"h0", grid.back()},
                               {"tv_3d", vr.tv_3d},
                               {"tv_slices", vr.tv_slices},
                               {"slicing_rel_diff", denom > 0.0 ? std::abs(vr.tv_3d - vr.tv_slices) / denom : 0.0},
                               {"energy",
                                {{"kinetic", e.kinetic}, {"vorticity", e.vorticity}, {"field", e.field}, {"total", e.total}}}};

  write_common_outputs(run, cfg, p);
  if (cfg.output.csv) run.csv("sweep.csv", "h0,h0_over_hc,mass,coincidence_nodes,max_sweeps,converged", rows);
  if (!all_converged) {
    return convergence_failure(run, p, "projected SOR did not converge at some sweep point");
  }
  if (cfg.output.json) run.write_json("report.json", r);
  run.finish("ok");
  return exit_ok;
}

namespace {

ScalarField2D read_grid_file(const fs::path& path, const CrossSection& cs) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::config, "config key 'task.f_file': cannot read '" + path.string() + "'");
  ScalarField2D f(cs);
  std::string line;
  int j = 0;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto vals = split(t, ", \t");
    if (j >= cs.ny() || static_cast<int>(vals.size()) != cs.nx())
      throw Error(ErrorKind::config, "config key 'task.f_file': expected " + std::to_string(cs.ny()) + " rows of " +
                                         std::to_string(cs.nx()) + " values");
    for (int i = 0; i < cs.nx(); ++i) f(i, j) = parse_double("task.f_file", vals[i]);
    ++j;
  }
  if (j != cs.ny())
    throw Error(ErrorKind::config, "config key 'task.f_file': expected " + std::to_string(cs.ny()) + " rows");
  for (std::size_t n = 0; n < cs.size(); ++n)
    if (!cs.mask()[n]) f.v[n] = 0.0;
  return f;
}

}  // namespace

int cmd_obstacle(const RunConfig& cfg, const RunOptions& opts) {
  Run run(cfg, opts, "obstacle");
  const CrossSection cs = run.stage("cross_section", [&] { return make_cross_section(cfg); });
  ObstacleProblem prob;
  prob.cs = cs;
  prob.a1 = cfg.task.a1;
  prob.a2 = cfg.task.a2;
  if (cfg.task.f_type == "file") {
    fs::path fp = cfg.task.f_file;
    if (fp.is_relative() && !cfg.source_path.empty()) fp = cfg.source_path.parent_path() / fp;
    prob.f = read_grid_file(fp, cs);
  } else {
    prob.f = ScalarField2D(cs);
    for (int n : cs.interior_nodes()) prob.f.v[n] = cfg.task.f_value;
  }
  const VIReport rep = run.stage("obstacle", [&] { return solve_double_obstacle(prob, cfg.solver.vi); });
  SolverConfig lin = cfg.solver.linear;
  lin.tol_rel = cfg.solver.slice_tol;
  lin.preconditioner = Preconditioner::diagonal;
  const ScalarField2D u_lin = run.stage("linear", [&] { return poisson_dirichlet_2d(prob.f, lin); });
  const BoundsCheck bc = verify_vi_bounds(rep, prob, 10.0 * cs.h() * cs.h());

  json s;
  s["a1"] = prob.a1;
  s["a2"] = prob.a2;
  s["max_abs_u"] = max_abs(rep.u);
  s["max_abs_u_unconstrained"] = max_abs(u_lin);
  s["lower_count"] = rep.lower_count;
  s["upper_count"] = rep.upper_count;
  s["mass"] = rep.mass;
  s["iterations"] = rep.iterations;
  s["last_change"] = rep.last_change;
  s["converged"] = rep.converged;
  s["complementarity_residual"] = complementarity_residual(rep, prob);
  s["bounds_ok"] = bc.ok;
  s["bounds_worst_excess"] = bc.worst;
  s["objective"] = discrete_objective(rep.u, prob.f);
  if (cfg.task.f_type == "constant" && cfg.domain.shape == "disk")
    s["disk_torsion_reference"] = cfg.task.f_value * cfg.domain.radius * cfg.domain.radius / 4.0;
  json lower = json::array(), upper = json::array();
  for (int n : cs.interior_nodes()) {
    if (rep.lower_set[n]) lower.push_back({n % cs.nx(), n / cs.nx()});
    if (rep.upper_set[n]) upper.push_back({n % cs.nx(), n / cs.nx()});
  }
  s["lower_set"] = lower;
  s["upper_set"] = upper;
  run.write_json("sets.json", s);

  if (cfg.output.csv) {
    std::vector<std::vector<std::string>> rows;
    for (int n : cs.interior_nodes()) {
      const int i = n % cs.nx(), j = n / cs.nx();
      const Vec2 x = cs.node(i, j);
      const int set = rep.lower_set[n] ? -1 : rep.upper_set[n] ? 1 : 0;
      rows.push_back({std::to_string(i), std::to_string(j), format_double(x.x), format_double(x.y), format_double(rep.u.v[n]),
                      format_double(rep.residual_measure.v[n]), std::to_string(set), format_double(u_lin.v[n])});
    }
    run.csv("u.csv", "i,j,x,y,u,residual,set,u_unconstrained", rows);
  }
  if (cfg.output.vtk)
    run.write("u.vtk", vtk_slice_fields(cs, {{"u", &rep.u}, {"residual", &rep.residual_measure}, {"u_unconstrained", &u_lin}},
                                        "obstacle config_hash=" + run.hash(), cfg.output.vtk_encoding));
  if (!rep.converged) {
    run.finish("convergence_failure");
    std::cerr << "error: projected SOR did not converge\n";
    return exit_convergence;
  }
  run.finish("ok");
  return exit_ok;
}

int cmd_validate(const RunConfig& cfg, const RunOptions& opts) {
  Run run(cfg, opts, "validate");
  ValidationConfig vc;
  vc.resolution = cfg.task.validate_resolution;
  vc.solver = cfg.solver.linear;
  const auto results = run.stage("validate", [&] { return run_validation(vc); });
  json checks = json::array();
  std::vector<std::string> failed;
  for (const auto& c : results) {
    checks.push_back({{"name", c.name},
                      {"passed", c.passed},
                      {"measured", c.measured},
                      {"threshold", c.threshold},
                      {"detail", c.detail},
                      {"seconds", c.seconds}});
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << " measured=" << format_double(c.measured)
              << " threshold=" << format_double(c.threshold) << "  " << c.detail << "\n";
    if (!c.passed) failed.push_back(c.name);
  }
  run.write_json("validation.json", {{"resolution", vc.resolution}, {"checks", checks}, {"failed", failed}});
  run.finish(failed.empty() ? "ok" : "checks_failed");
  if (!failed.empty()) {
    std::cerr << "failed checks:";
    for (const auto& f : failed) std::cerr << " " << f;
    std::cerr << "\n";
    return exit_failure;
  }
  return exit_ok;
}

int run_command(const std::string& name, const fs::path& config_path, const RunOptions& opts) {
  try {
    if (opts.threads < 1) throw Error(ErrorKind::config, "--threads must be at least 1");
    const RunConfig cfg = load_config(config_path);
    if (name == "hc1") return cmd_hc1(cfg, opts);
    if (name == "sweep") return cmd_sweep(cfg, opts);
    if (name == "obstacle") return cmd_obstacle(cfg, opts);
    if (name == "validate") return cmd_validate(cfg, opts);
    throw Error(ErrorKind::config, "unknown command '" + name + "'");
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.kind()) {
      case ErrorKind::config:
      case ErrorKind::invalid_argument: return exit_config;
      case ErrorKind::resource: return exit_resource;
      case ErrorKind::convergence:
      case ErrorKind::numerical: return exit_convergence;
    }
    return exit_failure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_failure;
  }
}

}  // namespace hc1
