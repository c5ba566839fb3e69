#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "hc1/bstar.hpp"
#include "hc1/cross_section.hpp"
#include "hc1/staggered.hpp"

namespace hc1::test {

inline std::mt19937_64& rng() {
  static std::mt19937_64 g(20240611);
  return g;
}

inline double uniform(double lo = -1.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(rng()); }

/// Random values on interior nodes, zero elsewhere.
inline ScalarField2D random_interior(const CrossSection& cs) {
  ScalarField2D f(cs);
  for (int n : cs.interior_nodes()) f.v[n] = uniform();
  return f;
}

inline ScalarField3D random_field(const Grid3& g, Stagger s) {
  ScalarField3D f(g, s);
  for (double& x : f.v) x = uniform();
  return f;
}

inline VectorField3D random_field(const Grid3& g, VectorLayout l) {
  VectorField3D f(g, l);
  for (auto& c : f.c)
    for (double& x : c) x = uniform();
  return f;
}

inline StreamFamily random_stream(const DiscretizedDomain& dom) {
  StreamFamily w = zero_stream(dom);
  for (auto& s : w.slices) s = random_interior(dom.cross_section());
  return w;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("hc1_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace hc1::test
