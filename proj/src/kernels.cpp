#include "cubekit/kernels.hpp"

#include <cmath>

#include "cubekit/error.hpp"

namespace cubekit {

namespace {

struct Preset {
  std::string_view name;
  std::array<double, 3> w;
};

const std::array<Preset, 5>& presets() {
  static const std::array<Preset, 5> table = {{
      {"continent", {1.0, 0.0, 0.0}},
      {"country", {0.0, 1.0, 0.0}},
      {"artifact", {0.0, 0.0, 1.0}},
      {"hierarchical", {0.5, 0.5, 0.0}},
      {"uniform", {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}},
  }};
  return table;
}

}  // namespace

KernelConfig KernelConfig::make(double w1, double w2, double w3, double q) {
  for (double w : {w1, w2, w3}) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw ConfigError("kernel weights must be finite and non-negative");
    }
  }
  if (std::abs(w1 + w2 + w3 - 1.0) > kWeightSumTolerance) {
    throw ConfigError("kernel weights must sum to 1 (got " + std::to_string(w1 + w2 + w3) + ")");
  }
  if (!(q >= 0.0)) throw ConfigError("Renyi order q must be >= 0");
  return KernelConfig({w1, w2, w3}, q, "");
}

KernelConfig KernelConfig::preset(std::string_view name, double q) {
  for (const auto& p : presets()) {
    if (p.name == name) {
      auto cfg = make(p.w[0], p.w[1], p.w[2], q);
      cfg.name_ = std::string(name);
      return cfg;
    }
  }
  throw ConfigError("unknown kernel preset '" + std::string(name) + "'");
}

const std::array<std::string_view, 5>& KernelConfig::preset_names() {
  static const std::array<std::string_view, 5> names = {"continent", "country", "artifact",
                                                        "hierarchical", "uniform"};
  return names;
}

int indicator_similarity(const MappedItem& a, const MappedItem& b, GeoLevel level) {
  switch (level) {
    case GeoLevel::Continent: return a.continent == b.continent ? 1 : 0;
    case GeoLevel::Country: return a.country == b.country ? 1 : 0;
    case GeoLevel::Artifact: return a.artifact_id == b.artifact_id ? 1 : 0;
  }
  return 0;
}

double composite_similarity(const MappedItem& a, const MappedItem& b, const KernelConfig& cfg) {
  return cfg.w1() * indicator_similarity(a, b, GeoLevel::Continent) +
         cfg.w2() * indicator_similarity(a, b, GeoLevel::Country) +
         cfg.w3() * indicator_similarity(a, b, GeoLevel::Artifact);
}

KernelMatrix build_kernel_matrix(Collection items, const KernelConfig& cfg) {
  if (items.empty()) throw InputError("cannot build a kernel matrix over an empty collection");
  const auto n = static_cast<Eigen::Index>(items.size());
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    k(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = composite_similarity(items[i], items[j], cfg);
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return KernelMatrix(std::move(k));
}

}  // namespace cubekit
