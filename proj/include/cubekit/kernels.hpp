#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "cubekit/geo.hpp"

namespace cubekit {

/// One generated image after mapping to a (continent, country, artifact) triple.
struct MappedItem {
  std::string image_id;
  int template_index = 0;
  long long seed = 0;
  Continent continent = Continent::Asia;
  std::string country;      // ISO-3166 alpha-2
  std::string artifact_id;  // canonical, case-sensitive
  double quality = 1.0;     // s(x) in [0,1]
};

using Collection = std::span<const MappedItem>;

enum class GeoLevel { Continent, Country, Artifact };

/// Weights over the continent/country/artifact indicator kernels plus the
/// Renyi order. Construct through make() or preset(); both validate.
class KernelConfig {
 public:
  static constexpr double kWeightSumTolerance = 1e-12;

  /// Throws ConfigError unless all weights are >= 0, they sum to 1 and q >= 0.
  static KernelConfig make(double w1, double w2, double w3, double q = 1.0);

  /// Named presets: continent, country, artifact, hierarchical, uniform.
  static KernelConfig preset(std::string_view name, double q = 1.0);
  static const std::array<std::string_view, 5>& preset_names();

  double w1() const { return w_[0]; }
  double w2() const { return w_[1]; }
  double w3() const { return w_[2]; }
  double weight(GeoLevel level) const { return w_[static_cast<int>(level)]; }
  double q() const { return q_; }
  /// Preset name when built through preset(), empty otherwise.
  const std::string& name() const { return name_; }

 private:
  KernelConfig(std::array<double, 3> w, double q, std::string name)
      : w_(w), q_(q), name_(std::move(name)) {}
  std::array<double, 3> w_;
  double q_;
  std::string name_;
};

/// Symmetric, unit-diagonal, PSD similarity matrix over a collection.
class KernelMatrix {
 public:
  explicit KernelMatrix(Eigen::MatrixXd entries) : m_(std::move(entries)) {}

  std::size_t size() const { return static_cast<std::size_t>(m_.rows()); }
  double operator()(std::size_t i, std::size_t j) const {
    return m_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  const Eigen::MatrixXd& matrix() const { return m_; }

 private:
  Eigen::MatrixXd m_;
};

/// 1 iff the two items agree at `level`. Artifacts compare by id only.
int indicator_similarity(const MappedItem& a, const MappedItem& b, GeoLevel level);

double composite_similarity(const MappedItem& a, const MappedItem& b, const KernelConfig& cfg);

/// Throws InputError on an empty collection.
KernelMatrix build_kernel_matrix(Collection items, const KernelConfig& cfg);

}  // namespace cubekit
