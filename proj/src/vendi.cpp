#include "cubekit/vendi.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "cubekit/error.hpp"

namespace cubekit {

EigenSpectrum normalized_spectrum(const KernelMatrix& k) {
  const auto n = static_cast<double>(k.size());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(k.matrix(), Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw Error("eigendecomposition did not converge");

  EigenSpectrum s;
  const auto& ev = solver.eigenvalues();
  s.raw.assign(ev.data(), ev.data() + ev.size());
  s.normalized.reserve(s.raw.size());
  for (double l : s.raw) {
    if (l < -vendi::kPsdSlack * n) {
      throw NonPsdError("kernel matrix has eigenvalue " + std::to_string(l));
    }
    s.normalized.push_back(std::max(l, 0.0));
  }
  // The trace is n for a unit-diagonal matrix, so the total is positive.
  auto normalize = [&] {
    const double total = std::accumulate(s.normalized.begin(), s.normalized.end(), 0.0);
    for (double& l : s.normalized) l /= total;
  };
  normalize();
  // Solver noise on exact zeros would otherwise leak into every order q < 1.
  for (double& l : s.normalized) {
    if (l <= vendi::kRankEpsilon) l = 0.0;
  }
  normalize();
  return s;
}

double vendi_score(const EigenSpectrum& spectrum, double q) {
  if (!(q >= 0.0)) throw ConfigError("Renyi order q must be >= 0");
  const auto& p = spectrum.normalized;
  const auto n = static_cast<double>(p.size());

  double lo = 1.0, hi = 0.0;
  std::size_t support = 0;
  for (double x : p) {
    if (x > 0.0) {
      ++support;
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  }
  if (support == 0) throw InputError("empty spectrum");
  // A flat spectrum has Renyi entropy log(support) for every q.
  if (hi - lo <= vendi::kFlatTolerance * hi || q == 0.0) return static_cast<double>(support);

  double vs;
  if (std::abs(q - 1.0) <= vendi::kShannonBand) {
    double h = 0.0;
    for (double x : p) {
      if (x > 0.0) h -= x * std::log(x);
    }
    vs = std::exp(h);
  } else {
    double sum = 0.0;
    for (double x : p) {
      if (x > 0.0) sum += std::pow(x, q);
    }
    vs = std::exp(std::log(sum) / (1.0 - q));
  }
  // Rounding can push the value a few ulps past the analytic bounds.
  return std::clamp(vs, 1.0, n);
}

DiversityResult cultural_diversity(Collection items, const KernelConfig& cfg) {
  std::vector<double> qualities;
  qualities.reserve(items.size());
  for (const auto& it : items) qualities.push_back(it.quality);
  return cultural_diversity(items, cfg, qualities);
}

DiversityResult cultural_diversity(Collection items, const KernelConfig& cfg,
                                   std::span<const double> qualities) {
  if (items.empty()) throw InputError("cultural diversity of an empty collection");
  if (qualities.size() != items.size()) {
    throw InputError("got " + std::to_string(qualities.size()) + " quality scores for " +
                     std::to_string(items.size()) + " items");
  }
  for (double s : qualities) {
    if (!(s >= 0.0 && s <= 1.0)) throw InputError("quality score outside [0, 1]");
  }

  DiversityResult r;
  r.n = items.size();
  r.order_q = cfg.q();
  r.vs = vendi_score(normalized_spectrum(build_kernel_matrix(items, cfg)), cfg.q());
  r.mean_quality =
      std::accumulate(qualities.begin(), qualities.end(), 0.0) / static_cast<double>(r.n);
  r.qvs = r.mean_quality * r.vs;
  r.cd = r.qvs / static_cast<double>(r.n);
  return r;
}

double partition_vendi_oracle(std::span<const std::string> labels) {
  if (labels.empty()) throw InputError("partition oracle needs at least one label");
  std::map<std::string, std::size_t> blocks;
  for (const auto& l : labels) ++blocks[l];
  const auto n = static_cast<double>(labels.size());
  double h = 0.0;
  for (const auto& [label, count] : blocks) {
    const double p = static_cast<double>(count) / n;
    h -= p * std::log(p);
  }
  return std::exp(h);
}

}  // namespace cubekit
