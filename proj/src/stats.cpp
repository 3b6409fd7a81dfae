#include "cubekit/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <tuple>

#include "cubekit/error.hpp"
#include "cubekit/io.hpp"

namespace cubekit::stats {

std::string_view to_string(Question q) {
  switch (q) {
    case Question::Relevance: return "relevance";
    case Question::Faithfulness: return "faithfulness";
    case Question::Realism: return "realism";
  }
  return "?";
}

std::optional<Question> parse_question(std::string_view s) {
  const auto l = io::to_lower(io::trim(s));
  if (l == "relevance") return Question::Relevance;
  if (l == "faithfulness") return Question::Faithfulness;
  if (l == "realism") return Question::Realism;
  return std::nullopt;
}

std::optional<Relevance> parse_relevance(std::string_view s) {
  const auto l = io::to_lower(io::trim(s));
  if (l == "yes" || l == "y") return Relevance::Yes;
  if (l == "maybe" || l == "m") return Relevance::Maybe;
  if (l == "no" || l == "n") return Relevance::No;
  return std::nullopt;
}

std::size_t RatingTriple::present() const {
  return static_cast<std::size_t>(
      std::count_if(ratings.begin(), ratings.end(), [](const auto& r) { return r.has_value(); }));
}

std::vector<RatingTriple> read_ratings(std::istream& in) {
  const auto t = io::read_csv(in);
  if (t.header.empty()) return {};
  const auto c_item = t.require("item_id"), c_q = t.require("question"),
             c_rater = t.require("rater_index"), c_value = t.require("value");
  const auto c_group = t.column("group");

  using Key = std::tuple<std::string, std::string, Question>;  // group, item, question
  std::map<Key, RatingTriple> triples;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const auto where = "ratings line " + std::to_string(t.lines[r]);
    const auto q = parse_question(row[c_q]);
    if (!q) throw InputError(where + ": unknown question '" + row[c_q] + "'");
    const auto rater = io::parse_int(row[c_rater], where);
    if (rater < 0 || rater > 2) throw InputError(where + ": rater_index must be 0, 1 or 2");

    int value = 0;
    if (*q == Question::Relevance) {
      const auto rel = parse_relevance(row[c_value]);
      if (!rel) throw InputError(where + ": relevance must be Yes, Maybe or No");
      value = static_cast<int>(*rel);
    } else {
      value = static_cast<int>(io::parse_int(row[c_value], where));
      if (value < kLikertMin || value > kLikertMax) {
        throw InputError(where + ": rating " + std::to_string(value) + " outside 1..5");
      }
    }

    const auto group = c_group ? io::trim(row[*c_group]) : std::string();
    const auto item = io::trim(row[c_item]);
    auto& triple = triples[{group, item, *q}];
    triple.item_id = item;
    triple.question = *q;
    triple.group = group;
    auto& slot = triple.ratings[static_cast<std::size_t>(rater)];
    if (slot) throw InputError(where + ": rater " + std::to_string(rater) + " rated twice");
    slot = value;
  }
  std::vector<RatingTriple> out;
  out.reserve(triples.size());
  for (auto& [k, v] : triples) out.push_back(std::move(v));
  return out;
}

Consensus consensus_score(std::span<const RatingTriple> triples) {
  Consensus c;
  std::vector<double> means;
  for (const auto& t : triples) {
    double sum = 0;
    std::size_t n = 0;
    for (const auto& r : t.ratings) {
      if (r) {
        sum += *r;
        ++n;
      }
    }
    if (n == 0) {
      ++c.excluded_items;
      continue;
    }
    means.push_back(sum / static_cast<double>(n));
  }
  if (means.empty()) throw UndefinedStatistic("no rated items for a consensus score");
  c.items = means.size();
  c.mean = std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(c.items);
  double var = 0;
  for (double m : means) var += (m - c.mean) * (m - c.mean);
  c.std = std::sqrt(var / static_cast<double>(c.items));
  return c;
}

double majority_agreement(std::span<const RatingTriple> triples) {
  if (triples.empty()) throw UndefinedStatistic("no items for majority agreement");
  std::size_t agreed = 0;
  for (const auto& t : triples) {
    const auto& r = t.ratings;
    const bool majority = (r[0] && r[0] == r[1]) || (r[0] && r[0] == r[2]) || (r[1] && r[1] == r[2]);
    if (majority) ++agreed;
  }
  return 100.0 * static_cast<double>(agreed) / static_cast<double>(triples.size());
}

double krippendorff_alpha_ordinal(std::span<const std::vector<int>> units) {
  // Categories are the distinct pairable values in rank order.
  std::vector<int> categories;
  for (const auto& u : units) {
    if (u.size() >= 2) categories.insert(categories.end(), u.begin(), u.end());
  }
  if (categories.empty()) throw UndefinedStatistic("no pairable values for Krippendorff's alpha");
  std::sort(categories.begin(), categories.end());
  categories.erase(std::unique(categories.begin(), categories.end()), categories.end());
  const std::size_t k = categories.size();
  auto index_of = [&](int v) {
    return static_cast<std::size_t>(std::lower_bound(categories.begin(), categories.end(), v) -
                                    categories.begin());
  };

  // Coincidence matrix.
  std::vector<double> o(k * k, 0.0);
  std::vector<double> counts(k);
  for (const auto& u : units) {
    if (u.size() < 2) continue;
    std::fill(counts.begin(), counts.end(), 0.0);
    for (int v : u) counts[index_of(v)] += 1.0;
    const double scale = 1.0 / static_cast<double>(u.size() - 1);
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      for (std::size_t d = 0; d < k; ++d) {
        const double pairs = counts[c] * (counts[d] - (c == d ? 1.0 : 0.0));
        o[c * k + d] += pairs * scale;
      }
    }
  }
  std::vector<double> marginal(k, 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t d = 0; d < k; ++d) marginal[c] += o[c * k + d];
  }
  const double n = std::accumulate(marginal.begin(), marginal.end(), 0.0);

  // Ordinal metric: delta(c, d) = (sum_{g=c..d} n_g - (n_c + n_d) / 2)^2.
  std::vector<double> cumulative(k + 1, 0.0);
  for (std::size_t c = 0; c < k; ++c) cumulative[c + 1] = cumulative[c] + marginal[c];
  auto delta2 = [&](std::size_t c, std::size_t d) {
    if (c > d) std::swap(c, d);
    const double v = cumulative[d + 1] - cumulative[c] - (marginal[c] + marginal[d]) / 2.0;
    return c == d ? 0.0 : v * v;
  };

  double observed = 0.0, expected = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t d = 0; d < k; ++d) {
      const double w = delta2(c, d);
      observed += o[c * k + d] * w;
      expected += marginal[c] * marginal[d] * w;
    }
  }
  if (expected == 0.0) {
    throw UndefinedStatistic("Krippendorff's alpha undefined: no variation in pairable values");
  }
  return 1.0 - (n - 1.0) * observed / expected;
}

double krippendorff_alpha_ordinal(std::span<const RatingTriple> triples) {
  std::vector<std::vector<int>> units;
  units.reserve(triples.size());
  for (const auto& t : triples) {
    std::vector<int> u;
    for (const auto& r : t.ratings) {
      if (r) u.push_back(*r);
    }
    units.push_back(std::move(u));
  }
  return krippendorff_alpha_ordinal(units);
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InputError("correlation series differ in length");
  if (x.size() < 2) throw InputError("correlation needs at least two values");
  const auto n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw UndefinedStatistic("correlation undefined: zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double pearson(const MetricSeries& x, const MetricSeries& y) {
  std::map<std::string, double> ym(y.values.begin(), y.values.end());
  if (ym.size() != y.values.size() || x.values.size() != y.values.size()) {
    throw InputError("series '" + x.label + "' and '" + y.label + "' cover different groups");
  }
  std::vector<double> xs, ys;
  for (const auto& [key, v] : x.values) {
    auto it = ym.find(key);
    if (it == ym.end()) {
      throw InputError("series '" + y.label + "' has no value for group '" + key + "'");
    }
    xs.push_back(v);
    ys.push_back(it->second);
  }
  return pearson(xs, ys);
}

std::vector<MetricSeries> read_series(std::istream& in) {
  const auto t = io::read_csv(in);
  if (t.header.empty()) return {};
  const auto c_metric = t.require("metric"), c_group = t.require("group"),
             c_value = t.require("value");
  std::map<std::string, MetricSeries> series;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto where = "series line " + std::to_string(t.lines[r]);
    const auto label = io::trim(t.rows[r][c_metric]);
    auto& s = series[label];
    s.label = label;
    s.values.emplace_back(io::trim(t.rows[r][c_group]), io::parse_double(t.rows[r][c_value], where));
  }
  std::vector<MetricSeries> out;
  for (auto& [k, v] : series) out.push_back(std::move(v));
  return out;
}

}  // namespace cubekit::stats
