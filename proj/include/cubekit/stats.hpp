#pragma once

#include <array>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cubekit::stats {

enum class Question { Relevance, Faithfulness, Realism };
std::string_view to_string(Question q);
std::optional<Question> parse_question(std::string_view s);

/// Relevance answers, ordered only for storage; they are compared as categories.
enum class Relevance { No = 0, Maybe = 1, Yes = 2 };
std::optional<Relevance> parse_relevance(std::string_view s);

inline constexpr int kLikertMin = 1;
inline constexpr int kLikertMax = 5;

/// One item rated by (up to) three raters. Likert questions hold 1..5;
/// relevance holds the Relevance enum value.
struct RatingTriple {
  std::string item_id;
  Question question = Question::Faithfulness;
  std::array<std::optional<int>, 3> ratings;
  std::string group;  // e.g. rater location; empty when ungrouped

  std::size_t present() const;
};

/// Parses `item_id,question,rater_index,value[,group]`; rater_index is 0..2.
std::vector<RatingTriple> read_ratings(std::istream& in);

struct Consensus {
  double mean = 0.0;
  double std = 0.0;  // population std of per-item means
  std::size_t items = 0;
  std::size_t excluded_items = 0;  // no ratings present
};

/// Per-item mean over present ratings, then mean and population std across
/// items. Throws UndefinedStatistic when no item has a rating.
Consensus consensus_score(std::span<const RatingTriple> triples);

/// Percentage of items where at least two raters gave the same answer.
/// Missing ratings never match. Throws UndefinedStatistic on no items.
double majority_agreement(std::span<const RatingTriple> triples);

/// Ordinal Krippendorff's alpha over units of ratings (values are ordinal
/// ranks; any integers). Units with fewer than two values are not pairable.
/// Throws UndefinedStatistic without pairable values or expected disagreement.
double krippendorff_alpha_ordinal(std::span<const std::vector<int>> units);
double krippendorff_alpha_ordinal(std::span<const RatingTriple> triples);

/// Sample Pearson correlation. Throws InputError for mismatched or short
/// series and UndefinedStatistic when either has zero variance.
double pearson(std::span<const double> x, std::span<const double> y);

struct MetricSeries {
  std::string label;
  std::vector<std::pair<std::string, double>> values;  // (group key, value)
};

/// Pairs values by group key; the key sets must match.
double pearson(const MetricSeries& x, const MetricSeries& y);

/// Reads `metric,group,value` rows into one series per metric, sorted by label.
std::vector<MetricSeries> read_series(std::istream& in);

}  // namespace cubekit::stats
