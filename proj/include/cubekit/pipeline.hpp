#pragma once

#include <filesystem>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "cubekit/concept.hpp"
#include "cubekit/kernels.hpp"
#include "cubekit/transport.hpp"
#include "cubekit/vendi.hpp"

namespace cubekit {

// ---------------------------------------------------------------------------
// Evaluation plan
// ---------------------------------------------------------------------------

struct EvalPlan {
  Concept concept_kind = Concept::Cuisine;
  std::optional<std::string> culture;  // absent: global mode
  std::vector<std::string> templates;
  int seed_batches = 10;
  int batch_size = 8;
  long long start_seed = 0;

  std::size_t template_count() const { return templates.size(); }
  std::size_t images_per_template() const {
    return static_cast<std::size_t>(seed_batches) * static_cast<std::size_t>(batch_size);
  }
  std::size_t total_images() const { return template_count() * images_per_template(); }
  std::size_t repetitions() const {
    return template_count() * static_cast<std::size_t>(seed_batches);
  }
  /// Batch index of a seed; nullopt when the seed lies outside the plan.
  std::optional<int> batch_of(long long seed) const;
};

struct PlanOverrides {
  std::optional<int> template_count;  // use the first N default templates
  std::optional<std::vector<std::string>> templates;
  std::optional<int> seed_batches;
  std::optional<int> batch_size;
  std::optional<long long> start_seed;
};

/// Five under-specified prompt variants for a concept, naming the culture
/// when one is given.
std::vector<std::string> default_templates(Concept concept_kind,
                                           const std::optional<std::string>& culture);

/// Throws ConfigError for batch_size < 2, seed_batches < 1 or no templates,
/// and InputError for an unknown culture code.
EvalPlan build_eval_plan(Concept concept_kind, const std::optional<std::string>& culture = std::nullopt,
                         const PlanOverrides& overrides = {});

struct PlannedImage {
  std::string image_id;  // "t<template>-s<seed>"
  int template_index = 0;
  long long seed = 0;
  std::string prompt;
};

/// Every (template, seed) pair of the plan, template-major.
std::vector<PlannedImage> planned_images(const EvalPlan& plan);

Json to_json(const EvalPlan& plan);

// ---------------------------------------------------------------------------
// Image -> artifact mapping
// ---------------------------------------------------------------------------

struct Candidate {
  std::string artifact_id;
  std::string label;
};

/// Vision-language judge used for concept adherence, country attribution,
/// final candidate selection and within-culture faithfulness.
class MapperClient {
 public:
  virtual ~MapperClient() = default;
  virtual bool concept_check(const std::string& image_id, Concept concept_kind) = 0;
  virtual std::optional<std::string> attribute_country(const std::string& image_id,
                                                       Concept concept_kind) = 0;
  virtual std::optional<std::string> select(const std::string& image_id,
                                            const std::vector<Candidate>& candidates) = 0;
  virtual bool faithful(const std::string& image_id, Concept concept_kind,
                        const std::string& culture) = 0;
};

/// Image-to-image retrieval over the reference artifact images of one country.
class RetrieverClient {
 public:
  virtual ~RetrieverClient() = default;
  virtual std::vector<Candidate> top_k(const std::string& image_id, Concept concept_kind,
                                       const std::string& country, int k) = 0;
};

inline constexpr int kRetrievalCandidates = 5;

enum class MapStage { Concept, Country, Retrieval, Selection };
std::string_view to_string(MapStage s);

struct Unmappable {
  std::string image_id;
  MapStage stage = MapStage::Concept;
};

using MapOutcome = std::variant<MappedItem, Unmappable>;

struct ImageRef {
  std::string image_id;
  int template_index = 0;
  long long seed = 0;
};

/// Concept check, country attribution, top-5 retrieval for that country,
/// then selection of one candidate. Any stage without an answer yields
/// Unmappable tagged with the stage. Transport errors propagate.
MapOutcome map_image(const ImageRef& image, Concept concept_kind, MapperClient& mapper,
                     RetrieverClient& retriever);

/// Maps many images with bounded parallelism; results keep input order.
std::vector<MapOutcome> map_images(const std::vector<ImageRef>& images, Concept concept_kind,
                                   MapperClient& mapper, RetrieverClient& retriever,
                                   std::size_t parallelism = 4);

struct FilterResult {
  std::vector<MappedItem> kept;
  std::size_t removed = 0;
};

/// Drops items the VQA judge finds unfaithful to `culture`.
FilterResult within_culture_filter(const std::vector<MappedItem>& items, Concept concept_kind,
                                   const std::string& culture, MapperClient& vqa,
                                   std::size_t parallelism = 4);

/// JSON-over-transport adapters. Requests (all carry "image"):
///   {"op":"concept_check","concept":C}             -> {"verdict":bool}
///   {"op":"attribute_country","concept":C}         -> {"country":"FR"|null}
///   {"op":"select","candidates":[ids]}             -> {"artifact_id":id|null}
///   {"op":"faithful","concept":C,"culture":"JP"}   -> {"verdict":bool}
///   {"op":"retrieve","concept":C,"country":"FR","k":5}
///                                  -> {"candidates":[{"artifact_id":..,"label":..}]}
class JsonMapperClient : public MapperClient {
 public:
  explicit JsonMapperClient(std::shared_ptr<Transport> t) : t_(std::move(t)) {}
  bool concept_check(const std::string& image_id, Concept concept_kind) override;
  std::optional<std::string> attribute_country(const std::string& image_id,
                                               Concept concept_kind) override;
  std::optional<std::string> select(const std::string& image_id,
                                    const std::vector<Candidate>& candidates) override;
  bool faithful(const std::string& image_id, Concept concept_kind, const std::string& culture) override;

 private:
  std::shared_ptr<Transport> t_;
};

class JsonRetrieverClient : public RetrieverClient {
 public:
  explicit JsonRetrieverClient(std::shared_ptr<Transport> t) : t_(std::move(t)) {}
  std::vector<Candidate> top_k(const std::string& image_id, Concept concept_kind,
                               const std::string& country, int k) override;

 private:
  std::shared_ptr<Transport> t_;
};

// ---------------------------------------------------------------------------
// Quality scores
// ---------------------------------------------------------------------------

class QualityProvider {
 public:
  /// Reads `image_id,score` CSV; scores outside [0, 1] are rejected.
  static QualityProvider from_csv(std::istream& in);
  static QualityProvider from_file(const std::filesystem::path& path);
  /// Every image scores 1 (within-culture runs).
  static QualityProvider uniform();

  /// Throws InputError naming the id when it has no score.
  double operator()(const std::string& image_id) const;
  bool is_uniform() const { return uniform_; }
  std::size_t size() const { return scores_.size(); }

 private:
  std::unordered_map<std::string, double> scores_;
  bool uniform_ = false;
};

// ---------------------------------------------------------------------------
// Scoring and aggregation
// ---------------------------------------------------------------------------

/// Reads the mapped-items file (CSV or JSON Lines, detected by the first
/// non-blank character). Columns: image_id, template_index, seed, continent,
/// country, artifact_id. Quality is left at 1.
std::vector<MappedItem> read_mapped_items(std::istream& in);
std::vector<MappedItem> read_mapped_items_file(const std::filesystem::path& path);
std::string mapped_items_to_csv(const std::vector<MappedItem>& items);

struct BatchScore {
  int template_index = 0;
  int batch_index = 0;
  std::size_t config_index = 0;
  std::optional<DiversityResult> result;  // empty when the batch is excluded
  std::size_t excluded_count = 0;         // planned images missing from the batch

  bool excluded() const { return !result.has_value(); }
};

/// Minimum surviving images for a batch to be scored.
inline constexpr std::size_t kMinBatchItems = 2;

/// One score per (template, batch, config), ordered by template, batch,
/// config. Qualities are looked up after filtering. Batches with fewer than
/// two items are reported as excluded, not scored. Throws InputError for
/// items outside the plan, duplicates, or missing quality scores.
std::vector<BatchScore> score_batches(const EvalPlan& plan, const std::vector<MappedItem>& mapped,
                                      const std::vector<KernelConfig>& configs,
                                      const QualityProvider& quality);

struct ConfigAggregate {
  explicit ConfigAggregate(KernelConfig c) : config(std::move(c)) {}

  KernelConfig config;
  std::optional<double> mean_quality;
  std::optional<double> mean_vs_bar;  // mean of vs / n
  std::optional<double> mean_cd;      // mean of per-batch cd
  std::optional<double> std_cd;       // population std of per-batch cd
  std::optional<double> product_of_means;  // mean_quality * mean_vs_bar
  std::size_t repetitions = 0;             // scored batches
  std::size_t excluded_batches = 0;
};

struct AggregateReport {
  std::vector<ConfigAggregate> configs;
  std::map<std::string, double> country_frequency;
  Json provenance = Json::object();
};

/// Per-config means over scored batches, plus the normalized country
/// frequency of every mapped item.
AggregateReport aggregate(const std::vector<BatchScore>& scores,
                          const std::vector<KernelConfig>& configs,
                          const std::vector<MappedItem>& mapped);

/// Full-precision JSON. Key order is fixed, so identical inputs give
/// byte-identical output.
Json to_json(const AggregateReport& report);
/// Two-decimal table: one quality row, then VS-bar and CD rows per kernel.
std::string report_table_csv(const AggregateReport& report);
/// country, name, continent, frequency; sorted by descending frequency.
std::string country_frequency_csv(const AggregateReport& report);

/// "(1, 0, 0)"-style weight label, using fractions for 1/2 and 1/3.
std::string weight_label(const KernelConfig& cfg);

}  // namespace cubekit
