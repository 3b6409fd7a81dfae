#include "cubekit/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include "cubekit/error.hpp"
#include "cubekit/io.hpp"
#include "cubekit/parallel.hpp"

namespace cubekit {

// ---------------------------------------------------------------------------
// Plan
// ---------------------------------------------------------------------------

std::optional<int> EvalPlan::batch_of(long long seed) const {
  const long long offset = seed - start_seed;
  if (offset < 0 || offset >= static_cast<long long>(images_per_template())) return std::nullopt;
  return static_cast<int>(offset / batch_size);
}

std::vector<std::string> default_templates(Concept concept_kind,
                                           const std::optional<std::string>& culture) {
  if (!culture) {
    switch (concept_kind) {
      case Concept::Cuisine:
        return {"Image of a dish", "Image of a traditional dish", "A photo of a popular dish",
                "A picture of a famous dish", "Image of food from a cuisine"};
      case Concept::Landmarks:
        return {"Image of landmarks", "Image of a tourist spot", "Image of monuments",
                "A photo of a famous landmark", "A picture of a popular tourist attraction"};
      case Concept::Art:
        return {"Image of traditional clothing", "Image of a traditional art form",
                "Image of a traditional painting style", "A photo of a folk performance",
                "A picture of cultural art"};
    }
  }
  const auto& c = CountryTable::instance().at(*culture).name;
  switch (concept_kind) {
    case Concept::Cuisine:
      return {"Image of a dish from " + c + " cuisine", "Image of a traditional dish from " + c,
              "A photo of a popular dish from " + c, "A picture of a famous dish from " + c,
              "Image of food from " + c + " cuisine"};
    case Concept::Landmarks:
      return {"Image of landmarks in " + c, "Image of a tourist spot in " + c,
              "Image of monuments in " + c, "A photo of a famous landmark in " + c,
              "A picture of a popular tourist attraction in " + c};
    case Concept::Art:
      return {"Image of traditional clothing from " + c, "Image of a traditional art form from " + c,
              "Image of a traditional painting style from " + c,
              "A photo of a folk performance from " + c, "A picture of cultural art from " + c};
  }
  return {};
}

EvalPlan build_eval_plan(Concept concept_kind, const std::optional<std::string>& culture,
                         const PlanOverrides& overrides) {
  if (culture) CountryTable::instance().at(*culture);
  EvalPlan plan;
  plan.concept_kind = concept_kind;
  plan.culture = culture;
  plan.templates = overrides.templates ? *overrides.templates : default_templates(concept_kind, culture);
  if (overrides.template_count) {
    const int n = *overrides.template_count;
    if (n < 1 || n > static_cast<int>(plan.templates.size())) {
      throw ConfigError("template count must be between 1 and " +
                        std::to_string(plan.templates.size()));
    }
    plan.templates.resize(static_cast<std::size_t>(n));
  }
  if (plan.templates.empty()) throw ConfigError("evaluation plan needs at least one template");
  plan.seed_batches = overrides.seed_batches.value_or(plan.seed_batches);
  plan.batch_size = overrides.batch_size.value_or(plan.batch_size);
  plan.start_seed = overrides.start_seed.value_or(plan.start_seed);
  if (plan.batch_size < 2) throw ConfigError("batch size must be at least 2");
  if (plan.seed_batches < 1) throw ConfigError("need at least one seed batch");
  return plan;
}

std::vector<PlannedImage> planned_images(const EvalPlan& plan) {
  std::vector<PlannedImage> out;
  out.reserve(plan.total_images());
  for (std::size_t t = 0; t < plan.templates.size(); ++t) {
    for (std::size_t i = 0; i < plan.images_per_template(); ++i) {
      const long long seed = plan.start_seed + static_cast<long long>(i);
      out.push_back({"t" + std::to_string(t) + "-s" + std::to_string(seed), static_cast<int>(t),
                     seed, plan.templates[t]});
    }
  }
  return out;
}

Json to_json(const EvalPlan& plan) {
  return {{"concept", std::string(to_string(plan.concept_kind))},
          {"culture", plan.culture ? Json(*plan.culture) : Json()},
          {"templates", plan.templates},
          {"seed_batches", plan.seed_batches},
          {"batch_size", plan.batch_size},
          {"start_seed", plan.start_seed}};
}

// ---------------------------------------------------------------------------
// Mapping
// ---------------------------------------------------------------------------

std::string_view to_string(MapStage s) {
  switch (s) {
    case MapStage::Concept: return "concept";
    case MapStage::Country: return "country";
    case MapStage::Retrieval: return "retrieval";
    case MapStage::Selection: return "selection";
  }
  return "?";
}

MapOutcome map_image(const ImageRef& image, Concept concept_kind, MapperClient& mapper,
                     RetrieverClient& retriever) {
  const auto& id = image.image_id;
  if (!mapper.concept_check(id, concept_kind)) return Unmappable{id, MapStage::Concept};

  const auto country = mapper.attribute_country(id, concept_kind);
  const auto* info = country ? CountryTable::instance().find(*country) : nullptr;
  if (!info) return Unmappable{id, MapStage::Country};

  auto candidates = retriever.top_k(id, concept_kind, info->alpha2, kRetrievalCandidates);
  if (candidates.size() > kRetrievalCandidates) candidates.resize(kRetrievalCandidates);
  if (candidates.empty()) return Unmappable{id, MapStage::Retrieval};

  const auto chosen = mapper.select(id, candidates);
  const bool valid = chosen && std::any_of(candidates.begin(), candidates.end(),
                                           [&](const Candidate& c) { return c.artifact_id == *chosen; });
  if (!valid) return Unmappable{id, MapStage::Selection};

  MappedItem item;
  item.image_id = id;
  item.template_index = image.template_index;
  item.seed = image.seed;
  item.continent = info->continent;
  item.country = info->alpha2;
  item.artifact_id = *chosen;
  return item;
}

std::vector<MapOutcome> map_images(const std::vector<ImageRef>& images, Concept concept_kind,
                                   MapperClient& mapper, RetrieverClient& retriever,
                                   std::size_t parallelism) {
  std::vector<MapOutcome> out(images.size());
  bounded_parallel_for(images.size(), parallelism, [&](std::size_t i) {
    out[i] = map_image(images[i], concept_kind, mapper, retriever);
  });
  return out;
}

FilterResult within_culture_filter(const std::vector<MappedItem>& items, Concept concept_kind,
                                   const std::string& culture, MapperClient& vqa,
                                   std::size_t parallelism) {
  std::vector<char> keep(items.size(), 0);
  bounded_parallel_for(items.size(), parallelism, [&](std::size_t i) {
    keep[i] = vqa.faithful(items[i].image_id, concept_kind, culture) ? 1 : 0;
  });
  FilterResult r;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (keep[i]) {
      r.kept.push_back(items[i]);
    } else {
      ++r.removed;
    }
  }
  return r;
}

namespace {

bool verdict(const Json& res, const char* op) {
  auto it = res.find("verdict");
  if (it == res.end() || !it->is_boolean()) {
    throw TransportError(std::string(op) + " response lacks boolean 'verdict'");
  }
  return it->get<bool>();
}

std::optional<std::string> optional_string(const Json& res, const char* key, const char* op) {
  auto it = res.find(key);
  if (it == res.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw TransportError(std::string(op) + " response '" + key + "' not a string");
  return it->get<std::string>();
}

}  // namespace

bool JsonMapperClient::concept_check(const std::string& image_id, Concept concept_kind) {
  return verdict(t_->call({{"op", "concept_check"},
                           {"image", image_id},
                           {"concept", std::string(to_string(concept_kind))}}),
                 "concept_check");
}

std::optional<std::string> JsonMapperClient::attribute_country(const std::string& image_id,
                                                               Concept concept_kind) {
  return optional_string(t_->call({{"op", "attribute_country"},
                                   {"image", image_id},
                                   {"concept", std::string(to_string(concept_kind))}}),
                         "country", "attribute_country");
}

std::optional<std::string> JsonMapperClient::select(const std::string& image_id,
                                                    const std::vector<Candidate>& candidates) {
  Json ids = Json::array();
  for (const auto& c : candidates) ids.push_back(c.artifact_id);
  return optional_string(t_->call({{"op", "select"}, {"image", image_id}, {"candidates", ids}}),
                         "artifact_id", "select");
}

bool JsonMapperClient::faithful(const std::string& image_id, Concept concept_kind,
                                const std::string& culture) {
  return verdict(t_->call({{"op", "faithful"},
                           {"image", image_id},
                           {"concept", std::string(to_string(concept_kind))},
                           {"culture", culture}}),
                 "faithful");
}

std::vector<Candidate> JsonRetrieverClient::top_k(const std::string& image_id, Concept concept_kind,
                                                  const std::string& country, int k) {
  const auto res = t_->call({{"op", "retrieve"},
                             {"image", image_id},
                             {"concept", std::string(to_string(concept_kind))},
                             {"country", country},
                             {"k", k}});
  std::vector<Candidate> out;
  try {
    for (const auto& c : res.at("candidates")) {
      out.push_back({c.at("artifact_id").get<std::string>(), c.value("label", std::string())});
    }
  } catch (const Json::exception& e) {
    throw TransportError(std::string("retrieve response malformed: ") + e.what());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Quality
// ---------------------------------------------------------------------------

QualityProvider QualityProvider::from_csv(std::istream& in) {
  const auto t = io::read_csv(in);
  QualityProvider p;
  if (t.header.empty()) return p;
  const auto c_id = t.require("image_id");
  const auto c_score = t.require("score");
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto where = "quality line " + std::to_string(t.lines[r]);
    const auto id = io::trim(t.rows[r][c_id]);
    const double s = io::parse_double(t.rows[r][c_score], where);
    if (!(s >= 0.0 && s <= 1.0)) {
      throw InputError(where + ": score " + io::trim(t.rows[r][c_score]) + " outside [0, 1]");
    }
    if (!p.scores_.emplace(id, s).second) throw InputError(where + ": duplicate image_id " + id);
  }
  return p;
}

QualityProvider QualityProvider::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open quality file " + path.string());
  return from_csv(in);
}

QualityProvider QualityProvider::uniform() {
  QualityProvider p;
  p.uniform_ = true;
  return p;
}

double QualityProvider::operator()(const std::string& image_id) const {
  if (uniform_) return 1.0;
  auto it = scores_.find(image_id);
  if (it == scores_.end()) throw InputError("no quality score for image '" + image_id + "'");
  return it->second;
}

// ---------------------------------------------------------------------------
// Mapped items
// ---------------------------------------------------------------------------

namespace {

MappedItem make_item(const std::string& where, std::string image_id, long long template_index,
                     long long seed, const std::string& continent, std::string country,
                     std::string artifact_id) {
  MappedItem m;
  m.image_id = std::move(image_id);
  if (m.image_id.empty()) throw InputError(where + ": empty image_id");
  m.template_index = static_cast<int>(template_index);
  m.seed = seed;
  const auto* info = CountryTable::instance().find(country);
  if (!info) throw InputError(where + ": unknown country '" + country + "'");
  m.country = std::move(country);
  m.continent = info->continent;
  if (!continent.empty() && parse_continent(continent) != info->continent) {
    throw InputError(where + ": continent '" + continent + "' inconsistent with country " +
                     m.country);
  }
  m.artifact_id = std::move(artifact_id);
  if (m.artifact_id.empty()) throw InputError(where + ": empty artifact_id");
  return m;
}

}  // namespace

std::vector<MappedItem> read_mapped_items(std::istream& in) {
  std::vector<MappedItem> out;
  char first = 0;
  while (in.get(first) && std::isspace(static_cast<unsigned char>(first))) {
  }
  if (!in) return out;
  in.unget();

  if (first == '{') {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      const auto where = "mapped-items line " + std::to_string(line_no);
      try {
        const auto j = Json::parse(line);
        out.push_back(make_item(where, j.at("image_id").get<std::string>(),
                                j.at("template_index").get<long long>(),
                                j.at("seed").get<long long>(), j.value("continent", std::string()),
                                j.at("country").get<std::string>(),
                                j.at("artifact_id").get<std::string>()));
      } catch (const Json::exception& e) {
        throw InputError(where + ": " + e.what());
      }
    }
    return out;
  }

  const auto t = io::read_csv(in);
  const auto c_id = t.require("image_id"), c_t = t.require("template_index"),
             c_seed = t.require("seed"), c_country = t.require("country"),
             c_art = t.require("artifact_id");
  const auto c_cont = t.column("continent");
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const auto where = "mapped-items line " + std::to_string(t.lines[r]);
    out.push_back(make_item(where, io::trim(row[c_id]), io::parse_int(row[c_t], where),
                            io::parse_int(row[c_seed], where),
                            c_cont ? io::trim(row[*c_cont]) : std::string(),
                            io::trim(row[c_country]), io::trim(row[c_art])));
  }
  return out;
}

std::vector<MappedItem> read_mapped_items_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open mapped-items file " + path.string());
  try {
    return read_mapped_items(in);
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

std::string mapped_items_to_csv(const std::vector<MappedItem>& items) {
  std::string out =
      io::csv_line({"image_id", "template_index", "seed", "continent", "country", "artifact_id"});
  for (const auto& m : items) {
    out += io::csv_line({m.image_id, std::to_string(m.template_index), std::to_string(m.seed),
                         std::string(to_string(m.continent)), m.country, m.artifact_id});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scoring
// ---------------------------------------------------------------------------

std::vector<BatchScore> score_batches(const EvalPlan& plan, const std::vector<MappedItem>& mapped,
                                      const std::vector<KernelConfig>& configs,
                                      const QualityProvider& quality) {
  if (configs.empty()) throw ConfigError("no kernel configurations to score");
  const int templates = static_cast<int>(plan.template_count());
  std::map<std::pair<int, int>, std::vector<MappedItem>> batches;
  std::set<std::pair<int, long long>> seen;
  for (const auto& m : mapped) {
    if (m.template_index < 0 || m.template_index >= templates) {
      throw InputError("image '" + m.image_id + "' has template_index " +
                       std::to_string(m.template_index) + " outside the plan");
    }
    const auto batch = plan.batch_of(m.seed);
    if (!batch) {
      throw InputError("image '" + m.image_id + "' has seed " + std::to_string(m.seed) +
                       " outside the plan");
    }
    if (!seen.emplace(m.template_index, m.seed).second) {
      throw InputError("image '" + m.image_id + "' duplicates template " +
                       std::to_string(m.template_index) + " seed " + std::to_string(m.seed));
    }
    MappedItem item = m;
    item.quality = quality(m.image_id);
    batches[{m.template_index, *batch}].push_back(std::move(item));
  }

  std::vector<BatchScore> out;
  out.reserve(plan.repetitions() * configs.size());
  const auto batch_size = static_cast<std::size_t>(plan.batch_size);
  for (int t = 0; t < templates; ++t) {
    for (int b = 0; b < plan.seed_batches; ++b) {
      auto it = batches.find({t, b});
      std::vector<MappedItem> items = it == batches.end() ? std::vector<MappedItem>{} : it->second;
      std::sort(items.begin(), items.end(),
                [](const MappedItem& x, const MappedItem& y) { return x.seed < y.seed; });
      for (std::size_t c = 0; c < configs.size(); ++c) {
        BatchScore s;
        s.template_index = t;
        s.batch_index = b;
        s.config_index = c;
        s.excluded_count = batch_size - items.size();
        if (items.size() >= kMinBatchItems) s.result = cultural_diversity(items, configs[c]);
        out.push_back(std::move(s));
      }
    }
  }
  return out;
}

AggregateReport aggregate(const std::vector<BatchScore>& scores,
                          const std::vector<KernelConfig>& configs,
                          const std::vector<MappedItem>& mapped) {
  if (scores.empty()) throw InputError("nothing to aggregate");
  AggregateReport report;
  for (std::size_t c = 0; c < configs.size(); ++c) {
    ConfigAggregate agg(configs[c]);
    double sum_q = 0, sum_vs = 0, sum_cd = 0;
    std::vector<double> cds;
    for (const auto& s : scores) {
      if (s.config_index != c) continue;
      if (s.excluded()) {
        ++agg.excluded_batches;
        continue;
      }
      sum_q += s.result->mean_quality;
      sum_vs += s.result->vs / static_cast<double>(s.result->n);
      sum_cd += s.result->cd;
      cds.push_back(s.result->cd);
    }
    agg.repetitions = cds.size();
    if (!cds.empty()) {
      const auto n = static_cast<double>(cds.size());
      agg.mean_quality = sum_q / n;
      agg.mean_vs_bar = sum_vs / n;
      agg.mean_cd = sum_cd / n;
      double var = 0;
      for (double v : cds) var += (v - *agg.mean_cd) * (v - *agg.mean_cd);
      agg.std_cd = std::sqrt(var / n);
      agg.product_of_means = *agg.mean_quality * *agg.mean_vs_bar;
    }
    report.configs.push_back(std::move(agg));
  }

  std::map<std::string, std::size_t> counts;
  for (const auto& m : mapped) ++counts[m.country];
  for (const auto& [country, n] : counts) {
    report.country_frequency[country] =
        static_cast<double>(n) / static_cast<double>(mapped.size());
  }
  return report;
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

namespace {

Json opt(const std::optional<double>& v) { return v ? Json(*v) : Json(); }

std::string fixed2(const std::optional<double>& v) {
  if (!v) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", *v);
  return buf;
}

std::string weight_text(double w) {
  if (w == 0.0) return "0";
  if (w == 1.0) return "1";
  if (std::abs(w - 0.5) < 1e-12) return "1/2";
  if (std::abs(w - 1.0 / 3.0) < 1e-12) return "1/3";
  std::ostringstream ss;
  ss << w;
  return ss.str();
}

}  // namespace

std::string weight_label(const KernelConfig& cfg) {
  return "(" + weight_text(cfg.w1()) + ", " + weight_text(cfg.w2()) + ", " +
         weight_text(cfg.w3()) + ")";
}

Json to_json(const AggregateReport& report) {
  Json configs = Json::array();
  for (const auto& a : report.configs) {
    configs.push_back({{"preset", a.config.name().empty() ? Json() : Json(a.config.name())},
                       {"w1", a.config.w1()},
                       {"w2", a.config.w2()},
                       {"w3", a.config.w3()},
                       {"q", a.config.q()},
                       {"mean_quality", opt(a.mean_quality)},
                       {"mean_vs_bar", opt(a.mean_vs_bar)},
                       {"mean_cd", opt(a.mean_cd)},
                       {"std_cd", opt(a.std_cd)},
                       {"product_of_means", opt(a.product_of_means)},
                       {"repetitions", a.repetitions},
                       {"excluded_batches", a.excluded_batches}});
  }
  Json freq = Json::object();
  for (const auto& [c, f] : report.country_frequency) freq[c] = f;
  return {{"configs", configs}, {"country_frequency", freq}, {"provenance", report.provenance}};
}

std::string report_table_csv(const AggregateReport& report) {
  std::string out = io::csv_line({"metric", "kernel", "value"});
  if (!report.configs.empty()) {
    out += io::csv_line({"q", "", fixed2(report.configs.front().mean_quality)});
  }
  for (const auto& a : report.configs) {
    out += io::csv_line({"VS_bar", weight_label(a.config), fixed2(a.mean_vs_bar)});
  }
  for (const auto& a : report.configs) {
    out += io::csv_line({"CD", weight_label(a.config), fixed2(a.mean_cd)});
  }
  return out;
}

std::string country_frequency_csv(const AggregateReport& report) {
  std::vector<std::pair<std::string, double>> rows(report.country_frequency.begin(),
                                                   report.country_frequency.end());
  std::stable_sort(rows.begin(), rows.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::string out = io::csv_line({"country", "name", "continent", "frequency"});
  const auto& table = CountryTable::instance();
  for (const auto& [code, f] : rows) {
    const auto& info = table.at(code);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", f);
    out += io::csv_line({code, info.name, std::string(to_string(info.continent)), buf});
  }
  return out;
}

}  // namespace cubekit
