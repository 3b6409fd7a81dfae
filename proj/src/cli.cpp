#include "cubekit/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "cubekit/error.hpp"
#include "cubekit/extraction.hpp"
#include "cubekit/io.hpp"
#include "cubekit/pipeline.hpp"
#include "cubekit/stats.hpp"

#ifndef CUBEKIT_DATA_DIR
#define CUBEKIT_DATA_DIR "data"
#endif

namespace cubekit::cli {

namespace fs = std::filesystem;

std::string data_dir() {
  if (const char* env = std::getenv("CUBEKIT_DATA_DIR")) return env;
  return CUBEKIT_DATA_DIR;
}

namespace {

std::string fmt(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

Concept require_concept(const std::string& s) {
  auto c = parse_concept(s);
  if (!c) throw InputError("unknown concept '" + s + "' (cuisine, landmarks, art)");
  return *c;
}

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw InputError(std::string("missing ") + what);
  if (!fs::is_regular_file(path)) throw InputError(std::string(what) + " not found: " + path);
}

// ---------------------------------------------------------------------------
// extract
// ---------------------------------------------------------------------------

struct ExtractArgs {
  std::string kb, roots, concept_kind, refine, popularity, out = ".";
  int hops = kDefaultMaxHops;
  bool lenient = false;
  std::size_t parallel = 4;
};

int cmd_extract(const ExtractArgs& a, std::ostream& out, std::ostream& err) {
  require_file(a.kb, "knowledge-base dump (--kb)");
  require_file(a.roots, "roots file (--roots)");
  auto root_sets = load_root_sets_file(a.roots);
  if (!a.concept_kind.empty()) {
    const auto c = require_concept(a.concept_kind);
    std::erase_if(root_sets, [&](const RootSet& s) { return s.concept_kind != c; });
    if (root_sets.empty()) throw InputError("roots file has no roots for " + a.concept_kind);
  }

  std::ifstream in(a.kb);
  if (!in) throw InputError("cannot open " + a.kb);
  ParseResult parsed;
  try {
    parsed = parse_kb_dump(in, a.lenient ? ParseMode::Lenient : ParseMode::Strict);
  } catch (const ParseError& e) {
    throw InputError(a.kb + ": " + e.what());
  }
  for (const auto& w : parsed.warnings) err << "warning: " << a.kb << ": " << w << '\n';

  std::vector<ArtifactRecord> records;
  for (const auto& set : root_sets) {
    auto found = extract_artifacts(parsed.graph, set, a.hops);
    if (!a.refine.empty()) {
      JsonRefinementClient client(make_transport(a.refine));
      found = refine_with_llm(found, set.concept_kind, client, a.parallel);
    }
    records.insert(records.end(), found.begin(), found.end());
  }

  const fs::path dir(a.out);
  io::write_file_atomic(dir / "artifacts.jsonl", artifacts_to_jsonl(records));
  io::write_file_atomic(dir / "artifacts.csv", artifacts_to_csv(records));

  if (!a.popularity.empty()) {
    JsonPopularityClient client(make_transport(a.popularity));
    const auto ranking = rank_by_popularity(records, client, a.parallel);
    std::string csv = io::csv_line({"node_id", "label", "concept", "country", "score"});
    for (const auto& s : ranking.ranked) {
      csv += io::csv_line({s.artifact.node_id, s.artifact.label,
                           std::string(to_string(s.artifact.concept_kind)), s.artifact.country,
                           std::to_string(s.score)});
    }
    io::write_file_atomic(dir / "popularity.csv", csv);
    if (ranking.failures) {
      err << "warning: popularity lookup failed for " << ranking.failures << " artifacts\n";
    }
  }

  std::map<std::string, std::size_t> by_country;
  std::map<std::string, std::size_t> by_hop;
  for (const auto& r : records) {
    ++by_country[r.country];
    ++by_hop[r.hop ? std::to_string(*r.hop) : std::string("completion")];
  }
  out << "nodes " << parsed.graph.node_count() << ", artifacts " << records.size()
      << ", skipped lines " << parsed.skipped_lines << '\n';
  for (const auto& [h, n] : by_hop) out << "hop " << h << ": " << n << '\n';
  for (const auto& [c, n] : by_country) out << "country " << c << ": " << n << '\n';
  if (parsed.skipped_lines) err << "warnings: " << parsed.skipped_lines << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------
// prompts
// ---------------------------------------------------------------------------

int cmd_prompts(const std::string& artifacts, const std::string& concept_name,
                const std::string& out_dir, std::ostream& out) {
  require_file(artifacts, "artifacts file (--artifacts)");
  const auto concept_kind = require_concept(concept_name);
  std::ifstream in(artifacts);
  std::vector<ArtifactRecord> records;
  try {
    records = read_artifacts_jsonl(in);
  } catch (const ParseError& e) {
    throw InputError(artifacts + ": " + e.what());
  }
  std::erase_if(records, [&](const ArtifactRecord& r) { return r.concept_kind != concept_kind; });
  const auto prompts = render_prompts(records, concept_kind);
  std::string jsonl;
  for (const auto& p : prompts) {
    jsonl += Json({{"node_id", p.node_id},
                   {"concept", std::string(to_string(p.concept_kind))},
                   {"country", p.country},
                   {"prompt", p.prompt},
                   {"negative_prompt", p.negative_prompt}})
                 .dump();
    jsonl += '\n';
  }
  io::write_file_atomic(fs::path(out_dir) / "prompts.jsonl", jsonl);
  out << "prompts " << prompts.size() << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------
// plan / map
// ---------------------------------------------------------------------------

struct PlanArgs {
  std::string concept_kind, culture;
  std::optional<int> templates, seed_batches, batch_size;
  std::optional<long long> start_seed;

  EvalPlan build() const {
    PlanOverrides o;
    o.template_count = templates;
    o.seed_batches = seed_batches;
    o.batch_size = batch_size;
    o.start_seed = start_seed;
    return build_eval_plan(require_concept(concept_kind),
                           culture.empty() ? std::nullopt : std::optional<std::string>(culture), o);
  }
};

void add_plan_options(CLI::App* cmd, PlanArgs& p) {
  cmd->add_option("--concept", p.concept_kind, "cuisine, landmarks or art")
      ->required()
      ->envname("CUBEKIT_CONCEPT");
  cmd->add_option("--culture", p.culture, "ISO alpha-2 country for within-culture runs")
      ->envname("CUBEKIT_CULTURE");
  cmd->add_option("--templates", p.templates, "number of prompt templates (default 5)");
  cmd->add_option("--seed-batches", p.seed_batches, "seed batches per template (default 10)");
  cmd->add_option("--batch-size", p.batch_size, "images per seed batch (default 8)");
  cmd->add_option("--start-seed", p.start_seed, "first seed (default 0)");
}

int cmd_plan(const PlanArgs& p, const std::string& out_dir, std::ostream& out) {
  const auto plan = p.build();
  std::string csv = io::csv_line({"image_id", "template_index", "seed", "prompt"});
  for (const auto& img : planned_images(plan)) {
    csv += io::csv_line(
        {img.image_id, std::to_string(img.template_index), std::to_string(img.seed), img.prompt});
  }
  const fs::path dir(out_dir);
  io::write_file_atomic(dir / "plan.json", to_json(plan).dump(2) + "\n");
  io::write_file_atomic(dir / "images.csv", csv);
  out << "planned images " << plan.total_images() << '\n';
  return kOk;
}

struct MapArgs {
  std::string images, mapper, retriever, out = ".";
  std::size_t parallel = 4;
};

int cmd_map(const PlanArgs& p, const MapArgs& a, std::ostream& out) {
  require_file(a.images, "image list (--images)");
  if (a.mapper.empty()) throw InputError("missing mapper client (--mapper)");
  const auto plan = p.build();
  const auto table = io::read_csv_file(a.images);
  const auto c_id = table.require("image_id"), c_t = table.require("template_index"),
             c_seed = table.require("seed");
  std::vector<ImageRef> refs;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto where = a.images + " line " + std::to_string(table.lines[r]);
    refs.push_back({io::trim(table.rows[r][c_id]),
                    static_cast<int>(io::parse_int(table.rows[r][c_t], where)),
                    io::parse_int(table.rows[r][c_seed], where)});
  }

  JsonMapperClient mapper(make_transport(a.mapper));
  JsonRetrieverClient retriever(make_transport(a.retriever.empty() ? a.mapper : a.retriever));
  const auto outcomes = map_images(refs, plan.concept_kind, mapper, retriever, a.parallel);

  std::vector<MappedItem> mapped;
  std::string unmappable = io::csv_line({"image_id", "stage"});
  std::size_t failed = 0;
  for (const auto& o : outcomes) {
    if (const auto* m = std::get_if<MappedItem>(&o)) {
      mapped.push_back(*m);
    } else {
      const auto& u = std::get<Unmappable>(o);
      unmappable += io::csv_line({u.image_id, std::string(to_string(u.stage))});
      ++failed;
    }
  }
  std::size_t filtered = 0;
  if (plan.culture) {
    auto r = within_culture_filter(mapped, plan.concept_kind, *plan.culture, mapper, a.parallel);
    filtered = r.removed;
    mapped = std::move(r.kept);
  }
  const fs::path dir(a.out);
  io::write_file_atomic(dir / "mapped.csv", mapped_items_to_csv(mapped));
  io::write_file_atomic(dir / "unmappable.csv", unmappable);
  out << "mapped " << mapped.size() << ", unmappable " << failed << ", filtered " << filtered
      << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------
// score
// ---------------------------------------------------------------------------

struct ScoreArgs {
  std::string mapped, quality, out = ".";
  std::vector<std::string> presets{"all"};
  double q = 1.0;
  bool uniform_quality = false;
};

int cmd_score(const PlanArgs& p, const ScoreArgs& a, std::ostream& out) {
  require_file(a.mapped, "mapped-items file (--mapped)");
  if (!a.uniform_quality) require_file(a.quality, "quality file (--quality)");
  const auto plan = p.build();

  std::vector<KernelConfig> configs;
  for (const auto& name : a.presets) {
    if (name == "all") {
      for (auto n : KernelConfig::preset_names()) configs.push_back(KernelConfig::preset(n, a.q));
    } else {
      configs.push_back(KernelConfig::preset(name, a.q));
    }
  }

  const auto mapped = read_mapped_items_file(a.mapped);
  if (mapped.empty()) throw InputError(a.mapped + ": no mapped items");
  const auto quality =
      a.uniform_quality ? QualityProvider::uniform() : QualityProvider::from_file(a.quality);

  const auto scores = score_batches(plan, mapped, configs, quality);
  auto report = aggregate(scores, configs, mapped);
  report.provenance = {
      {"plan", to_json(plan)},
      {"uniform_quality", a.uniform_quality},
      {"digests",
       {{"mapped", io::hex64(io::fnv1a(io::read_file(a.mapped)))},
        {"quality", a.uniform_quality ? Json() : Json(io::hex64(io::fnv1a(io::read_file(a.quality))))}}}};

  const fs::path dir(a.out);
  io::write_file_atomic(dir / "report.json", to_json(report).dump(2) + "\n");
  io::write_file_atomic(dir / "table.csv", report_table_csv(report));
  io::write_file_atomic(dir / "country_frequency.csv", country_frequency_csv(report));

  for (const auto& c : report.configs) {
    out << weight_label(c.config) << " mean_cd "
        << (c.mean_cd ? fmt(*c.mean_cd, 4) : std::string("n/a")) << " repetitions "
        << c.repetitions << " excluded " << c.excluded_batches << '\n';
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// stats
// ---------------------------------------------------------------------------

template <typename Fn>
Json guarded(Fn&& fn) {
  try {
    return Json{{"value", fn()}, {"reason", nullptr}};
  } catch (const UndefinedStatistic& e) {
    return Json{{"value", nullptr}, {"reason", e.what()}};
  }
}

Json group_stats(const std::vector<stats::RatingTriple>& all, const std::string& group) {
  auto pick = [&](stats::Question q) {
    std::vector<stats::RatingTriple> out;
    for (const auto& t : all) {
      if (t.question == q && (group.empty() || t.group == group)) out.push_back(t);
    }
    return out;
  };
  Json g = Json::object();
  const auto relevance = pick(stats::Question::Relevance);
  g["relevance"] = {{"items", relevance.size()},
                    {"majority_agreement_pct", guarded([&] { return stats::majority_agreement(relevance); })}};
  for (auto q : {stats::Question::Faithfulness, stats::Question::Realism}) {
    const auto triples = pick(q);
    Json entry = {{"items", triples.size()}};
    try {
      const auto c = stats::consensus_score(triples);
      entry["consensus_mean"] = c.mean;
      entry["consensus_std"] = c.std;
      entry["excluded_items"] = c.excluded_items;
    } catch (const UndefinedStatistic& e) {
      entry["consensus_mean"] = nullptr;
      entry["consensus_std"] = nullptr;
      entry["excluded_items"] = triples.size();
    }
    entry["krippendorff_alpha"] = guarded([&] { return stats::krippendorff_alpha_ordinal(triples); });
    g[std::string(stats::to_string(q))] = entry;
  }
  return g;
}

std::string cell(const Json& j, int decimals) {
  if (j.is_null()) return "";
  if (j.is_object()) return j["value"].is_null() ? "" : fmt(j["value"].get<double>(), decimals);
  return fmt(j.get<double>(), decimals);
}

int cmd_stats(const std::string& ratings_path, const std::string& series_path,
              const std::string& out_dir, std::ostream& out) {
  if (ratings_path.empty() && series_path.empty()) {
    throw InputError("need --ratings and/or --series");
  }
  Json report = Json::object();
  std::string csv;

  if (!ratings_path.empty()) {
    require_file(ratings_path, "ratings file (--ratings)");
    std::ifstream in(ratings_path);
    const auto triples = stats::read_ratings(in);
    std::set<std::string> groups;
    for (const auto& t : triples) {
      if (!t.group.empty()) groups.insert(t.group);
    }
    Json by_group = Json::object();
    csv = io::csv_line({"group", "relevance_majority_pct", "faithfulness_alpha", "realism_alpha",
                        "faithfulness_mean", "faithfulness_std", "realism_mean", "realism_std"});
    auto add_row = [&](const std::string& name, const Json& g) {
      csv += io::csv_line({name, cell(g["relevance"]["majority_agreement_pct"], 0),
                           cell(g["faithfulness"]["krippendorff_alpha"], 2),
                           cell(g["realism"]["krippendorff_alpha"], 2),
                           cell(g["faithfulness"]["consensus_mean"], 1),
                           cell(g["faithfulness"]["consensus_std"], 1),
                           cell(g["realism"]["consensus_mean"], 1),
                           cell(g["realism"]["consensus_std"], 1)});
    };
    for (const auto& g : groups) {
      by_group[g] = group_stats(triples, g);
      add_row(g, by_group[g]);
    }
    report["overall"] = group_stats(triples, "");
    add_row("all", report["overall"]);
    report["groups"] = by_group;
    const auto& overall = report["overall"];
    out << "relevance majority " << cell(overall["relevance"]["majority_agreement_pct"], 1)
        << "%, faithfulness alpha " << cell(overall["faithfulness"]["krippendorff_alpha"], 3)
        << ", realism alpha " << cell(overall["realism"]["krippendorff_alpha"], 3) << '\n';
  }

  if (!series_path.empty()) {
    require_file(series_path, "series file (--series)");
    std::ifstream in(series_path);
    const auto series = stats::read_series(in);
    Json correlations = Json::array();
    for (std::size_t i = 0; i < series.size(); ++i) {
      for (std::size_t j = i + 1; j < series.size(); ++j) {
        Json c = guarded([&] { return stats::pearson(series[i], series[j]); });
        c["x"] = series[i].label;
        c["y"] = series[j].label;
        out << "pearson " << series[i].label << " ~ " << series[j].label << ": "
            << cell(c, 3) << '\n';
        correlations.push_back(std::move(c));
      }
    }
    report["correlations"] = correlations;
  }

  const fs::path dir(out_dir);
  io::write_file_atomic(dir / "stats.json", report.dump(2) + "\n");
  if (!csv.empty()) io::write_file_atomic(dir / "stats.csv", csv);
  return kOk;
}

// ---------------------------------------------------------------------------
// tablecheck
// ---------------------------------------------------------------------------

int cmd_tablecheck(const std::string& table_path, double tolerance, std::ostream& out,
                   std::ostream& err) {
  require_file(table_path, "published table (--table)");
  const auto t = io::read_csv_file(table_path);
  const auto c_model = t.require("model"), c_concept = t.require("concept"),
             c_kernel = t.require("kernel"), c_q = t.require("mean_quality"),
             c_vs = t.require("mean_vs_bar"), c_cd = t.require("cd");
  if (t.rows.empty()) throw InputError(table_path + ": no table cells");

  double max_residual = 0.0;
  std::string worst;
  std::vector<std::string> failures;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const auto where = table_path + " line " + std::to_string(t.lines[r]);
    const double q = io::parse_double(row[c_q], where);
    const double vs = io::parse_double(row[c_vs], where);
    const double cd = io::parse_double(row[c_cd], where);
    const double residual = std::abs(q * vs - cd);
    const auto name = row[c_model] + "/" + row[c_concept] + "/" + row[c_kernel];
    if (residual > max_residual) {
      max_residual = residual;
      worst = name;
    }
    if (residual > tolerance) {
      failures.push_back(name + ": " + fmt(q, 2) + " x " + fmt(vs, 2) + " = " + fmt(q * vs, 4) +
                         " vs " + row[c_cd] + " (residual " + fmt(residual, 4) + ")");
    }
  }
  out << "cells " << t.rows.size() << ", max residual " << fmt(max_residual, 4) << " (" << worst
      << "), tolerance " << fmt(tolerance, 3) << '\n';
  if (!failures.empty()) {
    for (const auto& f : failures) err << "FAIL " << f << '\n';
    return kUsage;
  }
  out << "all cells consistent\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cultural-diversity evaluation toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "cubekit 1.0.0");

  std::size_t parallel = 4;
  app.add_option("--parallel", parallel, "bounded client parallelism")
      ->envname("CUBEKIT_PARALLEL")
      ->check(CLI::Range(1, 256));

  ExtractArgs ex;
  auto* extract = app.add_subcommand("extract", "extract cultural artifacts from a KB-JSONL dump");
  extract->add_option("--kb", ex.kb, "KB-JSONL dump")->envname("CUBEKIT_KB");
  extract->add_option("--roots", ex.roots, "roots CSV (concept,id,label,art_subkind)")
      ->envname("CUBEKIT_ROOTS");
  extract->add_option("--hops", ex.hops, "maximum hop distance")
      ->envname("CUBEKIT_HOPS")
      ->check(CLI::Range(1, 64));
  extract->add_option("--concept", ex.concept_kind, "only extract this concept");
  extract->add_option("--refine", ex.refine, "refinement client (dir:, cmd:, http://)")
      ->envname("CUBEKIT_REFINE");
  extract->add_option("--popularity", ex.popularity, "popularity client (dir:, cmd:, http://)")
      ->envname("CUBEKIT_POPULARITY");
  extract->add_option("--out", ex.out, "output directory")->envname("CUBEKIT_OUT");
  extract->add_flag("--lenient,!--strict", ex.lenient, "skip malformed lines instead of failing");

  std::string artifacts, prompt_concept, prompts_out = ".";
  auto* prompts = app.add_subcommand("prompts", "render prompt templates for artifacts");
  prompts->add_option("--artifacts", artifacts, "artifacts JSONL")->required();
  prompts->add_option("--concept", prompt_concept, "concept to render")->required();
  prompts->add_option("--out", prompts_out, "output directory")->envname("CUBEKIT_OUT");

  PlanArgs plan_args;
  std::string plan_out = ".";
  auto* plan = app.add_subcommand("plan", "enumerate the prompt x seed evaluation plan");
  add_plan_options(plan, plan_args);
  plan->add_option("--out", plan_out, "output directory")->envname("CUBEKIT_OUT");

  PlanArgs map_plan;
  MapArgs map_args;
  auto* map = app.add_subcommand("map", "map generated images to artifacts via clients");
  add_plan_options(map, map_plan);
  map->add_option("--images", map_args.images, "image list CSV (image_id,template_index,seed)");
  map->add_option("--mapper", map_args.mapper, "mapper client (dir:, cmd:, http://)")
      ->envname("CUBEKIT_MAPPER");
  map->add_option("--retriever", map_args.retriever, "retriever client (defaults to --mapper)")
      ->envname("CUBEKIT_RETRIEVER");
  map->add_option("--out", map_args.out, "output directory")->envname("CUBEKIT_OUT");

  PlanArgs score_plan;
  ScoreArgs sc;
  auto* score = app.add_subcommand("score", "score mapped images and aggregate");
  add_plan_options(score, score_plan);
  score->add_option("--mapped", sc.mapped, "mapped-items CSV or JSONL")->envname("CUBEKIT_MAPPED");
  score->add_option("--quality", sc.quality, "quality CSV (image_id,score)")
      ->envname("CUBEKIT_QUALITY");
  score->add_flag("--uniform-quality", sc.uniform_quality, "treat every quality score as 1");
  score->add_option("--preset", sc.presets,
                    "kernel preset: continent, country, artifact, hierarchical, uniform or all")
      ->envname("CUBEKIT_PRESET");
  score->add_option("--q", sc.q, "Renyi order")->envname("CUBEKIT_Q")->check(CLI::NonNegativeNumber);
  score->add_option("--out", sc.out, "output directory")->envname("CUBEKIT_OUT");

  std::string ratings, series, stats_out = ".";
  auto* st = app.add_subcommand("stats", "rater agreement and correlation statistics");
  st->add_option("--ratings", ratings, "ratings CSV (item_id,question,rater_index,value[,group])")
      ->envname("CUBEKIT_RATINGS");
  st->add_option("--series", series, "metric series CSV (metric,group,value)")
      ->envname("CUBEKIT_SERIES");
  st->add_option("--out", stats_out, "output directory")->envname("CUBEKIT_OUT");

  std::string table = data_dir() + "/published_tables.csv";
  double tolerance = 0.011;
  auto* tc = app.add_subcommand("tablecheck", "audit published tables for CD = q x VS-bar");
  tc->add_option("--table", table, "published table CSV");
  tc->add_option("--tolerance", tolerance, "absolute tolerance");

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*extract) {
      ex.parallel = parallel;
      return cmd_extract(ex, out, err);
    }
    if (*prompts) return cmd_prompts(artifacts, prompt_concept, prompts_out, out);
    if (*plan) return cmd_plan(plan_args, plan_out, out);
    if (*map) {
      map_args.parallel = parallel;
      return cmd_map(map_plan, map_args, out);
    }
    if (*score) return cmd_score(score_plan, sc, out);
    if (*st) return cmd_stats(ratings, series, stats_out, out);
    if (*tc) return cmd_tablecheck(table, tolerance, out, err);
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kInternal;
  }
  return kUsage;
}

}  // namespace cubekit::cli
