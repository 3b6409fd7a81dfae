#include "cubekit/extraction.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "cubekit/io.hpp"
#include "cubekit/parallel.hpp"

namespace cubekit {

// ---------------------------------------------------------------------------
// KBGraph
// ---------------------------------------------------------------------------

std::uint32_t KBGraph::intern(std::string_view id) {
  auto it = slots_.find(id);
  if (it != slots_.end()) return it->second;
  const auto slot = static_cast<std::uint32_t>(node_of_slot_.size());
  slots_.emplace(std::string(id), slot);
  node_of_slot_.push_back(kAbsent);
  children_of_.emplace_back();
  return slot;
}

std::optional<std::uint32_t> KBGraph::slot_of(std::string_view id) const {
  auto it = slots_.find(id);
  if (it == slots_.end()) return std::nullopt;
  return it->second;
}

void KBGraph::add(KBNode node) {
  if (node.id.empty()) throw InputError("node id must be nonempty");
  const auto slot = intern(node.id);
  if (node_of_slot_[slot] != kAbsent) throw InputError("duplicate node id '" + node.id + "'");
  const auto index = static_cast<std::uint32_t>(nodes_.size());
  node_of_slot_[slot] = index;

  // A node listing the same parent under both P31 and P279 is still one child.
  std::vector<std::uint32_t> parents;
  parents.reserve(node.p31.size() + node.p279.size());
  for (const auto* list : {&node.p31, &node.p279}) {
    for (const auto& target : *list) {
      const auto t = intern(target);
      if (std::find(parents.begin(), parents.end(), t) == parents.end()) parents.push_back(t);
    }
  }
  for (auto t : parents) children_of_[t].push_back(index);
  edge_count_ += parents.size();
  nodes_.push_back(std::move(node));
}

const KBNode* KBGraph::find(std::string_view id) const {
  const auto slot = slot_of(id);
  if (!slot || node_of_slot_[*slot] == kAbsent) return nullptr;
  return &nodes_[node_of_slot_[*slot]];
}

std::vector<const KBNode*> KBGraph::children(std::string_view id) const {
  std::vector<const KBNode*> out;
  const auto slot = slot_of(id);
  if (!slot) return out;
  out.reserve(children_of_[*slot].size());
  for (auto idx : children_of_[*slot]) out.push_back(&nodes_[idx]);
  return out;
}

// ---------------------------------------------------------------------------
// KB-JSONL parsing
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> string_array(const Json& obj, const char* key) {
  std::vector<std::string> out;
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return out;
  if (!it->is_array()) throw InputError(std::string("field '") + key + "' must be an array");
  out.reserve(it->size());
  for (const auto& v : *it) {
    if (!v.is_string()) {
      throw InputError(std::string("field '") + key + "' must contain strings");
    }
    out.push_back(v.get<std::string>());
  }
  return out;
}

KBNode parse_node(std::string_view line) {
  Json j;
  try {
    j = Json::parse(line);
  } catch (const Json::parse_error& e) {
    throw InputError(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw InputError("record is not a JSON object");
  auto id = j.find("id");
  auto label = j.find("label");
  if (id == j.end() || !id->is_string() || id->get_ref<const std::string&>().empty()) {
    throw InputError("missing string field 'id'");
  }
  if (label == j.end() || !label->is_string()) throw InputError("missing string field 'label'");

  KBNode n;
  n.id = id->get<std::string>();
  n.label = label->get<std::string>();
  n.p31 = string_array(j, "p31");
  n.p279 = string_array(j, "p279");
  n.p495 = string_array(j, "p495");
  n.p17 = string_array(j, "p17");
  const auto& table = CountryTable::instance();
  for (const auto* list : {&n.p495, &n.p17}) {
    for (const auto& c : *list) {
      if (!table.contains(c)) throw InputError("unknown country code '" + c + "'");
    }
  }
  return n;
}

}  // namespace

ParseResult parse_kb_dump(std::istream& in, ParseMode mode) {
  ParseResult result;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    KBNode node;
    try {
      node = parse_node(line);
    } catch (const InputError& e) {
      if (mode == ParseMode::Strict) throw ParseError(e.what(), line_no);
      ++result.skipped_lines;
      if (result.warnings.size() < 20) {
        result.warnings.push_back("line " + std::to_string(line_no) + ": " + e.what());
      }
      continue;
    }
    try {
      result.graph.add(std::move(node));
    } catch (const InputError& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Roots and traversal
// ---------------------------------------------------------------------------

std::vector<RootSet> load_root_sets(std::istream& in) {
  const auto t = io::read_csv(in);
  const auto c_concept = t.require("concept");
  const auto c_id = t.require("id");
  const auto c_sub = t.column("art_subkind");

  std::map<Concept, RootSet> sets;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const auto where = "roots line " + std::to_string(t.lines[r]);
    auto concept_kind = parse_concept(row[c_concept]);
    if (!concept_kind) throw InputError(where + ": unknown concept '" + row[c_concept] + "'");
    Root root{io::trim(row[c_id]), std::nullopt};
    if (root.id.empty()) throw InputError(where + ": empty root id");
    if (c_sub && !io::trim(row[*c_sub]).empty()) {
      root.art_subkind = parse_art_subkind(row[*c_sub]);
      if (!root.art_subkind) throw InputError(where + ": unknown art sub-kind '" + row[*c_sub] + "'");
    }
    auto& set = sets[*concept_kind];
    set.concept_kind = *concept_kind;
    set.roots.push_back(std::move(root));
  }
  std::vector<RootSet> out;
  for (auto& [c, s] : sets) out.push_back(std::move(s));
  return out;
}

std::vector<RootSet> load_root_sets_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open roots file " + path);
  return load_root_sets(in);
}

std::vector<ArtifactRecord> extract_artifacts(const KBGraph& graph, const RootSet& roots,
                                              int max_hops) {
  if (max_hops < 1) throw ConfigError("maximum hop count must be >= 1");
  if (roots.roots.empty()) throw InputError("root set is empty");

  struct Frontier {
    const KBNode* node;
    std::optional<ArtSubkind> subkind;
  };
  std::set<std::string_view> visited;
  std::vector<Frontier> frontier;
  for (const auto& r : roots.roots) {
    const auto* node = graph.find(r.id);
    if (!node) throw InputError("root node '" + r.id + "' not found in the knowledge base");
    if (visited.insert(node->id).second) frontier.push_back({node, r.art_subkind});
  }

  const auto& table = CountryTable::instance();
  std::vector<ArtifactRecord> out;
  for (int hop = 1; hop <= max_hops && !frontier.empty(); ++hop) {
    std::vector<Frontier> next;
    for (const auto& parent : frontier) {
      for (const KBNode* child : graph.children(parent.node->id)) {
        if (!visited.insert(child->id).second) continue;
        if (!child->has_country()) {
          next.push_back({child, parent.subkind});
          continue;
        }
        std::set<std::string> seen;
        for (const auto& country : child->countries()) {
          if (!seen.insert(country).second) continue;
          ArtifactRecord rec;
          rec.node_id = child->id;
          rec.label = child->label;
          rec.concept_kind = roots.concept_kind;
          if (roots.concept_kind == Concept::Art) rec.art_subkind = parent.subkind;
          rec.country = country;
          rec.continent = table.at(country).continent;
          rec.hop = hop;
          rec.provenance = Provenance::KB;
          out.push_back(std::move(rec));
        }
      }
    }
    frontier = std::move(next);
  }

  std::sort(out.begin(), out.end(), [](const ArtifactRecord& a, const ArtifactRecord& b) {
    return std::tie(*a.hop, a.node_id, a.country) < std::tie(*b.hop, b.node_id, b.country);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

std::string_view to_string(Provenance p) {
  return p == Provenance::KB ? "KB" : "LLMCompletion";
}

Json to_json(const ArtifactRecord& r) {
  Json j = Json::object();
  j["node_id"] = r.node_id;
  j["label"] = r.label;
  j["concept"] = std::string(to_string(r.concept_kind));
  j["art_subkind"] = r.art_subkind ? Json(std::string(to_string(*r.art_subkind))) : Json();
  j["country"] = r.country;
  j["continent"] = std::string(to_string(r.continent));
  j["hop"] = r.hop ? Json(*r.hop) : Json();
  j["provenance"] = std::string(to_string(r.provenance));
  return j;
}

ArtifactRecord artifact_from_json(const Json& j) {
  try {
    ArtifactRecord r;
    r.node_id = j.at("node_id").get<std::string>();
    r.label = j.at("label").get<std::string>();
    auto concept_kind = parse_concept(j.at("concept").get<std::string>());
    if (!concept_kind) throw InputError("unknown concept");
    r.concept_kind = *concept_kind;
    if (auto it = j.find("art_subkind"); it != j.end() && !it->is_null()) {
      r.art_subkind = parse_art_subkind(it->get<std::string>());
      if (!r.art_subkind) throw InputError("unknown art_subkind");
    }
    r.country = j.at("country").get<std::string>();
    r.continent = CountryTable::instance().at(r.country).continent;
    if (auto it = j.find("continent"); it != j.end() && !it->is_null()) {
      if (parse_continent(it->get<std::string>()) != r.continent) {
        throw InputError("continent inconsistent with country " + r.country);
      }
    }
    if (auto it = j.find("hop"); it != j.end() && !it->is_null()) r.hop = it->get<int>();
    const auto prov = j.value("provenance", std::string("KB"));
    if (prov == "KB") {
      r.provenance = Provenance::KB;
    } else if (prov == "LLMCompletion") {
      r.provenance = Provenance::LLMCompletion;
    } else {
      throw InputError("unknown provenance '" + prov + "'");
    }
    return r;
  } catch (const Json::exception& e) {
    throw InputError(std::string("bad artifact record: ") + e.what());
  }
}

std::string artifacts_to_jsonl(const std::vector<ArtifactRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += to_json(r).dump();
    out += '\n';
  }
  return out;
}

std::string artifacts_to_csv(const std::vector<ArtifactRecord>& records) {
  std::string out = io::csv_line(
      {"node_id", "label", "concept", "art_subkind", "country", "continent", "hop", "provenance"});
  for (const auto& r : records) {
    out += io::csv_line({r.node_id, r.label, std::string(to_string(r.concept_kind)),
                         r.art_subkind ? std::string(to_string(*r.art_subkind)) : "", r.country,
                         std::string(to_string(r.continent)), r.hop ? std::to_string(*r.hop) : "",
                         std::string(to_string(r.provenance))});
  }
  return out;
}

std::vector<ArtifactRecord> read_artifacts_jsonl(std::istream& in) {
  std::vector<ArtifactRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(artifact_from_json(Json::parse(line)));
    } catch (const Json::parse_error& e) {
      throw ParseError(e.what(), line_no);
    } catch (const InputError& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Refinement and popularity
// ---------------------------------------------------------------------------

std::vector<ArtifactRecord> refine_with_llm(const std::vector<ArtifactRecord>& candidates,
                                            Concept concept_kind, RefinementClient& client,
                                            std::size_t parallelism) {
  std::vector<char> keep(candidates.size(), 0);
  std::vector<std::string> failure(candidates.size());
  bounded_parallel_for(candidates.size(), parallelism, [&](std::size_t i) {
    try {
      keep[i] = client.judge(candidates[i]) ? 1 : 0;
    } catch (const std::exception& e) {
      failure[i] = e.what();
      if (failure[i].empty()) failure[i] = "judge failed";
    }
  });
  for (std::size_t i = 0; i < failure.size(); ++i) {
    if (!failure[i].empty()) throw RefinementFailure(failure[i], i);
  }

  std::set<std::string> countries;
  for (const auto& c : candidates) countries.insert(c.country);
  const std::vector<std::string> country_list(countries.begin(), countries.end());
  std::vector<std::vector<std::string>> completions(country_list.size());
  for (std::size_t i = 0; i < country_list.size(); ++i) {
    try {
      completions[i] = client.complete(concept_kind, country_list[i]);
    } catch (const std::exception& e) {
      throw RefinementFailure(e.what(), candidates.size() + i);
    }
  }

  std::vector<ArtifactRecord> out;
  std::set<std::pair<std::string, std::string>> seen;
  auto push = [&](ArtifactRecord r) {
    if (seen.emplace(io::to_lower(r.label), r.country).second) out.push_back(std::move(r));
  };
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (keep[i]) push(candidates[i]);
  }
  const auto& table = CountryTable::instance();
  for (std::size_t i = 0; i < country_list.size(); ++i) {
    for (const auto& label : completions[i]) {
      ArtifactRecord r;
      const auto key = std::string(to_string(concept_kind)) + "|" + country_list[i] + "|" + label;
      r.node_id = "GEN-" + io::hex64(io::fnv1a(key));
      r.label = label;
      r.concept_kind = concept_kind;
      r.country = country_list[i];
      r.continent = table.at(r.country).continent;
      r.provenance = Provenance::LLMCompletion;
      push(std::move(r));
    }
  }
  return out;
}

PopularityRanking rank_by_popularity(const std::vector<ArtifactRecord>& artifacts,
                                     PopularityClient& client, std::size_t parallelism) {
  PopularityRanking result;
  result.ranked.resize(artifacts.size());
  std::vector<char> failed(artifacts.size(), 0);
  bounded_parallel_for(artifacts.size(), parallelism, [&](std::size_t i) {
    result.ranked[i].artifact = artifacts[i];
    try {
      const auto n = client.count(artifacts[i].label, io::to_lower(artifacts[i].country));
      if (n < 0) throw TransportError("negative count");
      result.ranked[i].score = n;
    } catch (const std::exception&) {
      result.ranked[i].score = -1;
      failed[i] = 1;
    }
  });
  result.failures = static_cast<std::size_t>(std::count(failed.begin(), failed.end(), 1));
  std::stable_sort(result.ranked.begin(), result.ranked.end(),
                   [](const ScoredArtifact& a, const ScoredArtifact& b) {
                     if (a.score != b.score) return a.score > b.score;
                     return a.artifact.node_id < b.artifact.node_id;
                   });
  return result;
}

bool JsonRefinementClient::judge(const ArtifactRecord& record) {
  const Json req = {{"op", "judge"},
                    {"concept", std::string(to_string(record.concept_kind))},
                    {"record", to_json(record)}};
  const auto res = t_->call(req);
  auto it = res.find("keep");
  if (it == res.end() || !it->is_boolean()) throw TransportError("judge response lacks 'keep'");
  return it->get<bool>();
}

std::vector<std::string> JsonRefinementClient::complete(Concept concept_kind,
                                                        const std::string& country) {
  const Json req = {
      {"op", "complete"}, {"concept", std::string(to_string(concept_kind))}, {"country", country}};
  const auto res = t_->call(req);
  try {
    return res.at("labels").get<std::vector<std::string>>();
  } catch (const Json::exception& e) {
    throw TransportError(std::string("complete response malformed: ") + e.what());
  }
}

long long JsonPopularityClient::count(const std::string& label, const std::string& country_geo) {
  const Json req = {{"op", "popularity"}, {"label", label}, {"gl", country_geo}};
  const auto res = t_->call(req);
  auto it = res.find("count");
  if (it == res.end() || !it->is_number_integer()) {
    throw TransportError("popularity response lacks integer 'count'");
  }
  return it->get<long long>();
}

// ---------------------------------------------------------------------------
// Prompts
// ---------------------------------------------------------------------------

const std::string_view kNegativePrompt =
    "multiple items, blurry, painting, cartoon, people, human, man, woman, artificial, multiple "
    "images, nsfw, bad quality, bad anatomy, worst quality, low quality, low resolutions, extra "
    "fingers, blur, blurry, ugly, wrong proportions, watermark, image artifacts, lowres, jpeg "
    "artifacts, deformed, noisy";

std::vector<PromptRecord> render_prompts(const std::vector<ArtifactRecord>& artifacts,
                                         Concept concept_kind) {
  const auto& table = CountryTable::instance();
  std::vector<PromptRecord> out;
  out.reserve(artifacts.size());
  for (const auto& a : artifacts) {
    if (a.concept_kind != concept_kind) {
      throw InputError("artifact '" + a.node_id + "' belongs to " +
                       std::string(to_string(a.concept_kind)) + ", not " +
                       std::string(to_string(concept_kind)));
    }
    const auto& country = table.at(a.country).name;
    std::string prompt;
    switch (concept_kind) {
      case Concept::Cuisine:
        prompt = "A high resolution image of " + a.label + " from " + country + " cuisine.";
        break;
      case Concept::Landmarks:
        prompt = "A panoramic view of " + a.label + " in " + country + ".";
        break;
      case Concept::Art:
        if (!a.art_subkind) {
          throw InputError("art artifact '" + a.node_id + "' has no sub-kind");
        }
        switch (*a.art_subkind) {
          case ArtSubkind::Clothing:
            prompt = "Image of a person in " + a.label + " from " + country + ".";
            break;
          case ArtSubkind::Painting:
            prompt = "A " + a.label + " painting from " + country + ".";
            break;
          case ArtSubkind::Performance:
            prompt = "An image of performance of " + a.label + " from " + country + ".";
            break;
        }
        break;
    }
    out.push_back({a.node_id, concept_kind, a.country, std::move(prompt), std::string(kNegativePrompt)});
  }
  return out;
}

}  // namespace cubekit
