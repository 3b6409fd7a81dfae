#pragma once

#include <cstdint>
#include <istream>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cubekit/concept.hpp"
#include "cubekit/error.hpp"
#include "cubekit/geo.hpp"
#include "cubekit/transport.hpp"

namespace cubekit {

// ---------------------------------------------------------------------------
// Knowledge-base graph
// ---------------------------------------------------------------------------

struct KBNode {
  std::string id;
  std::string label;
  std::vector<std::string> p31;   // instance of
  std::vector<std::string> p279;  // subclass of
  std::vector<std::string> p495;  // country of origin
  std::vector<std::string> p17;   // country

  bool has_country() const { return !p495.empty() || !p17.empty(); }
  /// P495 wins over P17 when both are present.
  const std::vector<std::string>& countries() const { return p495.empty() ? p17 : p495; }
};

namespace detail {
struct StringHash {
  using is_transparent = void;
  std::size_t operator()(std::string_view s) const noexcept {
    return std::hash<std::string_view>{}(s);
  }
};
}  // namespace detail

/// Nodes plus the reverse P31/P279 index ("children of r" = nodes whose
/// instance-of or subclass-of edge points at r). Immutable once parsed.
class KBGraph {
 public:
  /// Throws InputError on an empty or duplicate id.
  void add(KBNode node);

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t reverse_edge_count() const { return edge_count_; }
  const KBNode* find(std::string_view id) const;
  /// Children of `id` in dump order; empty for unknown ids.
  std::vector<const KBNode*> children(std::string_view id) const;
  const std::vector<KBNode>& nodes() const { return nodes_; }

 private:
  std::uint32_t intern(std::string_view id);
  std::optional<std::uint32_t> slot_of(std::string_view id) const;

  static constexpr std::uint32_t kAbsent = UINT32_MAX;
  std::vector<KBNode> nodes_;
  std::unordered_map<std::string, std::uint32_t, detail::StringHash, std::equal_to<>> slots_;
  std::vector<std::uint32_t> node_of_slot_;               // slot -> node index or kAbsent
  std::vector<std::vector<std::uint32_t>> children_of_;  // slot -> child node indices
  std::size_t edge_count_ = 0;
};

enum class ParseMode { Strict, Lenient };

struct ParseResult {
  KBGraph graph;
  std::size_t skipped_lines = 0;
  std::vector<std::string> warnings;  // first few skip reasons
};

/// Reads KB-JSONL: one object per line with `id`, `label` and optional
/// `p31`, `p279`, `p495`, `p17` string arrays. Strict mode throws ParseError
/// on the first malformed line; lenient mode skips and counts. Duplicate ids
/// are an error in both modes.
ParseResult parse_kb_dump(std::istream& in, ParseMode mode = ParseMode::Strict);

// ---------------------------------------------------------------------------
// Artifacts
// ---------------------------------------------------------------------------

enum class Provenance { KB, LLMCompletion };
std::string_view to_string(Provenance p);

struct ArtifactRecord {
  std::string node_id;
  std::string label;
  Concept concept_kind = Concept::Cuisine;
  std::optional<ArtSubkind> art_subkind;
  std::string country;  // ISO-3166 alpha-2
  Continent continent = Continent::Asia;
  std::optional<int> hop;  // absent for LLM completions
  Provenance provenance = Provenance::KB;

  friend bool operator==(const ArtifactRecord&, const ArtifactRecord&) = default;
};

struct Root {
  std::string id;
  std::optional<ArtSubkind> art_subkind;
};

struct RootSet {
  Concept concept_kind = Concept::Cuisine;
  std::vector<Root> roots;
};

/// Reads a `concept,id[,label][,art_subkind]` CSV into one RootSet per
/// concept, ordered Cuisine, Landmarks, Art.
std::vector<RootSet> load_root_sets(std::istream& in);
std::vector<RootSet> load_root_sets_file(const std::string& path);

inline constexpr int kDefaultMaxHops = 4;

/// Breadth-first expansion from the roots along reverse P31/P279 edges for
/// hops 1..max_hops. Children with P495/P17 are emitted (one record per
/// country); the rest form the next frontier. Each node is visited once, so
/// cycles terminate and emitted hops are minimal. Output is sorted by
/// (hop, node_id, country). Throws InputError for roots absent from the graph.
std::vector<ArtifactRecord> extract_artifacts(const KBGraph& graph, const RootSet& roots,
                                              int max_hops = kDefaultMaxHops);

Json to_json(const ArtifactRecord& r);
ArtifactRecord artifact_from_json(const Json& j);
std::string artifacts_to_jsonl(const std::vector<ArtifactRecord>& records);
std::string artifacts_to_csv(const std::vector<ArtifactRecord>& records);
std::vector<ArtifactRecord> read_artifacts_jsonl(std::istream& in);

// ---------------------------------------------------------------------------
// Refinement and popularity clients
// ---------------------------------------------------------------------------

class RefinementClient {
 public:
  virtual ~RefinementClient() = default;
  /// true keeps the record.
  virtual bool judge(const ArtifactRecord& record) = 0;
  /// Popular artifact labels missing for (concept, country).
  virtual std::vector<std::string> complete(Concept concept_kind, const std::string& country) = 0;
};

class PopularityClient {
 public:
  virtual ~PopularityClient() = default;
  /// Search-result count for `label` geolocated to `country_geo` (lowercase alpha-2).
  virtual long long count(const std::string& label, const std::string& country_geo) = 0;
};

/// Raised when a refinement call fails; `offset` is the index of the first
/// failed request (judge calls first, then one completion per country) so a
/// caller can resume.
class RefinementFailure : public TransportError {
 public:
  RefinementFailure(const std::string& what, std::size_t offset)
      : TransportError(what + " (at batch offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Drops records the client rejects, then appends completions for every
/// country seen among the candidates (sorted), and dedupes by
/// (lowercase label, country), keeping the first occurrence.
/// Completions get id "GEN-<hash>", no hop and provenance LLMCompletion.
std::vector<ArtifactRecord> refine_with_llm(const std::vector<ArtifactRecord>& candidates,
                                            Concept concept_kind, RefinementClient& client,
                                            std::size_t parallelism = 4);

struct ScoredArtifact {
  ArtifactRecord artifact;
  long long score = 0;  // -1 when the client failed for this item
};

struct PopularityRanking {
  std::vector<ScoredArtifact> ranked;
  std::size_t failures = 0;
};

/// Descending by score, ties by node_id ascending; failed lookups score -1.
PopularityRanking rank_by_popularity(const std::vector<ArtifactRecord>& artifacts,
                                     PopularityClient& client, std::size_t parallelism = 4);

/// JSON-over-transport adapters. Requests:
///   {"op":"judge","concept":C,"record":{...}}          -> {"keep":bool}
///   {"op":"complete","concept":C,"country":"JP"}       -> {"labels":[...]}
///   {"op":"popularity","label":L,"gl":"jp"}            -> {"count":int}
class JsonRefinementClient : public RefinementClient {
 public:
  explicit JsonRefinementClient(std::shared_ptr<Transport> t) : t_(std::move(t)) {}
  bool judge(const ArtifactRecord& record) override;
  std::vector<std::string> complete(Concept concept_kind, const std::string& country) override;

 private:
  std::shared_ptr<Transport> t_;
};

class JsonPopularityClient : public PopularityClient {
 public:
  explicit JsonPopularityClient(std::shared_ptr<Transport> t) : t_(std::move(t)) {}
  long long count(const std::string& label, const std::string& country_geo) override;

 private:
  std::shared_ptr<Transport> t_;
};

// ---------------------------------------------------------------------------
// Prompts
// ---------------------------------------------------------------------------

/// Negative prompt used for every artifact prompt.
extern const std::string_view kNegativePrompt;

struct PromptRecord {
  std::string node_id;
  Concept concept_kind = Concept::Cuisine;
  std::string country;
  std::string prompt;
  std::string negative_prompt;
};

/// Fills the concept's template with the artifact label and the country's
/// display name. Throws InputError when an artifact belongs to another
/// concept, or an art artifact has no sub-kind.
std::vector<PromptRecord> render_prompts(const std::vector<ArtifactRecord>& artifacts,
                                         Concept concept_kind);

}  // namespace cubekit
