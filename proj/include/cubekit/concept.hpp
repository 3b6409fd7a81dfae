#pragma once

#include <optional>
#include <string_view>

namespace cubekit {

enum class Concept { Cuisine, Landmarks, Art };

/// Which art root subtree an artifact came from; picks the prompt template.
enum class ArtSubkind { Clothing, Painting, Performance };

std::string_view to_string(Concept c);
std::string_view to_string(ArtSubkind k);
/// Case-insensitive.
std::optional<Concept> parse_concept(std::string_view s);
std::optional<ArtSubkind> parse_art_subkind(std::string_view s);

}  // namespace cubekit
