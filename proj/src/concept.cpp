#include "cubekit/concept.hpp"

#include "cubekit/io.hpp"

namespace cubekit {

std::string_view to_string(Concept c) {
  switch (c) {
    case Concept::Cuisine: return "Cuisine";
    case Concept::Landmarks: return "Landmarks";
    case Concept::Art: return "Art";
  }
  return "?";
}

std::string_view to_string(ArtSubkind k) {
  switch (k) {
    case ArtSubkind::Clothing: return "clothing";
    case ArtSubkind::Painting: return "painting";
    case ArtSubkind::Performance: return "performance";
  }
  return "?";
}

std::optional<Concept> parse_concept(std::string_view s) {
  const auto l = io::to_lower(io::trim(s));
  if (l == "cuisine") return Concept::Cuisine;
  if (l == "landmarks" || l == "landmark") return Concept::Landmarks;
  if (l == "art") return Concept::Art;
  return std::nullopt;
}

std::optional<ArtSubkind> parse_art_subkind(std::string_view s) {
  const auto l = io::to_lower(io::trim(s));
  if (l == "clothing") return ArtSubkind::Clothing;
  if (l == "painting") return ArtSubkind::Painting;
  if (l == "performance") return ArtSubkind::Performance;
  return std::nullopt;
}

}  // namespace cubekit
