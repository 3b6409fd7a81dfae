#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cubekit {

enum class Continent { Africa, Asia, Europe, NorthAmerica, SouthAmerica, Oceania };

inline constexpr std::array<Continent, 6> kAllContinents = {
    Continent::Africa,       Continent::Asia,         Continent::Europe,
    Continent::NorthAmerica, Continent::SouthAmerica, Continent::Oceania};

std::string_view to_string(Continent c);
std::optional<Continent> parse_continent(std::string_view s);

struct CountryInfo {
  std::string alpha2;
  std::string alpha3;
  std::string name;
  Continent continent;
};

/// Static ISO-3166 table shipped in data/countries.csv and compiled in.
class CountryTable {
 public:
  static const CountryTable& instance();

  const CountryInfo* find(std::string_view alpha2) const;
  /// Throws InputError on unknown codes.
  const CountryInfo& at(std::string_view alpha2) const;
  bool contains(std::string_view alpha2) const { return find(alpha2) != nullptr; }
  const std::vector<CountryInfo>& rows() const { return rows_; }

 private:
  CountryTable();
  std::vector<CountryInfo> rows_;  // sorted by alpha2
};

}  // namespace cubekit
