#include "cubekit/geo.hpp"

#include <algorithm>
#include <sstream>

#include "cubekit/error.hpp"
#include "cubekit/io.hpp"

namespace cubekit {

namespace detail {
extern const char* const kCountryCsv;
}

std::string_view to_string(Continent c) {
  switch (c) {
    case Continent::Africa: return "Africa";
    case Continent::Asia: return "Asia";
    case Continent::Europe: return "Europe";
    case Continent::NorthAmerica: return "North America";
    case Continent::SouthAmerica: return "South America";
    case Continent::Oceania: return "Oceania";
  }
  return "?";
}

std::optional<Continent> parse_continent(std::string_view s) {
  const auto want = io::to_lower(io::trim(s));
  for (Continent c : kAllContinents) {
    if (io::to_lower(to_string(c)) == want) return c;
  }
  return std::nullopt;
}

CountryTable::CountryTable() {
  std::istringstream in(detail::kCountryCsv);
  const io::CsvTable t = io::read_csv(in);
  const auto a2 = t.require("alpha2"), a3 = t.require("alpha3"), nm = t.require("name"),
             ct = t.require("continent");
  for (const auto& row : t.rows) {
    auto c = parse_continent(row[ct]);
    if (!c) throw Error("country table: bad continent '" + row[ct] + "'");
    rows_.push_back({row[a2], row[a3], row[nm], *c});
  }
  std::sort(rows_.begin(), rows_.end(),
            [](const CountryInfo& a, const CountryInfo& b) { return a.alpha2 < b.alpha2; });
}

const CountryTable& CountryTable::instance() {
  static const CountryTable table;
  return table;
}

const CountryInfo* CountryTable::find(std::string_view alpha2) const {
  auto it = std::lower_bound(rows_.begin(), rows_.end(), alpha2,
                             [](const CountryInfo& r, std::string_view k) { return r.alpha2 < k; });
  if (it == rows_.end() || it->alpha2 != alpha2) return nullptr;
  return &*it;
}

const CountryInfo& CountryTable::at(std::string_view alpha2) const {
  if (const auto* c = find(alpha2)) return *c;
  throw InputError("unknown ISO-3166 alpha-2 country code '" + std::string(alpha2) + "'");
}

}  // namespace cubekit
