#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cubekit::io {

using Row = std::vector<std::string>;

/// Minimal RFC 4180 reader: quoted fields, doubled quotes, CRLF tolerated.
/// Lines starting with '#' outside a quoted field are skipped.
class CsvReader {
 public:
  explicit CsvReader(std::istream& in) : in_(in) {}

  /// Reads the next record. Returns false at end of input.
  bool next(Row& row);
  /// 1-based physical line number where the last record started.
  std::size_t line() const { return record_line_; }

 private:
  std::istream& in_;
  std::size_t line_ = 0;
  std::size_t record_line_ = 0;
};

/// A CSV file with a header row. Column lookup is by name.
struct CsvTable {
  Row header;
  std::vector<Row> rows;
  std::vector<std::size_t> lines;  // source line per row

  std::optional<std::size_t> column(std::string_view name) const;
  /// Throws InputError naming the missing column.
  std::size_t require(std::string_view name) const;
};

CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::filesystem::path& path);

std::string csv_escape(std::string_view field);
std::string csv_line(const Row& fields);

/// Writes `contents` to a sibling temp file then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

/// Parses a full-string double; throws InputError mentioning `what` otherwise.
double parse_double(std::string_view s, std::string_view what);
long long parse_int(std::string_view s, std::string_view what);

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

/// 64-bit FNV-1a; used for request keys and file digests.
std::uint64_t fnv1a(std::string_view data);
std::string hex64(std::uint64_t v);

}  // namespace cubekit::io
