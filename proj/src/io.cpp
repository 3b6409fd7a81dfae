#include "cubekit/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cubekit/error.hpp"

namespace cubekit::io {

bool CsvReader::next(Row& row) {
  row.clear();
  std::string raw;
  while (true) {
    if (!std::getline(in_, raw)) return false;
    ++line_;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    if (raw.empty() || raw.front() == '#') continue;
    break;
  }
  record_line_ = line_;

  std::string field;
  bool quoted = false;
  std::size_t i = 0;
  while (true) {
    if (i == raw.size()) {
      if (!quoted) break;
      // Quoted field spans a newline.
      std::string more;
      if (!std::getline(in_, more)) {
        throw ParseError("unterminated quoted field", record_line_);
      }
      ++line_;
      if (!more.empty() && more.back() == '\r') more.pop_back();
      field += '\n';
      raw = std::move(more);
      i = 0;
      continue;
    }
    const char c = raw[i++];
    if (quoted) {
      if (c == '"') {
        if (i < raw.size() && raw[i] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
    } else {
      field += c;
    }
  }
  row.push_back(std::move(field));
  return true;
}

std::optional<std::size_t> CsvTable::column(std::string_view name) const {
  auto it = std::find_if(header.begin(), header.end(),
                         [&](const std::string& h) { return trim(h) == name; });
  if (it == header.end()) return std::nullopt;
  return static_cast<std::size_t>(it - header.begin());
}

std::size_t CsvTable::require(std::string_view name) const {
  if (auto c = column(name)) return *c;
  throw InputError("missing CSV column '" + std::string(name) + "'");
}

CsvTable read_csv(std::istream& in) {
  CsvTable t;
  CsvReader reader(in);
  Row row;
  if (!reader.next(t.header)) return t;
  while (reader.next(row)) {
    if (row.size() != t.header.size()) {
      throw ParseError("expected " + std::to_string(t.header.size()) + " fields, got " +
                           std::to_string(row.size()),
                       reader.line());
    }
    t.rows.push_back(row);
    t.lines.push_back(reader.line());
  }
  return t;
}

CsvTable read_csv_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  try {
    return read_csv(in);
  } catch (const ParseError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string csv_line(const Row& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += csv_escape(fields[i]);
  }
  out += '\n';
  return out;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double parse_double(std::string_view s, std::string_view what) {
  const std::string t = trim(s);
  double v = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    throw InputError("invalid number for " + std::string(what) + ": '" + t + "'");
  }
  return v;
}

long long parse_int(std::string_view s, std::string_view what) {
  const std::string t = trim(s);
  long long v = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    throw InputError("invalid integer for " + std::string(what) + ": '" + t + "'");
  }
  return v;
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::uint64_t fnv1a(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace cubekit::io
