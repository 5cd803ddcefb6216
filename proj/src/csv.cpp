#include "hsd/csv.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "hsd/error.hpp"

namespace hsd::csv {

std::optional<Row> Reader::next() {
  Row row;
  std::string field;
  bool in_quotes = false;
  bool any = false;
  bool field_quoted = false;
  row.line = line_ + 1;
  int c;
  while ((c = in_.get()) != std::char_traits<char>::eof()) {
    any = true;
    const char ch = static_cast<char>(c);
    if (in_quotes) {
      if (ch == '"') {
        if (in_.peek() == '"') {
          in_.get();
          field += '"';
        } else {
          in_quotes = false;
        }
      } else {
        if (ch == '\n') ++line_;
        field += ch;
      }
      continue;
    }
    if (ch == '"' && field.empty() && !field_quoted) {
      in_quotes = true;
      field_quoted = true;
    } else if (ch == ',') {
      row.fields.push_back(std::move(field));
      field.clear();
      field_quoted = false;
    } else if (ch == '\r') {
      if (in_.peek() == '\n') continue;
      ++line_;
      row.fields.push_back(std::move(field));
      return row;
    } else if (ch == '\n') {
      ++line_;
      row.fields.push_back(std::move(field));
      return row;
    } else {
      field += ch;
    }
  }
  if (in_quotes) {
    throw Error(ErrorCode::kMalformedRow,
                "unterminated quoted field starting on line " + std::to_string(row.line));
  }
  if (!any) return std::nullopt;
  row.fields.push_back(std::move(field));
  ++line_;
  return row;
}

std::vector<Row> read_all(std::istream& in) {
  Reader reader(in);
  std::vector<Row> rows;
  while (auto row = reader.next()) {
    // skip blank lines
    if (row->fields.size() == 1 && row->fields[0].empty()) continue;
    rows.push_back(std::move(*row));
  }
  return rows;
}

std::vector<Row> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot read " + path.string());
  auto rows = read_all(in);
  // strip a UTF-8 byte order mark from the header
  if (!rows.empty() && !rows[0].fields.empty() && rows[0].fields[0].rfind("\xEF\xBB\xBF", 0) == 0) {
    rows[0].fields[0].erase(0, 3);
  }
  return rows;
}

std::string escape(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

void write_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    out << escape(fields[i]);
  }
  out << '\n';
}

std::optional<std::size_t> find_column(const std::vector<std::string>& header,
                                       const std::string& name) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  return std::nullopt;
}

}  // namespace hsd::csv
