#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace hsd::csv {

struct Row {
  std::size_t line = 0;  // 1-based line where the record starts
  std::vector<std::string> fields;
};

// RFC 4180 reader: quoted fields may hold commas, doubled quotes and newlines.
class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}
  std::optional<Row> next();

 private:
  std::istream& in_;
  std::size_t line_ = 0;
};

std::vector<Row> read_all(std::istream& in);
std::vector<Row> read_file(const std::filesystem::path& path);

std::string escape(const std::string& field);
void write_row(std::ostream& out, const std::vector<std::string>& fields);

// Index of `name` in a header row, if present.
std::optional<std::size_t> find_column(const std::vector<std::string>& header,
                                       const std::string& name);

}  // namespace hsd::csv
