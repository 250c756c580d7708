#pragma once

#include <filesystem>
#include <initializer_list>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace lqt::csv {

// Shortest-safe round-trip formatting: 17 significant digits.
std::string format(double value);

// One CSV row; doubles are formatted with `format`.
class Row {
 public:
  Row& operator<<(double v);
  Row& operator<<(int v);
  Row& operator<<(long v);
  Row& operator<<(std::string_view v);
  Row& operator<<(bool v);
  const std::vector<std::string>& cells() const { return cells_; }

 private:
  std::vector<std::string> cells_;
};

void write_header(std::ostream& os, std::initializer_list<std::string_view> columns);
void write_row(std::ostream& os, const Row& row);

// Writes `contents` to `path`, creating parent directories. Throws
// InputError when the file cannot be written.
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace lqt::csv
