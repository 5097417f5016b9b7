#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace ddlab {

// Shortest round-trip decimal form of a double (to_chars), "nan"/"inf" spelled
// out so spreadsheets keep the column numeric-ish.
std::string fmt_double(double v);

// Comma-separated, LF line endings, UTF-8, header row first. Fields containing
// a comma, quote, or newline are quoted with doubled inner quotes. The file is
// written atomically on save().
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);

  void add_row(std::vector<std::string> fields);  // LengthMismatch on arity
  std::string to_string() const;
  void save(const std::filesystem::path& path) const;
  std::size_t rows() const { return rows_.size(); }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

}  // namespace ddlab
