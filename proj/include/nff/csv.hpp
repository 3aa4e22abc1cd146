#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace nff {

inline constexpr int kCsvFormatVersion = 1;

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

/// Writes "# format_version=1", the header row, then data rows. Fields with
/// commas or quotes are quoted.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);

  void row(const std::vector<std::string>& fields);
  void row(const std::vector<double>& values);
  void close();

 private:
  void write_fields(const std::vector<std::string>& fields);

  std::filesystem::path path_;
  std::ofstream out_;
  std::size_t columns_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  /// Values of the "# key=value" comment lines preceding the header.
  std::vector<std::pair<std::string, std::string>> comments;

  std::size_t column(const std::string& name) const;
  std::vector<double> numeric_column(const std::string& name) const;
};

/// Throws DataError if the file is missing, lacks a header or has ragged rows.
CsvTable read_csv(const std::filesystem::path& path);

}  // namespace nff
