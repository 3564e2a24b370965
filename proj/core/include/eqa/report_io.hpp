#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace eqa {

// Shortest text that parses back to the same double ("%.17g"); nan and
// inf are spelled "nan", "inf", "-inf".
std::string format_number(double x);

// Quotes a field when it contains a comma, quote or line break.
std::string csv_escape(const std::string& field);

// RFC-4180 style writer: header first, rows appended and flushed one by one.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);
  void row(const std::vector<std::string>& fields);
  std::size_t columns() const noexcept { return columns_; }

 private:
  std::ofstream out_;
  std::size_t columns_;
};

// Pretty-printed JSON with a trailing newline, written via a temporary file.
void write_json(const std::filesystem::path& path, const nlohmann::json& doc);

// Creates the directory and checks that a file can be written in it.
void ensure_writable_dir(const std::filesystem::path& dir);

}  // namespace eqa
