#pragma once

// CSV emission for the command-line tool: 17-significant-digit reals, "inf"
// for infinities, a JSON config header on the first line.

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mfdl::cli {

// File-system failure (exit code 3).
class IoError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

std::string format_real(double v);

// A cell that may be left empty (e.g. a standard error from one instance).
std::string format_optional(std::optional<double> v);

// Infinite values become null; NaN as well.
nlohmann::json json_real(double v);

class CsvWriter {
  public:
    /// Opens dir/name and writes "# <header json>" plus an optional
    /// "# generated <timestamp>" line, then the column row.
    CsvWriter(const std::filesystem::path& dir, const std::string& name, const nlohmann::json& header,
              bool timestamp, const std::vector<std::string>& columns);

    void row(const std::vector<std::string>& cells);
    const std::filesystem::path& path() const { return path_; }
    void close();

  private:
    std::filesystem::path path_;
    std::ofstream out_;
    std::size_t columns_ = 0;
};

void write_json_file(const std::filesystem::path& dir, const std::string& name, const nlohmann::json& header,
                     bool timestamp, const nlohmann::json& body);

}  // namespace mfdl::cli
