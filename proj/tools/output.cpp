#include "output.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>

namespace mfdl::cli {

namespace {

std::string timestamp_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::ofstream open_in(const std::filesystem::path& dir, const std::string& name, std::filesystem::path& path) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
    path = dir / name;
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    return out;
}

}  // namespace

std::string format_real(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string format_optional(std::optional<double> v) {
    if (!v || std::isnan(*v)) return "";
    return format_real(*v);
}

nlohmann::json json_real(double v) {
    if (!std::isfinite(v)) return nullptr;
    return v;
}

CsvWriter::CsvWriter(const std::filesystem::path& dir, const std::string& name, const nlohmann::json& header,
                     bool timestamp, const std::vector<std::string>& columns)
    : columns_(columns.size()) {
    out_ = open_in(dir, name, path_);
    out_ << "# " << header.dump() << '\n';
    if (timestamp) out_ << "# generated " << timestamp_now() << '\n';
    row(columns);
}

void CsvWriter::row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_) throw std::logic_error("csv row width mismatch in " + path_.string());
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out_ << ',';
        out_ << cells[i];
    }
    out_ << '\n';
    if (!out_) throw IoError("write failed on " + path_.string());
}

void CsvWriter::close() {
    out_.close();
    if (out_.fail()) throw IoError("closing " + path_.string() + " failed");
}

void write_json_file(const std::filesystem::path& dir, const std::string& name, const nlohmann::json& header,
                     bool timestamp, const nlohmann::json& body) {
    std::filesystem::path path;
    std::ofstream out = open_in(dir, name, path);
    // JSON has no comments: the header is the first member, alone on line one.
    out << "{\"config\": " << header.dump() << ",\n";
    if (timestamp) out << "\"generated\": " << nlohmann::json(timestamp_now()).dump() << ",\n";
    out << "\"data\": " << body.dump(1) << "}\n";
    if (!out) throw IoError("write failed on " + path.string());
}

}  // namespace mfdl::cli
