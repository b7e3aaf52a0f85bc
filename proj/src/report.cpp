#include "agnn/report.hpp"

#include <cstdio>
#include <fstream>

#include "agnn/version.hpp"

namespace agnn {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void RunReport::add(const std::string& key, const std::string& value) {
  entries.emplace_back(key, value);
}

void RunReport::add(const std::string& key, double value) {
  entries.emplace_back(key, format_double(value));
}

void RunReport::add(const std::string& key, long long value) {
  entries.emplace_back(key, std::to_string(value));
}

bool write_report(const std::string& path, const RunReport& report) {
  std::ofstream out(path);
  if (!out) return false;
  out << "command: " << report.command << "\n";
  out << "engine_version: " << kEngineVersion << "\n";
  for (const auto& [k, v] : report.entries) {
    out << k << ": " << v << "\n";
  }
  out.flush();
  return static_cast<bool>(out);
}

bool write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path);
  if (!out) return false;
  for (std::size_t j = 0; j < header.size(); ++j) {
    out << header[j] << (j + 1 == header.size() ? "" : ",");
  }
  out << "\n";
  for (const auto& row : rows) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      out << row[j] << (j + 1 == row.size() ? "" : ",");
    }
    out << "\n";
  }
  out.flush();
  return static_cast<bool>(out);
}

}  // namespace agnn
