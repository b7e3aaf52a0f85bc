#pragma once

#include <string>
#include <utility>
#include <vector>

namespace agnn {

/// Key-value report document. Values are preformatted strings; doubles go
/// through format_double so reruns are byte-identical.
struct RunReport {
  std::string command;
  std::vector<std::pair<std::string, std::string>> entries;

  void add(const std::string& key, const std::string& value);
  void add(const std::string& key, double value);
  void add(const std::string& key, long long value);
};

/// Shortest round-trip decimal form ("%.17g").
std::string format_double(double v);

/// Writes "key: value" lines (command, engine_version first; wall-clock last
/// by caller convention). Returns false on I/O failure.
bool write_report(const std::string& path, const RunReport& report);

/// RFC-4180-style CSV: header row first, LF line endings, plain fields.
bool write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

}  // namespace agnn
