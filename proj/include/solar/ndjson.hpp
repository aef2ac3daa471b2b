#pragma once

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

namespace solar::ndjson {

using Json = nlohmann::ordered_json;

/// Calls `fn(line_number, line)` for every non-blank line. Line numbers are
/// 1-based. Parsing is left to the caller so malformed lines can be
/// quarantined instead of aborting the scan.
void for_each_line(const std::filesystem::path& file,
                   const std::function<void(std::size_t, const std::string&)>& fn);

/// Parses every non-blank line as JSON; throws ParseError on the first bad line.
std::vector<Json> read_file(const std::filesystem::path& file);

/// Serializes one value per line.
class Writer {
 public:
  explicit Writer(const std::filesystem::path& file);
  void write(const Json& value);
  void close();

 private:
  std::ofstream out_;
  std::filesystem::path file_;
};

/// Writes `content` to `file` via a temp file and rename, so readers never
/// observe a partial write.
void atomic_write(const std::filesystem::path& file, const std::string& content);

std::string read_text(const std::filesystem::path& file);

}  // namespace solar::ndjson
