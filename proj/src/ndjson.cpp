#include "solar/ndjson.hpp"

#include "solar/util.hpp"

#include <sstream>

namespace solar::ndjson {

void for_each_line(const std::filesystem::path& file,
                   const std::function<void(std::size_t, const std::string&)>& fn) {
  std::ifstream in(file);
  if (!in) throw Error("cannot open file: " + file.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    fn(line_no, line);
  }
}

std::vector<Json> read_file(const std::filesystem::path& file) {
  std::vector<Json> out;
  for_each_line(file, [&](std::size_t line_no, const std::string& line) {
    Json value = Json::parse(line, nullptr, false);
    if (value.is_discarded()) {
      throw ParseError(file.string() + ":" + std::to_string(line_no) + ": invalid JSON");
    }
    out.push_back(std::move(value));
  });
  return out;
}

Writer::Writer(const std::filesystem::path& file) : file_(file) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  out_.open(file, std::ios::trunc);
  if (!out_) throw Error("cannot open file for writing: " + file.string());
}

void Writer::write(const Json& value) {
  out_ << value.dump() << '\n';
  if (!out_) throw Error("write failed: " + file_.string());
}

void Writer::close() {
  if (out_.is_open()) out_.close();
}

void atomic_write(const std::filesystem::path& file, const std::string& content) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::filesystem::path tmp = file;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc | std::ios::binary);
    if (!out) throw Error("cannot open file for writing: " + tmp.string());
    out << content;
    if (!out) throw Error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, file);
}

std::string read_text(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error("cannot open file: " + file.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace solar::ndjson
