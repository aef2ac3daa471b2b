#include "solar/prompts.hpp"

#include "solar/ndjson.hpp"
#include "solar/util.hpp"

namespace solar {

namespace {

const char* kTemplateNames[] = {"schwartz_annotation", "conflict_annotation",
                                "tradeoff_annotation", "concept_naming", "judgment"};

}  // namespace

PromptTemplates PromptTemplates::load(const std::filesystem::path& dir) {
  PromptTemplates t;
  std::string combined;
  for (const char* name : kTemplateNames) {
    std::filesystem::path file = dir / (std::string(name) + ".txt");
    if (!std::filesystem::exists(file)) {
      throw Error("missing prompt template: " + file.string());
    }
    std::string text = ndjson::read_text(file);
    combined += name;
    combined += '\x1f';
    combined += text;
    combined += '\x1e';
    t.texts_[name] = std::move(text);
  }
  t.hash_ = fnv1a64_hex(combined);
  return t;
}

PromptTemplates PromptTemplates::load_default() {
  return load(SOLAR_DEFAULT_TEMPLATES_DIR);
}

const std::string& PromptTemplates::get(const std::string& name) const {
  auto it = texts_.find(name);
  if (it == texts_.end()) throw Error("unknown prompt template: " + name);
  return it->second;
}

std::string render_template(std::string_view text,
                            const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(text.size());
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t open = text.find('{', pos);
    if (open == std::string_view::npos) {
      out.append(text.substr(pos));
      break;
    }
    std::size_t close = text.find('}', open);
    if (close == std::string_view::npos) {
      out.append(text.substr(pos));
      break;
    }
    std::string key(text.substr(open + 1, close - open - 1));
    auto it = values.find(key);
    if (it != values.end()) {
      out.append(text.substr(pos, open - pos));
      out.append(it->second);
      pos = close + 1;
    } else {
      out.append(text.substr(pos, open - pos + 1));
      pos = open + 1;
    }
  }
  return out;
}

}  // namespace solar
