#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace solar {

/// Prompt templates loaded from versioned text files. The hash guards against
/// mixing annotations produced under different template versions.
class PromptTemplates {
 public:
  static PromptTemplates load(const std::filesystem::path& dir);
  static PromptTemplates load_default();

  const std::string& schwartz() const { return get("schwartz_annotation"); }
  const std::string& conflicts() const { return get("conflict_annotation"); }
  const std::string& tradeoffs() const { return get("tradeoff_annotation"); }
  const std::string& concept_naming() const { return get("concept_naming"); }
  const std::string& judgment() const { return get("judgment"); }

  const std::string& hash() const { return hash_; }

 private:
  const std::string& get(const std::string& name) const;

  std::map<std::string, std::string> texts_;
  std::string hash_;
};

/// Replaces every occurrence of "{key}" in a single pass; values containing
/// placeholder syntax are not re-expanded.
std::string render_template(std::string_view text,
                            const std::map<std::string, std::string>& values);

}  // namespace solar
