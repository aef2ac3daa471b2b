#pragma once

#include "solar/analytics.hpp"
#include "solar/corpus.hpp"
#include "solar/eval.hpp"
#include "solar/inference.hpp"
#include "solar/prompts.hpp"
#include "solar/providers.hpp"
#include "solar/retrieval.hpp"
#include "solar/values.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

namespace solar {

struct ChatProviderConfig : ProviderConfig {
  bool mock = false;
  std::string fixtures_file;  // scripted completions for the mock client
};

struct EmbeddingProviderConfig : ProviderConfig {
  bool mock = false;
  std::string cache_dir;
};

struct PipelineConfig {
  std::string corpus_input;
  std::string artifact_dir = "artifacts";
  std::string templates_dir;  // empty -> compile-time default

  std::uint64_t seed = 17;
  int k = 5;
  double threshold = 0.70;
  int sample_count = 2;
  std::size_t prompt_limit = kDefaultPromptLimit;

  int activity_threshold = 2000;
  int redditor_cap = 100;

  ClusteringParams clustering;  // min_cluster_size 100, threshold 0.95, dim 256

  int folds = 5;
  int skew_top_k = 3;
  std::int64_t min_support = 3;
  bool audit = true;

  ChatProviderConfig chat;
  EmbeddingProviderConfig embedding;

  static PipelineConfig from_file(const std::filesystem::path& file);
  static PipelineConfig from_json(const ndjson::Json& j);
  ndjson::Json to_json() const;

  /// Hash over the fields that decide artifact content (parameters, model
  /// names, dimensions) — not over local paths.
  std::string config_hash() const;
};

/// One manifest per artifact directory. Downstream commands refuse to read
/// artifacts produced under a different config, template set, or embedding
/// model.
struct Manifest {
  std::string config_hash;
  std::string template_hash;
  std::string embedding_model;
  std::map<std::string, std::string> artifacts;  // name -> path relative to the dir

  static std::optional<Manifest> load(const std::filesystem::path& dir);
  void save(const std::filesystem::path& dir) const;
};

struct PredictScope {
  bool test_fold_only = false;
  int fold = 0;
  std::string redditor;  // empty = all
};

/// Binds configuration, providers, templates and the artifact directory;
/// each method implements one CLI subcommand.
class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config);

  void ingest();
  void truncate_corpus();
  ndjson::Json corpus_stats();
  void annotate(const std::string& kind);  // schwartz | conflicts | tradeoffs
  void cluster();
  void embed();
  void index();
  void predict(const std::string& strategy_text, const std::string& input_text,
               const PredictScope& scope);
  ndjson::Json evaluate();
  void analyze(const std::string& kind);  // win-rates | distance | cooccurrence | project

  const PipelineConfig& config() const { return config_; }
  const PromptTemplates& templates() const { return templates_; }
  std::filesystem::path artifact_path(const std::string& name) const;

 private:
  void require_manifest_compatible();
  void register_artifact(const std::string& name, const std::string& relative_path);
  std::filesystem::path resolve_artifact(const std::string& name,
                                         const std::string& producer) const;

  Corpus load_working_corpus() const;
  AnnotationStore load_annotations(bool need_schwartz, bool need_conflicts,
                                   bool need_tradeoffs) const;
  EmbeddingStore load_embeddings() const;
  std::vector<ValueCluster> load_clusters() const;

  ChatClient& chat_client();
  EmbeddingClient& embedding_client();
  std::unique_ptr<EmbeddingClient> make_cluster_embedder();

  PipelineConfig config_;
  PromptTemplates templates_;
  std::unique_ptr<AuditLog> audit_;
  std::unique_ptr<ChatClient> chat_;
  std::unique_ptr<EmbeddingClient> embedding_;
  Manifest manifest_;
  bool mock_mode_ = false;
};

/// Runs `fn(i)` for i in [0, n) on up to `workers` threads. Exceptions are
/// captured and rethrown on the caller thread (first one wins).
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace solar
