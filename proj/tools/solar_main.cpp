#include "solar/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

using solar::PipelineConfig;

struct CommonFlags {
  std::string config_file;
  std::string artifact_dir;
  std::string corpus_input;
  std::string templates_dir;
  int k = -1;
  double threshold = -1;
  int sample_count = -1;
  std::int64_t seed = -1;
  int activity_threshold = -1;
  int redditor_cap = -1;
  int min_cluster_size = -1;
  double assignment_threshold = -1;
  int cluster_embed_dim = -1;
  int embedding_dim = -1;
  int folds = -1;
  bool mock = false;
  std::string chat_fixtures;
  bool no_audit = false;
};

void add_common(CLI::App* app, CommonFlags& flags) {
  app->add_option("--config", flags.config_file, "pipeline config JSON");
  app->add_option("--artifacts", flags.artifact_dir, "artifact directory");
  app->add_option("--corpus", flags.corpus_input, "input corpus (newline-delimited JSON)");
  app->add_option("--templates", flags.templates_dir, "prompt template directory");
  app->add_option("-k,--k", flags.k, "retrieved exemplars per prediction");
  app->add_option("--threshold", flags.threshold, "controversiality agreement threshold");
  app->add_option("--sample-count", flags.sample_count, "completions sampled per prediction");
  app->add_option("--seed", flags.seed, "pipeline seed");
  app->add_option("--activity-threshold", flags.activity_threshold,
                  "minimum instance count for anchor redditors");
  app->add_option("--redditor-cap", flags.redditor_cap, "redditors kept after truncation");
  app->add_option("--min-cluster-size", flags.min_cluster_size, "minimum value cluster size");
  app->add_option("--assignment-threshold", flags.assignment_threshold,
                  "leftover-to-centroid assignment distance bound");
  app->add_option("--cluster-embed-dim", flags.cluster_embed_dim,
                  "embedding dimension for value clustering");
  app->add_option("--embedding-dim", flags.embedding_dim, "embedding dimension for retrieval");
  app->add_option("--folds", flags.folds, "evaluation folds");
  app->add_flag("--mock", flags.mock, "use the deterministic offline providers");
  app->add_option("--chat-fixtures", flags.chat_fixtures, "scripted completions for --mock");
  app->add_flag("--no-audit", flags.no_audit, "disable the provider audit log");
}

PipelineConfig resolve_config(const CommonFlags& flags) {
  PipelineConfig config = flags.config_file.empty()
                              ? PipelineConfig::from_json(solar::ndjson::Json::object())
                              : PipelineConfig::from_file(flags.config_file);
  if (!flags.artifact_dir.empty()) config.artifact_dir = flags.artifact_dir;
  if (!flags.corpus_input.empty()) config.corpus_input = flags.corpus_input;
  if (!flags.templates_dir.empty()) config.templates_dir = flags.templates_dir;
  if (flags.k >= 0) config.k = flags.k;
  if (flags.threshold >= 0) config.threshold = flags.threshold;
  if (flags.sample_count >= 0) config.sample_count = flags.sample_count;
  if (flags.seed >= 0) {
    config.seed = static_cast<std::uint64_t>(flags.seed);
    config.clustering.seed = config.seed;
  }
  if (flags.activity_threshold >= 0) config.activity_threshold = flags.activity_threshold;
  if (flags.redditor_cap >= 0) config.redditor_cap = flags.redditor_cap;
  if (flags.min_cluster_size >= 0) config.clustering.min_cluster_size = flags.min_cluster_size;
  if (flags.assignment_threshold >= 0) {
    config.clustering.assignment_threshold = flags.assignment_threshold;
  }
  if (flags.cluster_embed_dim >= 0) config.clustering.embed_dim = flags.cluster_embed_dim;
  if (flags.embedding_dim >= 0) config.embedding.embedding_dim = flags.embedding_dim;
  if (flags.folds >= 0) config.folds = flags.folds;
  if (flags.mock) {
    config.chat.mock = true;
    config.embedding.mock = true;
  }
  if (!flags.chat_fixtures.empty()) config.chat.fixtures_file = flags.chat_fixtures;
  if (flags.no_audit) config.audit = false;
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"subjective-ground retrieval and judgment inference pipeline"};
  app.require_subcommand(1);

  CommonFlags flags;

  auto* cmd_ingest = app.add_subcommand("ingest", "load and validate the raw corpus");
  add_common(cmd_ingest, flags);

  auto* cmd_truncate =
      app.add_subcommand("truncate", "restrict the corpus to active redditors' neighborhoods");
  add_common(cmd_truncate, flags);

  auto* cmd_stats = app.add_subcommand("stats", "corpus summary counts");
  add_common(cmd_stats, flags);

  auto* cmd_annotate = app.add_subcommand("annotate", "run value annotation prompts");
  std::string annotate_kind;
  cmd_annotate->add_option("kind", annotate_kind, "schwartz|conflicts|tradeoffs")->required();
  add_common(cmd_annotate, flags);

  auto* cmd_cluster = app.add_subcommand("cluster", "group value phrases into concepts");
  add_common(cmd_cluster, flags);

  auto* cmd_embed = app.add_subcommand("embed", "embed situations and value texts");
  add_common(cmd_embed, flags);

  auto* cmd_index = app.add_subcommand("index", "build per-redditor history stores");
  add_common(cmd_index, flags);

  auto* cmd_predict = app.add_subcommand("predict", "infer judgments for test instances");
  std::string strategy = "solar";
  std::string input_variant = "comment_tradeoff";
  std::string scope_redditor;
  bool test_fold_only = false;
  int fold = 0;
  cmd_predict->add_option("--strategy", strategy, "situation|schwartz|tradeoff|solar");
  cmd_predict->add_option("--input", input_variant, "comment|tradeoff|schwartz");
  cmd_predict->add_option("--redditor", scope_redditor, "restrict to one redditor");
  cmd_predict->add_flag("--test-fold", test_fold_only, "predict only the test fold instances");
  cmd_predict->add_option("--fold", fold, "fold index for --test-fold");
  add_common(cmd_predict, flags);

  auto* cmd_evaluate = app.add_subcommand("evaluate", "score predictions against gold judgments");
  add_common(cmd_evaluate, flags);

  auto* cmd_analyze = app.add_subcommand("analyze", "derived analytics and plots");
  std::string analyze_kind;
  cmd_analyze->add_option("kind", analyze_kind, "win-rates|distance|cooccurrence|project")
      ->required();
  add_common(cmd_analyze, flags);

  CLI11_PARSE(app, argc, argv);

  try {
    solar::Pipeline pipeline(resolve_config(flags));
    if (cmd_ingest->parsed()) {
      pipeline.ingest();
    } else if (cmd_truncate->parsed()) {
      pipeline.truncate_corpus();
    } else if (cmd_stats->parsed()) {
      std::cout << pipeline.corpus_stats().dump(2) << "\n";
    } else if (cmd_annotate->parsed()) {
      pipeline.annotate(annotate_kind);
    } else if (cmd_cluster->parsed()) {
      pipeline.cluster();
    } else if (cmd_embed->parsed()) {
      pipeline.embed();
    } else if (cmd_index->parsed()) {
      pipeline.index();
    } else if (cmd_predict->parsed()) {
      solar::PredictScope scope;
      scope.test_fold_only = test_fold_only;
      scope.fold = fold;
      scope.redditor = scope_redditor;
      pipeline.predict(strategy, input_variant, scope);
    } else if (cmd_evaluate->parsed()) {
      std::cout << pipeline.evaluate().dump(2) << "\n";
    } else if (cmd_analyze->parsed()) {
      pipeline.analyze(analyze_kind);
    }
  } catch (const std::exception& e) {
    solar::ndjson::Json error;
    error["error"] = e.what();
    std::cerr << error.dump() << "\n";
    return 1;
  }
  return 0;
}
