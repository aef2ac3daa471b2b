#include "solar/pipeline.hpp"

#include "solar/svg.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace solar {

namespace {

constexpr const char* kManifestFile = "manifest.json";

std::string dump_sorted(const ndjson::Json& j) { return j.dump(); }

}  // namespace

PipelineConfig PipelineConfig::from_file(const std::filesystem::path& file) {
  return from_json(ndjson::Json::parse(ndjson::read_text(file)));
}

PipelineConfig PipelineConfig::from_json(const ndjson::Json& j) {
  PipelineConfig c;
  c.corpus_input = j.value("corpus_input", c.corpus_input);
  c.artifact_dir = j.value("artifact_dir", c.artifact_dir);
  c.templates_dir = j.value("templates_dir", c.templates_dir);
  c.seed = j.value("seed", c.seed);
  c.k = j.value("k", c.k);
  c.threshold = j.value("threshold", c.threshold);
  c.sample_count = j.value("sample_count", c.sample_count);
  c.prompt_limit = j.value("prompt_limit", c.prompt_limit);
  c.activity_threshold = j.value("activity_threshold", c.activity_threshold);
  c.redditor_cap = j.value("redditor_cap", c.redditor_cap);
  c.folds = j.value("folds", c.folds);
  c.skew_top_k = j.value("skew_top_k", c.skew_top_k);
  c.min_support = j.value("min_support", c.min_support);
  c.audit = j.value("audit", c.audit);

  if (j.contains("clustering")) {
    const auto& cl = j["clustering"];
    c.clustering.embed_dim = cl.value("embed_dim", c.clustering.embed_dim);
    c.clustering.reduce_dim = cl.value("reduce_dim", c.clustering.reduce_dim);
    c.clustering.min_cluster_size = cl.value("min_cluster_size", c.clustering.min_cluster_size);
    c.clustering.assignment_threshold =
        cl.value("assignment_threshold", c.clustering.assignment_threshold);
  }
  c.clustering.seed = c.seed;

  auto load_provider = [](const ndjson::Json& p, ProviderConfig& out) {
    out.endpoint = p.value("endpoint", out.endpoint);
    out.api_key_env = p.value("api_key_env", out.api_key_env);
    out.model_name = p.value("model_name", out.model_name);
    out.embedding_dim = p.value("embedding_dim", out.embedding_dim);
    out.max_parallel = p.value("max_parallel", out.max_parallel);
    out.retry_limit = p.value("retry_limit", out.retry_limit);
    out.retry_backoff_ms = p.value("retry_backoff_ms", out.retry_backoff_ms);
  };

  c.chat.model_name = "gpt-4.1";
  c.chat.api_key_env = "OPENAI_API_KEY";
  c.chat.endpoint = "https://api.openai.com";
  c.embedding.model_name = "text-embedding-3-large";
  c.embedding.api_key_env = "OPENAI_API_KEY";
  c.embedding.endpoint = "https://api.openai.com";
  c.embedding.embedding_dim = 3072;

  if (j.contains("chat")) {
    load_provider(j["chat"], c.chat);
    c.chat.mock = j["chat"].value("mock", false);
    c.chat.fixtures_file = j["chat"].value("fixtures", "");
  }
  if (j.contains("embedding")) {
    load_provider(j["embedding"], c.embedding);
    c.embedding.mock = j["embedding"].value("mock", false);
    c.embedding.cache_dir = j["embedding"].value("cache_dir", "");
  }
  return c;
}

ndjson::Json PipelineConfig::to_json() const {
  ndjson::Json j;
  j["corpus_input"] = corpus_input;
  j["artifact_dir"] = artifact_dir;
  j["templates_dir"] = templates_dir;
  j["seed"] = seed;
  j["k"] = k;
  j["threshold"] = threshold;
  j["sample_count"] = sample_count;
  j["prompt_limit"] = prompt_limit;
  j["activity_threshold"] = activity_threshold;
  j["redditor_cap"] = redditor_cap;
  j["folds"] = folds;
  j["skew_top_k"] = skew_top_k;
  j["min_support"] = min_support;
  j["audit"] = audit;
  j["clustering"] = {{"embed_dim", clustering.embed_dim},
                     {"reduce_dim", clustering.reduce_dim},
                     {"min_cluster_size", clustering.min_cluster_size},
                     {"assignment_threshold", clustering.assignment_threshold}};
  j["chat"] = {{"endpoint", chat.endpoint},
               {"api_key_env", chat.api_key_env},
               {"model_name", chat.model_name},
               {"max_parallel", chat.max_parallel},
               {"retry_limit", chat.retry_limit},
               {"retry_backoff_ms", chat.retry_backoff_ms},
               {"mock", chat.mock},
               {"fixtures", chat.fixtures_file}};
  j["embedding"] = {{"endpoint", embedding.endpoint},
                    {"api_key_env", embedding.api_key_env},
                    {"model_name", embedding.model_name},
                    {"embedding_dim", embedding.embedding_dim},
                    {"max_parallel", embedding.max_parallel},
                    {"retry_limit", embedding.retry_limit},
                    {"retry_backoff_ms", embedding.retry_backoff_ms},
                    {"mock", embedding.mock},
                    {"cache_dir", embedding.cache_dir}};
  return j;
}

std::string PipelineConfig::config_hash() const {
  ndjson::Json j;
  j["seed"] = seed;
  j["k"] = k;
  j["threshold"] = threshold;
  j["sample_count"] = sample_count;
  j["prompt_limit"] = prompt_limit;
  j["activity_threshold"] = activity_threshold;
  j["redditor_cap"] = redditor_cap;
  j["folds"] = folds;
  j["min_support"] = min_support;
  j["clustering"] = {{"embed_dim", clustering.embed_dim},
                     {"reduce_dim", clustering.reduce_dim},
                     {"min_cluster_size", clustering.min_cluster_size},
                     {"assignment_threshold", clustering.assignment_threshold}};
  j["chat_model"] = chat.model_name;
  j["chat_mock"] = chat.mock;
  j["embedding_model"] = embedding.model_name;
  j["embedding_dim"] = embedding.embedding_dim;
  j["embedding_mock"] = embedding.mock;
  return fnv1a64_hex(dump_sorted(j));
}

std::optional<Manifest> Manifest::load(const std::filesystem::path& dir) {
  std::filesystem::path file = dir / kManifestFile;
  if (!std::filesystem::exists(file)) return std::nullopt;
  ndjson::Json j = ndjson::Json::parse(ndjson::read_text(file));
  Manifest m;
  m.config_hash = j.value("config_hash", "");
  m.template_hash = j.value("template_hash", "");
  m.embedding_model = j.value("embedding_model", "");
  if (j.contains("artifacts")) {
    for (const auto& [name, path] : j["artifacts"].items()) {
      m.artifacts[name] = path.get<std::string>();
    }
  }
  return m;
}

void Manifest::save(const std::filesystem::path& dir) const {
  ndjson::Json j;
  j["config_hash"] = config_hash;
  j["template_hash"] = template_hash;
  j["embedding_model"] = embedding_model;
  ndjson::Json arts = ndjson::Json::object();
  for (const auto& [name, path] : artifacts) arts[name] = path;
  j["artifacts"] = std::move(arts);
  ndjson::atomic_write(dir / kManifestFile, j.dump(2) + "\n");
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  workers = std::max(1, std::min<int>(workers, static_cast<int>(n)));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::mutex error_mu;
  std::exception_ptr first_error;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

Pipeline::Pipeline(PipelineConfig config)
    : config_(std::move(config)),
      templates_(config_.templates_dir.empty() ? PromptTemplates::load_default()
                                               : PromptTemplates::load(config_.templates_dir)) {
  std::filesystem::create_directories(config_.artifact_dir);
  mock_mode_ = config_.chat.mock && config_.embedding.mock;
  require_manifest_compatible();
}

void Pipeline::require_manifest_compatible() {
  auto existing = Manifest::load(config_.artifact_dir);
  if (existing) {
    auto mismatch = [&](const std::string& what, const std::string& got,
                        const std::string& expect) {
      throw Error("manifest mismatch in " + config_.artifact_dir + ": " + what + " is " + got +
                  " but current configuration gives " + expect +
                  "; use a fresh artifact directory or matching configuration");
    };
    if (existing->config_hash != config_.config_hash()) {
      mismatch("config hash", existing->config_hash, config_.config_hash());
    }
    if (existing->template_hash != templates_.hash()) {
      mismatch("template hash", existing->template_hash, templates_.hash());
    }
    if (existing->embedding_model != config_.embedding.model_name) {
      mismatch("embedding model", existing->embedding_model, config_.embedding.model_name);
    }
    manifest_ = *existing;
  } else {
    manifest_.config_hash = config_.config_hash();
    manifest_.template_hash = templates_.hash();
    manifest_.embedding_model = config_.embedding.model_name;
    manifest_.save(config_.artifact_dir);
  }
}

std::filesystem::path Pipeline::artifact_path(const std::string& name) const {
  return std::filesystem::path(config_.artifact_dir) / name;
}

void Pipeline::register_artifact(const std::string& name, const std::string& relative_path) {
  manifest_.artifacts[name] = relative_path;
  manifest_.save(config_.artifact_dir);
}

std::filesystem::path Pipeline::resolve_artifact(const std::string& name,
                                                 const std::string& producer) const {
  auto it = manifest_.artifacts.find(name);
  if (it == manifest_.artifacts.end()) {
    throw Error("missing artifact \"" + name + "\"; run the `" + producer +
                "` subcommand first");
  }
  return std::filesystem::path(config_.artifact_dir) / it->second;
}

ChatClient& Pipeline::chat_client() {
  if (!chat_) {
    if (config_.audit && !audit_) {
      audit_ = std::make_unique<AuditLog>(
          artifact_path("audit") / "provider_calls.ndjson",
          mock_mode_ ? AuditLog::logical_clock() : AuditLog::wall_clock());
    }
    if (config_.chat.mock) {
      if (config_.chat.fixtures_file.empty()) {
        throw Error("mock chat provider requires a fixtures file");
      }
      chat_ = std::make_unique<MockChatClient>(
          MockChatClient::load_rules(config_.chat.fixtures_file), audit_.get());
    } else {
      chat_ = std::make_unique<HttpChatClient>(config_.chat, audit_.get());
    }
  }
  return *chat_;
}

EmbeddingClient& Pipeline::embedding_client() {
  if (!embedding_) {
    if (config_.audit && !audit_) {
      audit_ = std::make_unique<AuditLog>(
          artifact_path("audit") / "provider_calls.ndjson",
          mock_mode_ ? AuditLog::logical_clock() : AuditLog::wall_clock());
    }
    if (config_.embedding.mock) {
      embedding_ = std::make_unique<MockEmbeddingClient>(config_.embedding.embedding_dim,
                                                         audit_.get());
    } else {
      embedding_ = std::make_unique<HttpEmbeddingClient>(
          config_.embedding, audit_.get(),
          config_.embedding.cache_dir.empty() ? std::filesystem::path{}
                                              : std::filesystem::path(config_.embedding.cache_dir));
    }
  }
  return *embedding_;
}

std::unique_ptr<EmbeddingClient> Pipeline::make_cluster_embedder() {
  if (config_.embedding.mock) {
    return std::make_unique<MockEmbeddingClient>(config_.clustering.embed_dim, audit_.get());
  }
  EmbeddingProviderConfig cfg = config_.embedding;
  cfg.embedding_dim = config_.clustering.embed_dim;
  return std::make_unique<HttpEmbeddingClient>(
      cfg, audit_.get(),
      cfg.cache_dir.empty() ? std::filesystem::path{} : std::filesystem::path(cfg.cache_dir));
}

void Pipeline::ingest() {
  if (config_.corpus_input.empty()) throw Error("ingest requires corpus_input");
  IngestResult result = ingest_ndjson(config_.corpus_input);

  write_corpus_ndjson(result.corpus, artifact_path("corpus.ndjson"));

  std::string issues;
  for (const IngestIssue& issue : result.issues) {
    ndjson::Json j;
    j["line"] = issue.line_no;
    j["message"] = issue.message;
    j["raw"] = issue.raw;
    issues += j.dump() + "\n";
  }
  ndjson::atomic_write(artifact_path("ingest_issues.ndjson"), issues);

  register_artifact("raw_corpus", "corpus.ndjson");
  register_artifact("working_corpus", "corpus.ndjson");
  register_artifact("ingest_issues", "ingest_issues.ndjson");

  std::cout << "ingested " << result.corpus.instances.size() << " instances, "
            << result.corpus.situations.size() << " situations, "
            << result.corpus.redditors.size() << " redditors; " << result.issues.size()
            << " quarantined record(s)\n";
}

Corpus Pipeline::load_working_corpus() const {
  std::filesystem::path file = resolve_artifact("working_corpus", "ingest");
  IngestResult result = ingest_ndjson(file);
  if (!result.issues.empty()) {
    throw Error("working corpus is corrupt: " + result.issues.front().message);
  }
  return std::move(result.corpus);
}

void Pipeline::truncate_corpus() {
  Corpus working = load_working_corpus();
  Corpus truncated = truncate(working, config_.activity_threshold, config_.redditor_cap);
  write_corpus_ndjson(truncated, artifact_path("corpus_truncated.ndjson"));
  register_artifact("working_corpus", "corpus_truncated.ndjson");
  std::cout << "truncated to " << truncated.instances.size() << " instances, "
            << truncated.situations.size() << " situations, " << truncated.redditors.size()
            << " redditors\n";
}

ndjson::Json Pipeline::corpus_stats() {
  Corpus working = load_working_corpus();
  CorpusStats s = stats(working, static_cast<std::size_t>(config_.skew_top_k));
  ndjson::Json j = stats_to_json(s);
  ndjson::atomic_write(artifact_path("stats.json"), j.dump(2) + "\n");
  register_artifact("stats", "stats.json");
  return j;
}

void Pipeline::annotate(const std::string& kind) {
  Corpus corpus = load_working_corpus();
  ChatClient& chat = chat_client();
  const int workers = mock_mode_ ? 1 : config_.chat.max_parallel;

  struct Failure {
    std::string key;
    std::string message;
  };
  std::vector<Failure> failures;
  std::mutex failures_mu;

  if (kind == "schwartz" || kind == "tradeoffs") {
    std::vector<const Instance*> targets;
    for (const Instance& inst : corpus.instances) {
      if (inst.judgment) targets.push_back(&inst);
    }
    std::sort(targets.begin(), targets.end(), [](const Instance* a, const Instance* b) {
      return a->instance_id < b->instance_id;
    });

    AnnotationStore conflicts_store;
    if (kind == "tradeoffs") {
      conflicts_store = load_annotations(false, true, false);
    }

    std::vector<std::string> lines(targets.size());
    EmbeddingClient* matcher = kind == "tradeoffs" ? &embedding_client() : nullptr;

    parallel_for(targets.size(), workers, [&](std::size_t i) {
      const Instance& inst = *targets[i];
      const Situation& situation = corpus.situation(inst.situation_id);
      try {
        ndjson::Json j;
        if (kind == "schwartz") {
          SchwartzAnnotation ann =
              annotate_schwartz(situation, inst.comment, chat, templates_, config_.prompt_limit);
          j["instance_id"] = inst.instance_id;
          j["situation_values"] = {schwartz_name(ann.situation_values[0]),
                                   schwartz_name(ann.situation_values[1])};
          j["comment_values"] = {schwartz_name(ann.comment_values[0]),
                                 schwartz_name(ann.comment_values[1])};
        } else {
          auto conflict_it = conflicts_store.conflicts_by_situation.find(inst.situation_id);
          if (conflict_it == conflicts_store.conflicts_by_situation.end()) {
            throw Error("no conflict annotation for situation " + inst.situation_id);
          }
          std::vector<TradeOff> tradeoffs =
              annotate_tradeoffs(situation, conflict_it->second, inst.comment, inst.instance_id,
                                 chat, templates_, matcher, config_.prompt_limit);
          j["instance_id"] = inst.instance_id;
          ndjson::Json arr = ndjson::Json::array();
          for (const TradeOff& t : tradeoffs) {
            arr.push_back({{"preferred", t.preferred},
                           {"rejected", t.rejected},
                           {"model_generated", t.model_generated}});
          }
          j["tradeoffs"] = std::move(arr);
        }
        j["template_hash"] = templates_.hash();
        lines[i] = j.dump();
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(failures_mu);
        failures.push_back({inst.instance_id, e.what()});
      }
    });

    std::string body;
    for (const std::string& line : lines) {
      if (!line.empty()) body += line + "\n";
    }
    std::string artifact = kind == "schwartz" ? "schwartz.ndjson" : "tradeoffs.ndjson";
    ndjson::atomic_write(artifact_path(artifact), body);
    register_artifact(kind, artifact);
  } else if (kind == "conflicts") {
    std::vector<const Situation*> targets;
    for (const auto& [sid, situation] : corpus.situations) targets.push_back(&situation);

    std::vector<std::string> lines(targets.size());
    parallel_for(targets.size(), workers, [&](std::size_t i) {
      const Situation& situation = *targets[i];
      try {
        std::vector<ValueConflict> conflicts =
            annotate_conflicts(situation, chat, templates_, config_.prompt_limit);
        ndjson::Json j;
        j["situation_id"] = situation.situation_id;
        ndjson::Json arr = ndjson::Json::array();
        for (const ValueConflict& c : conflicts) {
          arr.push_back({{"a", c.value_a}, {"b", c.value_b}});
        }
        j["conflicts"] = std::move(arr);
        j["template_hash"] = templates_.hash();
        lines[i] = j.dump();
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(failures_mu);
        failures.push_back({situation.situation_id, e.what()});
      }
    });

    std::string body;
    for (const std::string& line : lines) {
      if (!line.empty()) body += line + "\n";
    }
    ndjson::atomic_write(artifact_path("conflicts.ndjson"), body);
    register_artifact("conflicts", "conflicts.ndjson");
  } else {
    throw Error("unknown annotate kind: " + kind + " (expected schwartz|conflicts|tradeoffs)");
  }

  if (!failures.empty()) {
    std::sort(failures.begin(), failures.end(),
              [](const Failure& a, const Failure& b) { return a.key < b.key; });
    std::string body;
    for (const Failure& f : failures) {
      body += ndjson::Json{{"key", f.key}, {"message", f.message}}.dump() + "\n";
    }
    std::string artifact = "annotate_failures_" + kind + ".ndjson";
    ndjson::atomic_write(artifact_path(artifact), body);
    throw Error(std::to_string(failures.size()) + " " + kind +
                " annotation(s) failed; see " + artifact);
  }
}

AnnotationStore Pipeline::load_annotations(bool need_schwartz, bool need_conflicts,
                                           bool need_tradeoffs) const {
  AnnotationStore store;
  store.template_hash = templates_.hash();

  auto check_hash = [&](const ndjson::Json& j, const std::filesystem::path& file) {
    std::string h = j.value("template_hash", "");
    if (h != templates_.hash()) {
      throw Error("annotation in " + file.string() + " was produced with template hash " + h +
                  ", current is " + templates_.hash() + "; re-run annotate");
    }
  };

  if (need_schwartz) {
    std::filesystem::path file = resolve_artifact("schwartz", "annotate schwartz");
    for (const ndjson::Json& j : ndjson::read_file(file)) {
      check_hash(j, file);
      SchwartzAnnotation ann;
      auto parse_pair = [&](const char* key) {
        const auto& arr = j.at(key);
        std::array<SchwartzValue, 2> out{};
        for (int i = 0; i < 2; ++i) {
          auto v = parse_schwartz(arr[static_cast<std::size_t>(i)].get<std::string>());
          if (!v) throw Error("bad Schwartz value in " + file.string());
          out[static_cast<std::size_t>(i)] = *v;
        }
        return out;
      };
      ann.situation_values = parse_pair("situation_values");
      ann.comment_values = parse_pair("comment_values");
      store.schwartz_by_instance[j.at("instance_id").get<std::string>()] = ann;
    }
  }
  if (need_conflicts) {
    std::filesystem::path file = resolve_artifact("conflicts", "annotate conflicts");
    for (const ndjson::Json& j : ndjson::read_file(file)) {
      check_hash(j, file);
      std::vector<ValueConflict> conflicts;
      for (const auto& c : j.at("conflicts")) {
        conflicts.push_back({c.at("a").get<std::string>(), c.at("b").get<std::string>()});
      }
      store.conflicts_by_situation[j.at("situation_id").get<std::string>()] = std::move(conflicts);
    }
  }
  if (need_tradeoffs) {
    std::filesystem::path file = resolve_artifact("tradeoffs", "annotate tradeoffs");
    for (const ndjson::Json& j : ndjson::read_file(file)) {
      check_hash(j, file);
      std::string instance_id = j.at("instance_id").get<std::string>();
      std::vector<TradeOff> tradeoffs;
      for (const auto& t : j.at("tradeoffs")) {
        TradeOff to;
        to.preferred = t.at("preferred").get<std::string>();
        to.rejected = t.at("rejected").get<std::string>();
        to.model_generated = t.value("model_generated", false);
        to.source_instance = instance_id;
        tradeoffs.push_back(std::move(to));
      }
      store.tradeoffs_by_instance[instance_id] = std::move(tradeoffs);
    }
  }
  return store;
}

void Pipeline::cluster() {
  AnnotationStore annotations = load_annotations(false, true, false);

  // Deterministic phrase order: situation id, then conflict order, a before b.
  std::vector<std::string> phrases;
  for (const auto& [sid, conflicts] : annotations.conflicts_by_situation) {
    for (const ValueConflict& c : conflicts) {
      phrases.push_back(c.value_a);
      phrases.push_back(c.value_b);
    }
  }

  std::unique_ptr<EmbeddingClient> embedder = make_cluster_embedder();
  std::vector<ValueCluster> clusters = cluster_values(phrases, *embedder, config_.clustering);
  clusters = name_clusters(std::move(clusters), chat_client(), templates_);

  ndjson::Json out;
  out["template_hash"] = templates_.hash();
  out["phrase_count"] = phrases.size();
  ndjson::Json arr = ndjson::Json::array();
  for (const ValueCluster& c : clusters) {
    ndjson::Json j;
    j["cluster_id"] = c.cluster_id;
    j["name"] = c.name;
    j["descriptor"] = c.descriptor;
    j["members"] = c.members;
    ndjson::Json exemplars = ndjson::Json::array();
    for (std::size_t item : c.exemplars) {
      exemplars.push_back(phrases[item]);
    }
    j["exemplars"] = std::move(exemplars);
    j["size"] = c.items.size();
    arr.push_back(std::move(j));
  }
  out["clusters"] = std::move(arr);
  ndjson::atomic_write(artifact_path("clusters.json"), out.dump(2) + "\n");
  register_artifact("clusters", "clusters.json");
  std::cout << "built " << clusters.size() << " value clusters from " << phrases.size()
            << " phrases\n";
}

std::vector<ValueCluster> Pipeline::load_clusters() const {
  std::filesystem::path file = resolve_artifact("clusters", "cluster");
  ndjson::Json doc = ndjson::Json::parse(ndjson::read_text(file));
  if (doc.value("template_hash", "") != templates_.hash()) {
    throw Error("cluster table was produced with a different template version; re-run cluster");
  }
  std::vector<ValueCluster> clusters;
  for (const auto& j : doc.at("clusters")) {
    ValueCluster c;
    c.cluster_id = j.at("cluster_id").get<int>();
    c.name = j.value("name", "");
    c.descriptor = j.value("descriptor", "");
    for (const auto& m : j.at("members")) c.members.push_back(m.get<std::string>());
    clusters.push_back(std::move(c));
  }
  return clusters;
}

void Pipeline::embed() {
  Corpus corpus = load_working_corpus();
  AnnotationStore annotations = load_annotations(true, true, false);
  EmbeddingClient& client = embedding_client();

  // Situation-level Schwartz values come from the lexicographically first
  // annotated instance of each situation.
  std::map<std::string, std::string> schwartz_text_of;
  {
    std::map<std::string, const Instance*> by_id;
    for (const Instance& inst : corpus.instances) by_id[inst.instance_id] = &inst;
    // schwartz_by_instance iterates in instance-id order, so the first hit per
    // situation is the lexicographically first annotated instance.
    for (const auto& [iid, ann] : annotations.schwartz_by_instance) {
      auto it = by_id.find(iid);
      if (it == by_id.end()) continue;
      const std::string& sid = it->second->situation_id;
      if (!schwartz_text_of.count(sid)) {
        schwartz_text_of[sid] = schwartz_text(ann.situation_values);
      }
    }
  }

  struct Item {
    std::string kind;
    std::string situation_id;
    std::string text;
  };
  std::vector<Item> items;
  for (const auto& [sid, situation] : corpus.situations) {
    items.push_back({"situation", sid, situation_text(situation)});
    auto conflict_it = annotations.conflicts_by_situation.find(sid);
    if (conflict_it != annotations.conflicts_by_situation.end()) {
      items.push_back({"value", sid, value_text(conflict_it->second)});
    }
    auto schwartz_it = schwartz_text_of.find(sid);
    if (schwartz_it != schwartz_text_of.end()) {
      items.push_back({"schwartz", sid, schwartz_it->second});
    }
  }

  std::vector<std::string> texts;
  texts.reserve(items.size());
  for (const Item& item : items) texts.push_back(item.text);
  EmbedReport report = embed_all(client, texts);

  std::string body;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!report.vectors[i]) continue;
    ndjson::Json j;
    j["kind"] = items[i].kind;
    j["situation_id"] = items[i].situation_id;
    j["model"] = config_.embedding.model_name;
    j["dim"] = client.dim();
    const Vec& v = *report.vectors[i];
    j["vector"] = std::vector<double>(v.data(), v.data() + v.size());
    body += j.dump() + "\n";
  }
  ndjson::atomic_write(artifact_path("embeddings.ndjson"), body);
  register_artifact("embeddings", "embeddings.ndjson");

  if (!report.failures.empty()) {
    std::string failures;
    for (const EmbedFailure& f : report.failures) {
      failures += ndjson::Json{{"kind", items[f.index].kind},
                               {"situation_id", items[f.index].situation_id},
                               {"message", f.message}}
                      .dump() +
                  "\n";
    }
    ndjson::atomic_write(artifact_path("embed_failures.ndjson"), failures);
    throw Error(std::to_string(report.failures.size()) +
                " embedding item(s) failed; see embed_failures.ndjson");
  }
  std::cout << "embedded " << items.size() << " texts at dim " << client.dim() << "\n";
}

EmbeddingStore Pipeline::load_embeddings() const {
  std::filesystem::path file = resolve_artifact("embeddings", "embed");
  EmbeddingStore store;
  store.model_name = config_.embedding.model_name;
  for (const ndjson::Json& j : ndjson::read_file(file)) {
    if (j.value("model", "") != store.model_name) {
      throw Error("embeddings were produced with model \"" + j.value("model", "") +
                  "\", current is \"" + store.model_name + "\"; re-run embed");
    }
    const auto& values = j.at("vector");
    Vec v(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
      v[static_cast<Eigen::Index>(i)] = values[i].get<double>();
    }
    if (store.dim == 0) store.dim = static_cast<int>(v.size());
    if (v.size() != store.dim) throw Error("inconsistent embedding dims in " + file.string());
    std::string kind = j.at("kind").get<std::string>();
    std::string sid = j.at("situation_id").get<std::string>();
    if (kind == "situation") {
      store.situation_vecs[sid] = std::move(v);
    } else if (kind == "value") {
      store.value_vecs[sid] = std::move(v);
    } else if (kind == "schwartz") {
      store.schwartz_vecs[sid] = std::move(v);
    } else {
      throw Error("unknown embedding kind in " + file.string() + ": " + kind);
    }
  }
  if (store.situation_vecs.empty()) throw Error("no situation embeddings in " + file.string());
  return store;
}

void Pipeline::index() {
  Corpus corpus = load_working_corpus();
  AnnotationStore annotations = load_annotations(true, true, true);
  EmbeddingStore embeddings = load_embeddings();

  std::filesystem::create_directories(artifact_path("history"));
  std::size_t built = 0;
  for (const std::string& redditor : corpus.redditors) {
    UserHistory history = build_history(corpus, annotations, embeddings, redditor);
    save_history(history, config_.embedding.model_name,
                 artifact_path("history") / (redditor + ".json"));
    ++built;
  }
  register_artifact("history_dir", "history");
  std::cout << "indexed " << built << " redditor histories\n";
}

void Pipeline::predict(const std::string& strategy_text, const std::string& input_text,
                       const PredictScope& scope) {
  Corpus corpus = load_working_corpus();
  EmbeddingStore embeddings = load_embeddings();
  JudgmentIndex judgment_index(corpus);
  std::filesystem::path history_dir = resolve_artifact("history_dir", "index");

  const bool solar_mode = lowercase(trim(strategy_text)) == "solar";
  StrategyChoice strategy;
  if (!solar_mode) {
    auto parsed_strategy = parse_strategy(strategy_text);
    if (!parsed_strategy) {
      throw Error("unknown strategy: " + strategy_text +
                  " (expected situation|schwartz|tradeoff|solar)");
    }
    auto parsed_variant = parse_variant(input_text);
    if (!parsed_variant) {
      throw Error("unknown input variant: " + input_text +
                  " (expected comment|tradeoff|schwartz)");
    }
    strategy = {*parsed_strategy, *parsed_variant};
  }

  PredictOptions options;
  options.k = config_.k;
  options.sample_count = config_.sample_count;
  options.threshold = config_.threshold;
  options.prompt_limit = config_.prompt_limit;
  options.model_name = config_.chat.model_name;

  ChatClient& chat = chat_client();
  const int workers = mock_mode_ ? 1 : config_.chat.max_parallel;

  std::vector<std::string> redditors;
  for (const std::string& r : corpus.redditors) {
    if (scope.redditor.empty() || scope.redditor == r) redditors.push_back(r);
  }
  if (redditors.empty()) throw Error("no matching redditor");

  std::string body;
  std::size_t failures = 0;
  for (const std::string& redditor : redditors) {
    UserHistory history = load_history(history_dir / (redditor + ".json"),
                                       config_.embedding.model_name, embeddings.dim);

    std::set<std::string> wanted;
    if (scope.test_fold_only) {
      std::vector<Split> splits = make_splits(corpus, redditor, config_.seed, config_.folds);
      if (scope.fold < 0 || scope.fold >= static_cast<int>(splits.size())) {
        throw Error("fold out of range");
      }
      wanted.insert(splits[static_cast<std::size_t>(scope.fold)].test.begin(),
                    splits[static_cast<std::size_t>(scope.fold)].test.end());
    }

    std::vector<const Instance*> targets;
    for (const Instance& inst : corpus.instances) {
      if (inst.redditor_id != redditor || !inst.judgment) continue;
      if (scope.test_fold_only && !wanted.count(inst.instance_id)) continue;
      targets.push_back(&inst);
    }
    std::sort(targets.begin(), targets.end(), [](const Instance* a, const Instance* b) {
      return a->instance_id < b->instance_id;
    });

    std::vector<PredictionRecord> records(targets.size());
    parallel_for(targets.size(), workers, [&](std::size_t i) {
      if (solar_mode) {
        records[i] = solar_predict(*targets[i], corpus, judgment_index, history, embeddings, chat,
                                   templates_, options);
      } else {
        records[i] = solar::predict(*targets[i], corpus, strategy, history, embeddings, chat, templates_, options);
      }
    });
    for (const PredictionRecord& record : records) {
      if (record.failed) ++failures;
      body += prediction_to_json(record).dump() + "\n";
    }
  }

  ndjson::atomic_write(artifact_path("predictions.ndjson"), body);
  register_artifact("predictions", "predictions.ndjson");
  std::cout << "wrote predictions for " << redditors.size() << " redditor(s); " << failures
            << " failure(s)\n";
  if (failures > 0) {
    throw Error(std::to_string(failures) + " prediction(s) failed; see predictions.ndjson");
  }
}

ndjson::Json Pipeline::evaluate() {
  Corpus corpus = load_working_corpus();
  JudgmentIndex judgment_index(corpus);

  std::map<std::string, Judgment> gold;
  for (const Instance& inst : corpus.instances) {
    if (inst.judgment) gold[inst.instance_id] = *inst.judgment;
  }

  std::filesystem::path file = resolve_artifact("predictions", "predict");
  std::map<std::string, std::vector<PredictionRecord>> by_redditor;
  std::size_t failed = 0;
  std::size_t max_runs = 0;
  for (const ndjson::Json& j : ndjson::read_file(file)) {
    PredictionRecord r = prediction_from_json(j);
    if (r.failed || !r.final) {
      ++failed;
      continue;
    }
    max_runs = std::max(max_runs, r.parsed.size());
    by_redditor[r.redditor_id].push_back(std::move(r));
  }
  if (by_redditor.empty()) throw Error("no successful predictions to evaluate");

  std::map<std::string, double> all_scores;
  std::map<std::string, double> contro_scores;
  for (const auto& [redditor, records] : by_redditor) {
    std::vector<std::pair<Judgment, Judgment>> pairs;
    std::vector<std::pair<Judgment, Judgment>> contro_pairs;
    for (const PredictionRecord& r : records) {
      auto gold_it = gold.find(r.instance_id);
      if (gold_it == gold.end()) {
        throw Error("prediction for unknown instance " + r.instance_id);
      }
      pairs.push_back({*r.final, gold_it->second});
      Controversiality contro =
          controversiality(judgment_index, r.situation_id, redditor, config_.threshold);
      if (contro.controversial) contro_pairs.push_back({*r.final, gold_it->second});
    }
    all_scores[redditor] = macro_f1(pairs);
    if (!contro_pairs.empty()) contro_scores[redditor] = macro_f1(contro_pairs);
  }

  EvalReport report = aggregate(all_scores, contro_scores, corpus);

  // Per-run spread: score run r using the r-th sampled reply everywhere.
  if (max_runs > 1) {
    double lo = 2.0;
    double hi = -1.0;
    for (std::size_t run = 0; run < max_runs; ++run) {
      std::map<std::string, double> run_scores;
      for (const auto& [redditor, records] : by_redditor) {
        std::vector<std::pair<Judgment, Judgment>> pairs;
        for (const PredictionRecord& r : records) {
          if (r.parsed.empty()) continue;
          Judgment predicted = r.parsed[std::min(run, r.parsed.size() - 1)];
          pairs.push_back({predicted, gold.at(r.instance_id)});
        }
        if (!pairs.empty()) run_scores[redditor] = macro_f1(pairs);
      }
      if (run_scores.empty()) continue;
      double sum = 0;
      for (const auto& [id, score] : run_scores) sum += score;
      double overall = sum / static_cast<double>(run_scores.size());
      lo = std::min(lo, overall);
      hi = std::max(hi, overall);
    }
    if (hi >= 0) report.run_spread = {lo, hi};
  }

  ndjson::Json j = report_to_json(report);
  j["failed_predictions"] = failed;
  ndjson::atomic_write(artifact_path("eval_report.json"), j.dump(2) + "\n");
  register_artifact("eval_report", "eval_report.json");
  return j;
}

void Pipeline::analyze(const std::string& kind) {
  if (kind == "win-rates") {
    AnnotationStore annotations = load_annotations(false, false, true);
    std::vector<ValueCluster> clusters = load_clusters();
    Corpus corpus = load_working_corpus();

    std::map<std::string, std::string> redditor_of_instance;
    for (const Instance& inst : corpus.instances) {
      redditor_of_instance[inst.instance_id] = inst.redditor_id;
    }
    std::map<std::string, std::vector<TradeOff>> by_redditor;
    for (const auto& [iid, tradeoffs] : annotations.tradeoffs_by_instance) {
      auto it = redditor_of_instance.find(iid);
      if (it == redditor_of_instance.end()) continue;
      auto& list = by_redditor[it->second];
      list.insert(list.end(), tradeoffs.begin(), tradeoffs.end());
    }

    WinRateMatrix matrix = win_rate_matrix(by_redditor, clusters, config_.min_support);
    ndjson::atomic_write(artifact_path("win_rates.csv"), win_rate_csv(matrix));
    ndjson::atomic_write(artifact_path("win_rates.svg"),
                         svg_heatmap(matrix, "Value trade-off win rates"));

    ndjson::Json j;
    j["pairs"] = matrix.pair_labels;
    j["redditors"] = matrix.redditor_ids;
    ndjson::Json rows = ndjson::Json::array();
    for (const auto& row : matrix.cells) {
      ndjson::Json out_row = ndjson::Json::array();
      for (const auto& cell : row) {
        if (cell) {
          out_row.push_back({{"rate", cell->rate}, {"support", cell->support}});
        } else {
          out_row.push_back(nullptr);
        }
      }
      rows.push_back(std::move(out_row));
    }
    j["cells"] = std::move(rows);
    j["skipped_unmapped"] = matrix.skipped_unmapped;
    ndjson::atomic_write(artifact_path("win_rates.json"), j.dump(2) + "\n");
    register_artifact("win_rates", "win_rates.json");
  } else if (kind == "distance") {
    Corpus corpus = load_working_corpus();
    EmbeddingStore embeddings = load_embeddings();
    std::filesystem::path history_dir = resolve_artifact("history_dir", "index");

    std::string csv = "redditor,history_size,mean_topk_distance\n";
    std::vector<ScatterPoint> points;
    for (const std::string& redditor : corpus.redditors) {
      std::filesystem::path file = history_dir / (redditor + ".json");
      if (!std::filesystem::exists(file)) continue;
      UserHistory history =
          load_history(file, config_.embedding.model_name, embeddings.dim);
      // Leave-one-out: each entry's situation queries the rest of the history.
      double total = 0;
      std::size_t counted = 0;
      for (const HistoryEntry& e : history.entries) {
        RetrievalResult r =
            retrieve_by_situation(history, e.situation_vec, config_.k, e.situation_id);
        if (r.entries.empty()) continue;
        double sum = 0;
        for (const RetrievedEntry& re : r.entries) sum += re.distance;
        total += sum / static_cast<double>(r.entries.size());
        ++counted;
      }
      if (counted == 0) continue;
      double mean = total / static_cast<double>(counted);
      csv += redditor + "," + std::to_string(history.entries.size()) + "," +
             std::to_string(mean) + "\n";
      points.push_back(
          {std::log10(static_cast<double>(history.entries.size())), mean, redditor, 0});
    }
    ndjson::atomic_write(artifact_path("distance.csv"), csv);
    ndjson::atomic_write(artifact_path("distance.svg"),
                         svg_scatter(points, "Retrieval distance vs history size",
                                     "log10(history size)", "mean top-k distance"));
    register_artifact("distance", "distance.csv");
  } else if (kind == "cooccurrence") {
    Corpus corpus = load_working_corpus();
    AnnotationStore annotations = load_annotations(true, true, false);
    std::vector<ValueCluster> clusters = load_clusters();

    Mat counts = cooccurrence_counts(annotations.schwartz_by_instance, corpus,
                                     annotations.conflicts_by_situation, clusters);
    std::vector<std::string> row_labels;
    for (const ValueCluster& c : clusters) {
      row_labels.push_back(c.name.empty() ? "cluster_" + std::to_string(c.cluster_id) : c.name);
    }
    std::vector<std::string> col_labels;
    for (SchwartzValue v : kAllSchwartzValues) col_labels.push_back(schwartz_name(v));

    ndjson::atomic_write(artifact_path("cooccurrence.csv"),
                         matrix_csv(counts, row_labels, col_labels));
    ndjson::atomic_write(
        artifact_path("cooccurrence.svg"),
        svg_heatmap(counts, row_labels, col_labels, "Value cluster / Schwartz co-occurrence"));
    register_artifact("cooccurrence", "cooccurrence.csv");
  } else if (kind == "project") {
    EmbeddingStore embeddings = load_embeddings();
    std::vector<Vec> vectors;
    std::vector<std::string> ids;
    for (const auto& [sid, v] : embeddings.situation_vecs) {
      ids.push_back(sid);
      vectors.push_back(v);
    }
    Mat projected = project_2d(vectors);

    std::string csv = "situation_id,x,y\n";
    std::vector<ScatterPoint> points;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      double x = projected(static_cast<Eigen::Index>(i), 0);
      double y = projected(static_cast<Eigen::Index>(i), 1);
      csv += ids[i] + "," + std::to_string(x) + "," + std::to_string(y) + "\n";
      points.push_back({x, y, "", 0});
    }
    ndjson::atomic_write(artifact_path("projection.csv"), csv);
    ndjson::atomic_write(artifact_path("projection.svg"),
                         svg_scatter(points, "Situation embedding projection", "component 1",
                                     "component 2"));
    register_artifact("projection", "projection.csv");
  } else {
    throw Error("unknown analyze kind: " + kind +
                " (expected win-rates|distance|cooccurrence|project)");
  }
}

}  // namespace solar
