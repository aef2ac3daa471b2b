#pragma once

#include "solar/ndjson.hpp"
#include "solar/util.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace solar {

struct ProviderConfig {
  std::string endpoint;     // scheme://host[:port]
  std::string api_key_env;  // env var holding the bearer token
  std::string model_name;
  int embedding_dim = 0;    // requested output dimension; 0 = provider default
  int max_parallel = 1;
  int retry_limit = 3;      // retries after the first attempt
  int retry_backoff_ms = 500;
};

struct ChatRequest {
  std::string system_text;
  std::string user_text;
  double temperature = 0.0;
  std::string model_name;
};

/// Append-only newline-delimited JSON record of every provider call. The
/// clock is injectable so mock pipelines can stamp logical timestamps and stay
/// byte-reproducible.
class AuditLog {
 public:
  using Clock = std::function<std::string()>;

  AuditLog() = default;  // disabled
  explicit AuditLog(std::filesystem::path file, Clock clock = {});

  bool enabled() const { return !file_.empty(); }
  void record(std::string_view kind, const ndjson::Json& request, const ndjson::Json& response);

  static Clock wall_clock();
  /// Monotone counter formatted as a fixed-width decimal string.
  static Clock logical_clock();

 private:
  std::filesystem::path file_;
  Clock clock_;
  std::mutex mu_;
  std::uint64_t seq_ = 0;
};

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  /// Returns the raw completion text unmodified. Throws ProviderError.
  virtual std::string chat(const ChatRequest& request) = 0;
};

class EmbeddingClient {
 public:
  virtual ~EmbeddingClient() = default;
  /// One vector per text, order preserving, all of dim(). Throws ProviderError.
  virtual std::vector<Vec> embed_batch(const std::vector<std::string>& texts) = 0;
  virtual int dim() const = 0;
};

/// Deterministic offline embedding: token hashes folded into `dim` signed
/// buckets, then unit-normalized. Texts sharing tokens land closer than
/// disjoint ones.
Vec mock_embed(std::string_view text, int dim);

class MockEmbeddingClient : public EmbeddingClient {
 public:
  explicit MockEmbeddingClient(int dim, AuditLog* audit = nullptr);
  std::vector<Vec> embed_batch(const std::vector<std::string>& texts) override;
  int dim() const override { return dim_; }

 private:
  int dim_;
  AuditLog* audit_;
};

/// One scripted completion source. A rule matches when every non-empty field
/// matches the prompt; `replies` cycle per distinct prompt.
struct ChatRule {
  std::string prefix;
  std::vector<std::string> contains;
  std::string suffix;
  std::string user_text_hash;  // fnv1a64 hex of the exact user text
  std::vector<std::string> replies;
};

class MockChatClient : public ChatClient {
 public:
  explicit MockChatClient(std::vector<ChatRule> rules, AuditLog* audit = nullptr);
  static std::vector<ChatRule> load_rules(const std::filesystem::path& file);

  std::string chat(const ChatRequest& request) override;

 private:
  std::vector<ChatRule> rules_;
  AuditLog* audit_;
  std::mutex mu_;
  std::map<std::pair<std::size_t, std::uint64_t>, std::size_t> call_counts_;
};

/// Replays chat completions out of an audit log, keyed by the full request.
/// Responses for a repeated request are returned in recorded order.
class ReplayChatClient : public ChatClient {
 public:
  explicit ReplayChatClient(const std::filesystem::path& audit_file);
  std::string chat(const ChatRequest& request) override;

 private:
  std::mutex mu_;
  std::map<std::string, std::vector<std::string>> replies_;
  std::map<std::string, std::size_t> cursor_;
};

struct HttpResult {
  int status = 0;  // 0 = transport failure
  std::string body;
};

/// POSTs a JSON body to a path under the configured endpoint. Injectable for
/// tests; the default implementation speaks real HTTP(S).
using Transport = std::function<HttpResult(const std::string& path, const std::string& body,
                                           const std::string& bearer_token)>;

Transport default_transport(const std::string& endpoint);

/// Chat completions over the common hosted-inference wire shape:
/// {model, messages:[{role, content}], temperature} -> {choices:[{message:{content}}]}.
class HttpChatClient : public ChatClient {
 public:
  HttpChatClient(ProviderConfig config, AuditLog* audit = nullptr, Transport transport = {});
  std::string chat(const ChatRequest& request) override;

 private:
  ProviderConfig config_;
  AuditLog* audit_;
  Transport transport_;
};

/// Embeddings over {model, input:[texts]} -> {data:[{embedding:[...]}]} with an
/// optional on-disk cache keyed by (model, content hash). Cache hits reproduce
/// the originally returned vectors exactly.
class HttpEmbeddingClient : public EmbeddingClient {
 public:
  HttpEmbeddingClient(ProviderConfig config, AuditLog* audit = nullptr,
                      std::filesystem::path cache_dir = {}, Transport transport = {});
  std::vector<Vec> embed_batch(const std::vector<std::string>& texts) override;
  int dim() const override { return config_.embedding_dim; }

 private:
  std::optional<Vec> cache_lookup(const std::string& text) const;
  void cache_store(const std::string& text, const Vec& v) const;

  ProviderConfig config_;
  AuditLog* audit_;
  std::filesystem::path cache_dir_;
  Transport transport_;
};

struct EmbedFailure {
  std::size_t index = 0;
  std::string message;
};

struct EmbedReport {
  std::vector<std::optional<Vec>> vectors;  // one slot per input text
  std::vector<EmbedFailure> failures;
};

/// Embeds texts in chunks; a chunk that still fails after the client's retries
/// marks its items failed and the job continues.
EmbedReport embed_all(EmbeddingClient& client, const std::vector<std::string>& texts,
                      std::size_t chunk_size = 64);

/// Retry helper shared by the HTTP clients: retries transport failures, 429
/// and 5xx with exponential backoff plus jitter. `sleep_ms` is injectable for
/// tests.
HttpResult post_with_retries(const Transport& transport, const std::string& path,
                             const std::string& body, const std::string& bearer_token,
                             int retry_limit, int backoff_ms,
                             const std::function<void(int)>& sleep_ms = {});

}  // namespace solar
