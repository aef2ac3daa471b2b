#include "solar/providers.hpp"

#include <httplib.h>

#include <atomic>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <thread>

namespace solar {

namespace {

std::string iso8601_now() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string chat_request_key(const std::string& model, const std::string& system_text,
                             const std::string& user_text, double temperature) {
  ndjson::Json j;
  j["model"] = model;
  j["system"] = system_text;
  j["user"] = user_text;
  j["temperature"] = temperature;
  return fnv1a64_hex(j.dump());
}

ndjson::Json chat_request_json(const ChatRequest& r) {
  ndjson::Json j;
  j["model"] = r.model_name;
  j["system"] = r.system_text;
  j["user"] = r.user_text;
  j["temperature"] = r.temperature;
  return j;
}

}  // namespace

AuditLog::AuditLog(std::filesystem::path file, Clock clock)
    : file_(std::move(file)), clock_(clock ? std::move(clock) : wall_clock()) {
  if (file_.has_parent_path()) std::filesystem::create_directories(file_.parent_path());
  // Append: one log accumulates across the commands of a pipeline run.
  std::ofstream out(file_, std::ios::app);
  if (!out) throw Error("cannot open audit log: " + file_.string());
}

void AuditLog::record(std::string_view kind, const ndjson::Json& request,
                      const ndjson::Json& response) {
  if (!enabled()) return;
  std::lock_guard<std::mutex> lock(mu_);
  ndjson::Json entry;
  entry["seq"] = ++seq_;
  entry["ts"] = clock_();
  entry["kind"] = std::string(kind);
  entry["request"] = request;
  entry["response"] = response;
  std::ofstream out(file_, std::ios::app);
  out << entry.dump() << '\n';
  if (!out) throw Error("audit log write failed: " + file_.string());
}

AuditLog::Clock AuditLog::wall_clock() {
  return [] { return iso8601_now(); };
}

AuditLog::Clock AuditLog::logical_clock() {
  auto counter = std::make_shared<std::atomic<std::uint64_t>>(0);
  return [counter] {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "t%012llu",
                  static_cast<unsigned long long>(counter->fetch_add(1) + 1));
    return std::string(buf);
  };
}

Vec mock_embed(std::string_view text, int dim) {
  if (dim < 8) throw Error("mock_embed requires dim >= 8");
  Vec v = Vec::Zero(dim);

  auto fold = [&](std::string_view token) {
    std::uint64_t h = fnv1a64(token);
    auto bucket = static_cast<Eigen::Index>(h % static_cast<std::uint64_t>(dim));
    v[bucket] += ((h >> 32) & 1) ? 1.0 : -1.0;
  };

  std::string token;
  bool any = false;
  for (char raw : text) {
    unsigned char c = static_cast<unsigned char>(raw);
    if (std::isalnum(c)) {
      token.push_back(static_cast<char>(std::tolower(c)));
    } else if (!token.empty()) {
      fold(token);
      any = true;
      token.clear();
    }
  }
  if (!token.empty()) {
    fold(token);
    any = true;
  }
  if (!any) fold(text);

  double norm = v.norm();
  if (norm == 0.0) {
    // Signed buckets can cancel exactly; fall back to a deterministic axis.
    v[static_cast<Eigen::Index>(fnv1a64(text) % static_cast<std::uint64_t>(dim))] = 1.0;
    norm = 1.0;
  }
  return v / norm;
}

MockEmbeddingClient::MockEmbeddingClient(int dim, AuditLog* audit) : dim_(dim), audit_(audit) {
  if (dim < 8) throw Error("mock embedding dim must be >= 8");
}

std::vector<Vec> MockEmbeddingClient::embed_batch(const std::vector<std::string>& texts) {
  if (texts.empty()) throw Error("embed_batch requires a non-empty list");
  std::vector<Vec> out;
  out.reserve(texts.size());
  for (const std::string& t : texts) {
    if (t.empty()) throw Error("embed_batch texts must be non-empty");
    out.push_back(mock_embed(t, dim_));
  }
  if (audit_ && audit_->enabled()) {
    ndjson::Json request;
    request["model"] = "mock";
    request["dim"] = dim_;
    request["input"] = texts;
    ndjson::Json response;
    ndjson::Json embs = ndjson::Json::array();
    for (const Vec& v : out) embs.push_back(std::vector<double>(v.data(), v.data() + v.size()));
    response["embeddings"] = std::move(embs);
    audit_->record("embedding", request, response);
  }
  return out;
}

MockChatClient::MockChatClient(std::vector<ChatRule> rules, AuditLog* audit)
    : rules_(std::move(rules)), audit_(audit) {}

std::vector<ChatRule> MockChatClient::load_rules(const std::filesystem::path& file) {
  ndjson::Json doc = ndjson::Json::parse(ndjson::read_text(file));
  std::vector<ChatRule> rules;
  for (const auto& r : doc.at("rules")) {
    ChatRule rule;
    rule.prefix = r.value("prefix", "");
    rule.suffix = r.value("suffix", "");
    rule.user_text_hash = r.value("user_text_hash", "");
    if (r.contains("contains")) {
      if (r["contains"].is_string()) {
        rule.contains.push_back(r["contains"].get<std::string>());
      } else {
        for (const auto& c : r["contains"]) rule.contains.push_back(c.get<std::string>());
      }
    }
    for (const auto& reply : r.at("replies")) rule.replies.push_back(reply.get<std::string>());
    if (rule.replies.empty()) throw Error("chat rule without replies in " + file.string());
    rules.push_back(std::move(rule));
  }
  return rules;
}

std::string MockChatClient::chat(const ChatRequest& request) {
  if (request.user_text.empty()) throw Error("chat request requires non-empty user text");
  const std::string& text = request.user_text;

  auto matches = [&](const ChatRule& rule) {
    if (!rule.prefix.empty() && text.rfind(rule.prefix, 0) != 0) return false;
    for (const std::string& c : rule.contains) {
      if (text.find(c) == std::string::npos) return false;
    }
    if (!rule.suffix.empty()) {
      if (text.size() < rule.suffix.size()) return false;
      if (text.compare(text.size() - rule.suffix.size(), rule.suffix.size(), rule.suffix) != 0)
        return false;
    }
    if (!rule.user_text_hash.empty() && fnv1a64_hex(text) != rule.user_text_hash) return false;
    return true;
  };

  for (std::size_t i = 0; i < rules_.size(); ++i) {
    if (!matches(rules_[i])) continue;
    std::size_t count;
    {
      std::lock_guard<std::mutex> lock(mu_);
      count = call_counts_[{i, fnv1a64(text)}]++;
    }
    const std::string& reply = rules_[i].replies[count % rules_[i].replies.size()];
    if (audit_ && audit_->enabled()) {
      audit_->record("chat", chat_request_json(request), ndjson::Json{{"content", reply}});
    }
    return reply;
  }
  throw ProviderError("no fixture for prompt: " + text.substr(0, 120));
}

ReplayChatClient::ReplayChatClient(const std::filesystem::path& audit_file) {
  for (const ndjson::Json& entry : ndjson::read_file(audit_file)) {
    if (entry.value("kind", "") != "chat") continue;
    const ndjson::Json& req = entry.at("request");
    std::string key = chat_request_key(req.value("model", ""), req.value("system", ""),
                                       req.value("user", ""), req.value("temperature", 0.0));
    replies_[key].push_back(entry.at("response").at("content").get<std::string>());
  }
}

std::string ReplayChatClient::chat(const ChatRequest& request) {
  std::string key = chat_request_key(request.model_name, request.system_text, request.user_text,
                                     request.temperature);
  std::lock_guard<std::mutex> lock(mu_);
  auto it = replies_.find(key);
  if (it == replies_.end()) {
    throw ProviderError("no recorded completion for prompt: " + request.user_text.substr(0, 120));
  }
  std::size_t& pos = cursor_[key];
  if (pos >= it->second.size()) pos = it->second.size() - 1;  // repeat last beyond the record
  return it->second[pos++];
}

Transport default_transport(const std::string& endpoint) {
  return [endpoint](const std::string& path, const std::string& body,
                    const std::string& bearer_token) -> HttpResult {
    httplib::Client client(endpoint);
    client.set_connection_timeout(30);
    client.set_read_timeout(120);
    httplib::Headers headers;
    if (!bearer_token.empty()) headers.emplace("Authorization", "Bearer " + bearer_token);
    auto res = client.Post(path, headers, body, "application/json");
    if (!res) return {0, httplib::to_string(res.error())};
    return {res->status, res->body};
  };
}

HttpResult post_with_retries(const Transport& transport, const std::string& path,
                             const std::string& body, const std::string& bearer_token,
                             int retry_limit, int backoff_ms,
                             const std::function<void(int)>& sleep_ms) {
  auto do_sleep = sleep_ms ? sleep_ms : [](int ms) {
    std::this_thread::sleep_for(std::chrono::milliseconds(ms));
  };
  static std::atomic<std::uint64_t> jitter_state{0x9e3779b97f4a7c15ULL};

  HttpResult result;
  for (int attempt = 0; attempt <= retry_limit; ++attempt) {
    if (attempt > 0) {
      std::uint64_t r = mix_seed(jitter_state.fetch_add(1), 0x6a697474ULL);
      int delay = backoff_ms * (1 << (attempt - 1));
      delay += static_cast<int>(r % static_cast<std::uint64_t>(std::max(1, backoff_ms / 2)));
      do_sleep(delay);
    }
    result = transport(path, body, bearer_token);
    bool retryable = result.status == 0 || result.status == 429 || result.status >= 500;
    if (!retryable) return result;
  }
  return result;
}

namespace {

std::string bearer_from_env(const ProviderConfig& config) {
  if (config.api_key_env.empty()) return "";
  const char* value = std::getenv(config.api_key_env.c_str());
  if (!value || !*value) {
    throw ProviderError("environment variable not set: " + config.api_key_env);
  }
  return value;
}

}  // namespace

HttpChatClient::HttpChatClient(ProviderConfig config, AuditLog* audit, Transport transport)
    : config_(std::move(config)),
      audit_(audit),
      transport_(transport ? std::move(transport) : default_transport(config_.endpoint)) {}

std::string HttpChatClient::chat(const ChatRequest& request) {
  if (request.user_text.empty()) throw Error("chat request requires non-empty user text");

  ndjson::Json body;
  body["model"] = request.model_name.empty() ? config_.model_name : request.model_name;
  ndjson::Json messages = ndjson::Json::array();
  if (!request.system_text.empty()) {
    messages.push_back({{"role", "system"}, {"content", request.system_text}});
  }
  messages.push_back({{"role", "user"}, {"content", request.user_text}});
  body["messages"] = std::move(messages);
  body["temperature"] = request.temperature;
  const std::string wire = body.dump();

  HttpResult res = post_with_retries(transport_, "/v1/chat/completions", wire,
                                     bearer_from_env(config_), config_.retry_limit,
                                     config_.retry_backoff_ms);
  if (res.status == 0) throw ProviderError("chat transport failed: " + res.body);
  if (res.status != 200) {
    throw ProviderError("chat request failed with status " + std::to_string(res.status) + ": " +
                        res.body.substr(0, 200));
  }

  ndjson::Json parsed = ndjson::Json::parse(res.body, nullptr, false);
  if (parsed.is_discarded() || !parsed.contains("choices") || parsed["choices"].empty()) {
    throw ProviderError("malformed chat response: " + res.body.substr(0, 200));
  }
  std::string content = parsed["choices"][0].at("message").at("content").get<std::string>();
  if (content.empty()) throw ProviderError("empty completion");

  if (audit_ && audit_->enabled()) {
    ndjson::Json req_json = chat_request_json(request);
    req_json["wire_body"] = wire;
    audit_->record("chat", req_json, ndjson::Json{{"content", content}});
  }
  return content;
}

HttpEmbeddingClient::HttpEmbeddingClient(ProviderConfig config, AuditLog* audit,
                                         std::filesystem::path cache_dir, Transport transport)
    : config_(std::move(config)),
      audit_(audit),
      cache_dir_(std::move(cache_dir)),
      transport_(transport ? std::move(transport) : default_transport(config_.endpoint)) {
  if (config_.embedding_dim <= 0) throw Error("embedding_dim must be positive");
}

std::optional<Vec> HttpEmbeddingClient::cache_lookup(const std::string& text) const {
  if (cache_dir_.empty()) return std::nullopt;
  std::filesystem::path file =
      cache_dir_ / config_.model_name / (content_hash(text) + ".json");
  if (!std::filesystem::exists(file)) return std::nullopt;
  ndjson::Json doc = ndjson::Json::parse(ndjson::read_text(file));
  if (doc.value("dim", 0) != config_.embedding_dim) return std::nullopt;
  const auto& values = doc.at("embedding");
  Vec v(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) v[static_cast<Eigen::Index>(i)] = values[i].get<double>();
  return v;
}

void HttpEmbeddingClient::cache_store(const std::string& text, const Vec& v) const {
  if (cache_dir_.empty()) return;
  ndjson::Json doc;
  doc["model"] = config_.model_name;
  doc["dim"] = config_.embedding_dim;
  doc["text_hash"] = content_hash(text);
  doc["embedding"] = std::vector<double>(v.data(), v.data() + v.size());
  std::filesystem::path file =
      cache_dir_ / config_.model_name / (content_hash(text) + ".json");
  ndjson::atomic_write(file, doc.dump());
}

std::vector<Vec> HttpEmbeddingClient::embed_batch(const std::vector<std::string>& texts) {
  if (texts.empty()) throw Error("embed_batch requires a non-empty list");
  for (const std::string& t : texts) {
    if (t.empty()) throw Error("embed_batch texts must be non-empty");
  }

  std::vector<std::optional<Vec>> out(texts.size());
  std::vector<std::size_t> misses;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    out[i] = cache_lookup(texts[i]);
    if (!out[i]) misses.push_back(i);
  }

  if (!misses.empty()) {
    ndjson::Json body;
    body["model"] = config_.model_name;
    ndjson::Json input = ndjson::Json::array();
    for (std::size_t i : misses) input.push_back(texts[i]);
    body["input"] = std::move(input);
    if (config_.embedding_dim > 0) body["dimensions"] = config_.embedding_dim;
    const std::string wire = body.dump();

    HttpResult res = post_with_retries(transport_, "/v1/embeddings", wire,
                                       bearer_from_env(config_), config_.retry_limit,
                                       config_.retry_backoff_ms);
    if (res.status == 0) throw ProviderError("embedding transport failed: " + res.body);
    if (res.status != 200) {
      throw ProviderError("embedding request failed with status " + std::to_string(res.status) +
                          ": " + res.body.substr(0, 200));
    }
    ndjson::Json parsed = ndjson::Json::parse(res.body, nullptr, false);
    if (parsed.is_discarded() || !parsed.contains("data") ||
        parsed["data"].size() != misses.size()) {
      throw ProviderError("malformed embedding response: " + res.body.substr(0, 200));
    }

    // Honor explicit item indices when the server provides them.
    std::vector<const ndjson::Json*> items(misses.size(), nullptr);
    bool indexed = true;
    for (const auto& item : parsed["data"]) {
      if (!item.contains("index") || !item["index"].is_number_unsigned()) {
        indexed = false;
        break;
      }
    }
    if (indexed) {
      for (const auto& item : parsed["data"]) {
        std::size_t idx = item["index"].get<std::size_t>();
        if (idx >= items.size()) throw ProviderError("embedding response index out of range");
        items[idx] = &item;
      }
    } else {
      std::size_t pos = 0;
      for (const auto& item : parsed["data"]) items[pos++] = &item;
    }

    ndjson::Json audit_response;
    ndjson::Json audit_embs = ndjson::Json::array();
    for (std::size_t m = 0; m < misses.size(); ++m) {
      if (!items[m]) throw ProviderError("embedding response is missing items");
      const auto& values = items[m]->at("embedding");
      if (static_cast<int>(values.size()) != config_.embedding_dim) {
        throw ProviderError("embedding dimension mismatch: expected " +
                            std::to_string(config_.embedding_dim) + ", got " +
                            std::to_string(values.size()));
      }
      Vec v(config_.embedding_dim);
      for (std::size_t i = 0; i < values.size(); ++i) {
        v[static_cast<Eigen::Index>(i)] = values[i].get<double>();
      }
      cache_store(texts[misses[m]], v);
      audit_embs.push_back(std::vector<double>(v.data(), v.data() + v.size()));
      out[misses[m]] = std::move(v);
    }

    if (audit_ && audit_->enabled()) {
      ndjson::Json req_json;
      req_json["model"] = config_.model_name;
      req_json["dim"] = config_.embedding_dim;
      ndjson::Json sent = ndjson::Json::array();
      for (std::size_t i : misses) sent.push_back(texts[i]);
      req_json["input"] = std::move(sent);
      req_json["wire_body"] = wire;
      audit_response["embeddings"] = std::move(audit_embs);
      audit_->record("embedding", req_json, audit_response);
    }
  }

  std::vector<Vec> result;
  result.reserve(texts.size());
  for (auto& v : out) result.push_back(std::move(*v));
  return result;
}

EmbedReport embed_all(EmbeddingClient& client, const std::vector<std::string>& texts,
                      std::size_t chunk_size) {
  if (chunk_size == 0) throw Error("chunk_size must be positive");
  EmbedReport report;
  report.vectors.resize(texts.size());
  for (std::size_t start = 0; start < texts.size(); start += chunk_size) {
    std::size_t end = std::min(texts.size(), start + chunk_size);
    std::vector<std::string> chunk(texts.begin() + static_cast<std::ptrdiff_t>(start),
                                   texts.begin() + static_cast<std::ptrdiff_t>(end));
    try {
      std::vector<Vec> vecs = client.embed_batch(chunk);
      for (std::size_t i = 0; i < vecs.size(); ++i) {
        report.vectors[start + i] = std::move(vecs[i]);
      }
    } catch (const std::exception& e) {
      for (std::size_t i = start; i < end; ++i) {
        report.failures.push_back({i, e.what()});
      }
    }
  }
  return report;
}

}  // namespace solar
