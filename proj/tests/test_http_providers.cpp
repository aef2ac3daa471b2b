#include "solar/providers.hpp"

#include "test_helpers.hpp"

#include <doctest.h>
#include <httplib.h>

#include <atomic>
#include <cstdlib>
#include <thread>

using namespace solar;
using solar::testing::ScratchDir;

namespace {

ProviderConfig local_config(int port, int dim = 0) {
  ProviderConfig config;
  config.endpoint = "http://127.0.0.1:" + std::to_string(port);
  config.api_key_env = "SOLAR_TEST_KEY";
  config.model_name = "test-model";
  config.embedding_dim = dim;
  config.retry_limit = 1;
  config.retry_backoff_ms = 1;
  return config;
}

struct LocalServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;

  explicit LocalServer() = default;

  void start() {
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }

  ~LocalServer() {
    server.stop();
    if (thread.joinable()) thread.join();
  }
};

}  // namespace

TEST_CASE("http embedding client speaks the hosted wire shape and caches responses") {
  setenv("SOLAR_TEST_KEY", "sekrit", 1);
  LocalServer ls;
  std::atomic<int> hits{0};
  std::string seen_auth;
  std::string seen_body;

  ls.server.Post("/v1/embeddings", [&](const httplib::Request& req, httplib::Response& res) {
    ++hits;
    seen_auth = req.get_header_value("Authorization");
    seen_body = req.body;
    ndjson::Json body = ndjson::Json::parse(req.body);
    int dim = body.value("dimensions", 8);
    ndjson::Json data = ndjson::Json::array();
    // Reverse order with explicit indices: the client must reorder.
    const auto& input = body.at("input");
    for (std::size_t i = input.size(); i-- > 0;) {
      std::vector<double> vec(static_cast<std::size_t>(dim), 0.125 * static_cast<double>(i + 1));
      data.push_back({{"index", i}, {"embedding", vec}});
    }
    res.set_content(ndjson::Json{{"data", data}}.dump(), "application/json");
  });
  ls.start();

  ScratchDir cache("embed_cache");
  HttpEmbeddingClient client(local_config(ls.port, 16), nullptr, cache.path());

  std::vector<Vec> first = client.embed_batch({"alpha", "beta"});
  CHECK(hits == 1);
  CHECK(seen_auth == "Bearer sekrit");
  ndjson::Json sent = ndjson::Json::parse(seen_body);
  CHECK(sent.at("model") == "test-model");
  CHECK(sent.at("dimensions") == 16);
  REQUIRE(sent.at("input").size() == 2);
  CHECK(sent["input"][0] == "alpha");
  REQUIRE(first.size() == 2);
  CHECK(first[0].size() == 16);
  CHECK(first[0][0] == doctest::Approx(0.125));
  CHECK(first[1][0] == doctest::Approx(0.25));

  // Second call is served from the cache, bitwise identical, no new request.
  std::vector<Vec> second = client.embed_batch({"alpha", "beta"});
  CHECK(hits == 1);
  CHECK(second[0] == first[0]);
  CHECK(second[1] == first[1]);
}

TEST_CASE("http embedding client rejects dimension mismatches") {
  setenv("SOLAR_TEST_KEY", "sekrit", 1);
  LocalServer ls;
  ls.server.Post("/v1/embeddings", [&](const httplib::Request&, httplib::Response& res) {
    ndjson::Json data = ndjson::Json::array();
    data.push_back({{"index", 0}, {"embedding", std::vector<double>(4, 1.0)}});
    res.set_content(ndjson::Json{{"data", data}}.dump(), "application/json");
  });
  ls.start();

  HttpEmbeddingClient client(local_config(ls.port, 16));
  CHECK_THROWS_WITH_AS(client.embed_batch({"alpha"}), doctest::Contains("dimension mismatch"),
                       ProviderError);
}

TEST_CASE("http chat client extracts the completion and audits the call") {
  setenv("SOLAR_TEST_KEY", "sekrit", 1);
  LocalServer ls;
  std::string seen_body;
  ls.server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    seen_body = req.body;
    ndjson::Json reply;
    reply["choices"] = ndjson::Json::array();
    reply["choices"].push_back({{"message", {{"role", "assistant"}, {"content", "Acceptable"}}}});
    res.set_content(reply.dump(), "application/json");
  });
  ls.start();

  ScratchDir dir("chat_audit");
  AuditLog audit(dir.path() / "audit.ndjson", AuditLog::logical_clock());
  HttpChatClient client(local_config(ls.port), &audit);

  ChatRequest req;
  req.system_text = "be terse";
  req.user_text = "judge this";
  req.temperature = 0.7;
  CHECK(client.chat(req) == "Acceptable");

  ndjson::Json sent = ndjson::Json::parse(seen_body);
  CHECK(sent.at("model") == "test-model");
  CHECK(sent.at("temperature") == doctest::Approx(0.7));
  REQUIRE(sent.at("messages").size() == 2);
  CHECK(sent["messages"][0].at("role") == "system");
  CHECK(sent["messages"][1].at("role") == "user");
  CHECK(sent["messages"][1].at("content") == "judge this");

  std::vector<ndjson::Json> entries = ndjson::read_file(dir.path() / "audit.ndjson");
  REQUIRE(entries.size() == 1);
  CHECK(entries[0].at("request").at("wire_body").get<std::string>() == seen_body);
  CHECK(entries[0].at("response").at("content") == "Acceptable");
}

TEST_CASE("http chat client surfaces transport failures after retries") {
  setenv("SOLAR_TEST_KEY", "sekrit", 1);
  int calls = 0;
  Transport dead = [&](const std::string&, const std::string&, const std::string&) {
    ++calls;
    return HttpResult{0, "refused"};
  };
  ProviderConfig config = local_config(1, 0);
  config.retry_limit = 2;
  HttpChatClient client(config, nullptr, dead);
  ChatRequest req;
  req.user_text = "hello";
  CHECK_THROWS_AS(client.chat(req), ProviderError);
  CHECK(calls == 3);
}

TEST_CASE("http chat client requires the api key env var") {
  unsetenv("SOLAR_MISSING_KEY");
  ProviderConfig config = local_config(1);
  config.api_key_env = "SOLAR_MISSING_KEY";
  Transport never = [](const std::string&, const std::string&, const std::string&) {
    return HttpResult{200, "{}"};
  };
  HttpChatClient client(config, nullptr, never);
  ChatRequest req;
  req.user_text = "hello";
  CHECK_THROWS_WITH_AS(client.chat(req), doctest::Contains("SOLAR_MISSING_KEY"), ProviderError);
}

TEST_CASE("http chat client rejects empty completions and malformed replies") {
  setenv("SOLAR_TEST_KEY", "sekrit", 1);
  ProviderConfig config = local_config(1);

  Transport empty_content = [](const std::string&, const std::string&, const std::string&) {
    ndjson::Json reply;
    reply["choices"] = ndjson::Json::array();
    reply["choices"].push_back({{"message", {{"content", ""}}}});
    return HttpResult{200, reply.dump()};
  };
  HttpChatClient empty_client(config, nullptr, empty_content);
  ChatRequest req;
  req.user_text = "hello";
  CHECK_THROWS_WITH_AS(empty_client.chat(req), doctest::Contains("empty completion"),
                       ProviderError);

  Transport garbage = [](const std::string&, const std::string&, const std::string&) {
    return HttpResult{200, "not json"};
  };
  HttpChatClient garbage_client(config, nullptr, garbage);
  CHECK_THROWS_AS(garbage_client.chat(req), ProviderError);
}

TEST_CASE("parallel embed_batch calls share one client safely") {
  setenv("SOLAR_TEST_KEY", "sekrit", 1);
  LocalServer ls;
  std::atomic<int> hits{0};
  ls.server.Post("/v1/embeddings", [&](const httplib::Request& req, httplib::Response& res) {
    ++hits;
    ndjson::Json body = ndjson::Json::parse(req.body);
    int dim = body.value("dimensions", 8);
    ndjson::Json data = ndjson::Json::array();
    for (std::size_t i = 0; i < body.at("input").size(); ++i) {
      data.push_back({{"index", i}, {"embedding", std::vector<double>(static_cast<std::size_t>(dim), 1.0)}});
    }
    res.set_content(ndjson::Json{{"data", data}}.dump(), "application/json");
  });
  ls.start();

  HttpEmbeddingClient client(local_config(ls.port, 8));
  std::vector<std::thread> threads;
  std::atomic<int> failures{0};
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&, t] {
      try {
        auto out = client.embed_batch({"text " + std::to_string(t)});
        if (out.size() != 1 || out[0].size() != 8) ++failures;
      } catch (...) {
        ++failures;
      }
    });
  }
  for (auto& t : threads) t.join();
  CHECK(failures == 0);
  CHECK(hits == 4);
}
