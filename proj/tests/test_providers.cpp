#include "solar/providers.hpp"

#include "test_helpers.hpp"

#include <doctest.h>

using namespace solar;
using solar::testing::ScratchDir;

TEST_CASE("mock_embed is deterministic and unit-norm") {
  Vec a = mock_embed("x", 64);
  Vec b = mock_embed("x", 64);
  CHECK(a == b);
  CHECK(std::abs(a.norm() - 1.0) <= 1e-9);
  CHECK(std::abs(mock_embed("a longer text with several tokens", 32).norm() - 1.0) <= 1e-9);
}

TEST_CASE("mock_embed rejects tiny dimensions") {
  CHECK_THROWS_AS(mock_embed("x", 7), Error);
  CHECK_NOTHROW(mock_embed("x", 8));
}

TEST_CASE("mock_embed puts overlapping token sets closer than disjoint ones") {
  // Verified by direct computation with the shipped hash.
  Vec base = mock_embed("wedding gift money", 64);
  Vec near_vec = mock_embed("wedding gift card", 64);
  Vec far_vec = mock_embed("poker night apartment", 64);
  CHECK((base - near_vec).norm() < (base - far_vec).norm());
}

TEST_CASE("mock embedding client preserves order and shape") {
  MockEmbeddingClient client(32);
  std::vector<Vec> out = client.embed_batch({"a", "b"});
  REQUIRE(out.size() == 2);
  CHECK(out[0].size() == 32);
  CHECK(out[1].size() == 32);
  CHECK(out[0] == mock_embed("a", 32));
  CHECK(out[1] == mock_embed("b", 32));

  std::vector<Vec> twice = client.embed_batch({"same text", "same text"});
  CHECK(twice[0] == twice[1]);

  CHECK_THROWS_AS(client.embed_batch({}), Error);
  CHECK_THROWS_AS(client.embed_batch({""}), Error);
}

TEST_CASE("mock chat rules match on prefix, contains, suffix and hash") {
  std::vector<ChatRule> rules;
  rules.push_back({"START", {"middle"}, "", "", {"by prefix+contains"}});
  rules.push_back({"", {}, "the end", "", {"by suffix"}});
  rules.push_back({"", {}, "", fnv1a64_hex("exact prompt"), {"by hash"}});
  MockChatClient client(std::move(rules));

  ChatRequest req;
  req.user_text = "START something in the middle here";
  CHECK(client.chat(req) == "by prefix+contains");
  req.user_text = "anything that reaches the end";
  CHECK(client.chat(req) == "by suffix");
  req.user_text = "exact prompt";
  CHECK(client.chat(req) == "by hash");

  req.user_text = "nothing matches this";
  CHECK_THROWS_WITH_AS(client.chat(req), doctest::Contains("no fixture"), ProviderError);
}

TEST_CASE("mock chat cycles replies per distinct prompt") {
  std::vector<ChatRule> rules;
  rules.push_back({"", {"ask"}, "", "", {"first", "second"}});
  MockChatClient client(std::move(rules));

  ChatRequest a;
  a.user_text = "ask one";
  ChatRequest b;
  b.user_text = "ask two";
  CHECK(client.chat(a) == "first");
  CHECK(client.chat(b) == "first");  // independent counter per prompt
  CHECK(client.chat(a) == "second");
  CHECK(client.chat(a) == "first");  // cycles
}

TEST_CASE("audit log records calls and the replay client reproduces them") {
  ScratchDir dir("audit");
  auto file = dir.path() / "audit.ndjson";
  AuditLog audit(file, AuditLog::logical_clock());

  std::vector<ChatRule> rules;
  rules.push_back({"", {}, "", "", {"reply A", "reply B"}});
  MockChatClient client(std::move(rules), &audit);

  ChatRequest req;
  req.user_text = "the prompt";
  req.model_name = "m";
  CHECK(client.chat(req) == "reply A");
  CHECK(client.chat(req) == "reply B");

  std::vector<ndjson::Json> entries = ndjson::read_file(file);
  REQUIRE(entries.size() == 2);
  CHECK(entries[0].at("kind") == "chat");
  CHECK(entries[0].at("seq") == 1);
  CHECK(entries[0].at("ts").get<std::string>().rfind("t", 0) == 0);
  CHECK(entries[0].at("request").at("user") == "the prompt");
  CHECK(entries[0].at("response").at("content") == "reply A");

  ReplayChatClient replay(file);
  CHECK(replay.chat(req) == "reply A");
  CHECK(replay.chat(req) == "reply B");
  CHECK(replay.chat(req) == "reply B");  // sticks at the last recorded reply

  ChatRequest other;
  other.user_text = "never recorded";
  CHECK_THROWS_AS(replay.chat(other), ProviderError);
}

TEST_CASE("mock providers touch no transport even with unroutable endpoints") {
  // The mock pipeline has no transport member at all; exercising it with a
  // poisoned environment shows no network dependency.
  MockEmbeddingClient embed(16);
  CHECK_NOTHROW(embed.embed_batch({"text"}));
  std::vector<ChatRule> rules;
  rules.push_back({"", {}, "", "", {"ok"}});
  MockChatClient chat(std::move(rules));
  ChatRequest req;
  req.user_text = "text";
  CHECK(chat.chat(req) == "ok");
}

namespace {

class FlakyEmbeddingClient : public EmbeddingClient {
 public:
  explicit FlakyEmbeddingClient(int fail_below) : fail_below_(fail_below) {}
  std::vector<Vec> embed_batch(const std::vector<std::string>& texts) override {
    for (const std::string& t : texts) {
      if (static_cast<int>(t.size()) < fail_below_) throw ProviderError("too short: " + t);
    }
    std::vector<Vec> out;
    for (const std::string& t : texts) out.push_back(mock_embed(t, 16));
    return out;
  }
  int dim() const override { return 16; }

 private:
  int fail_below_;
};

}  // namespace

TEST_CASE("embed_all marks failed chunks and continues") {
  FlakyEmbeddingClient client(3);
  std::vector<std::string> texts{"alpha", "zz", "gamma", "delta"};  // "zz" fails its chunk
  EmbedReport report = embed_all(client, texts, 1);
  REQUIRE(report.vectors.size() == 4);
  CHECK(report.vectors[0].has_value());
  CHECK_FALSE(report.vectors[1].has_value());
  CHECK(report.vectors[2].has_value());
  CHECK(report.vectors[3].has_value());
  REQUIRE(report.failures.size() == 1);
  CHECK(report.failures[0].index == 1);
  CHECK(report.failures[0].message.find("zz") != std::string::npos);
}

TEST_CASE("post_with_retries retries transport errors and 5xx with bounded attempts") {
  int calls = 0;
  Transport flaky = [&](const std::string&, const std::string&, const std::string&) -> HttpResult {
    ++calls;
    if (calls < 3) return {0, "connection refused"};
    return {200, "ok"};
  };
  std::vector<int> sleeps;
  auto fake_sleep = [&](int ms) { sleeps.push_back(ms); };

  HttpResult res = post_with_retries(flaky, "/p", "{}", "", 3, 100, fake_sleep);
  CHECK(res.status == 200);
  CHECK(calls == 3);
  REQUIRE(sleeps.size() == 2);
  CHECK(sleeps[0] >= 100);   // base backoff
  CHECK(sleeps[1] >= 200);   // doubled
  CHECK(sleeps[1] <= 200 + 50);

  calls = 0;
  Transport always_500 = [&](const std::string&, const std::string&, const std::string&) {
    ++calls;
    return HttpResult{500, "boom"};
  };
  res = post_with_retries(always_500, "/p", "{}", "", 2, 1, fake_sleep);
  CHECK(res.status == 500);
  CHECK(calls == 3);  // initial attempt + 2 retries

  calls = 0;
  Transport bad_request = [&](const std::string&, const std::string&, const std::string&) {
    ++calls;
    return HttpResult{400, "nope"};
  };
  res = post_with_retries(bad_request, "/p", "{}", "", 5, 1, fake_sleep);
  CHECK(res.status == 400);
  CHECK(calls == 1);  // 4xx is not retried
}
