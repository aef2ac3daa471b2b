#include "solar/values.hpp"

#include "test_helpers.hpp"

#include <doctest.h>

#include <random>
#include <set>

using namespace solar;
using solar::testing::ScriptedEmbeddingClient;

namespace {

const Situation kSituation{"s1", "Not babysitting my niece", "longer description here"};

PromptTemplates the_templates() { return PromptTemplates::load_default(); }

MockChatClient single_reply(const std::string& reply) {
  std::vector<ChatRule> rules;
  rules.push_back({"", {}, "", "", {reply}});
  return MockChatClient(std::move(rules));
}

}  // namespace

TEST_CASE("the Schwartz enum covers exactly ten values with stable names") {
  std::set<std::string> names;
  for (SchwartzValue v : kAllSchwartzValues) names.insert(schwartz_name(v));
  CHECK(names.size() == 10);
  CHECK(names.count("Self-Direction") == 1);
  CHECK(names.count("Universalism") == 1);
}

TEST_CASE("schwartz names parse through case and separator variants") {
  CHECK(parse_schwartz("Self-Direction") == SchwartzValue::SelfDirection);
  CHECK(parse_schwartz("self direction") == SchwartzValue::SelfDirection);
  CHECK(parse_schwartz("SELFDIRECTION") == SchwartzValue::SelfDirection);
  CHECK(parse_schwartz("benevolence ") == SchwartzValue::Benevolence);
  CHECK_FALSE(parse_schwartz("Freedom").has_value());
  CHECK_FALSE(parse_schwartz("").has_value());
}

TEST_CASE("annotate_schwartz parses the two-line reply format") {
  auto chat = single_reply(
      "[Situation] Security, Benevolence\n[Comment] Self-Direction, Universalism");
  PromptTemplates templates = the_templates();
  SchwartzAnnotation ann = annotate_schwartz(kSituation, "a comment", chat, templates);
  CHECK(ann.situation_values[0] == SchwartzValue::Security);
  CHECK(ann.situation_values[1] == SchwartzValue::Benevolence);
  CHECK(ann.comment_values[0] == SchwartzValue::SelfDirection);
  CHECK(ann.comment_values[1] == SchwartzValue::Universalism);
}

TEST_CASE("annotate_schwartz retries once with a reminder, then fails with the raw text") {
  PromptTemplates templates = the_templates();
  // A reply that names a non-Schwartz value is a parse error.
  {
    auto chat = single_reply("[Situation] Freedom, Security\n[Comment] Power, Hedonism");
    CHECK_THROWS_WITH_AS(annotate_schwartz(kSituation, "c", chat, templates),
                         doctest::Contains("Freedom"), ParseError);
  }
  // First reply malformed, the reminder retry succeeds. The retry prompt is
  // longer, so scope the good rule to it.
  {
    std::vector<ChatRule> rules;
    rules.push_back(
        {"", {"Reminder:"}, "", "", {"[Situation] Security, Power\n[Comment] Hedonism, Power"}});
    rules.push_back({"", {}, "", "", {"no brackets at all"}});
    MockChatClient chat(std::move(rules));
    SchwartzAnnotation ann = annotate_schwartz(kSituation, "c", chat, templates);
    CHECK(ann.situation_values[0] == SchwartzValue::Security);
    CHECK(ann.comment_values[0] == SchwartzValue::Hedonism);
  }
  // Identical pair members are rejected.
  {
    auto chat = single_reply("[Situation] Security, Security\n[Comment] Power, Hedonism");
    CHECK_THROWS_AS(annotate_schwartz(kSituation, "c", chat, templates), ParseError);
  }
}

TEST_CASE("annotate_conflicts parses bracketed vs-lists in order") {
  PromptTemplates templates = the_templates();
  {
    auto chat = single_reply(
        R"(["personal autonomy in scheduling vs. family caregiving obligations"])");
    std::vector<ValueConflict> conflicts = annotate_conflicts(kSituation, chat, templates);
    REQUIRE(conflicts.size() == 1);
    CHECK(conflicts[0].value_a == "personal autonomy in scheduling");
    CHECK(conflicts[0].value_b == "family caregiving obligations");
  }
  {
    auto chat = single_reply("[\n  \"a one vs. b one\",\n  \"a two vs. b two\",\n  \"a three vs. b three\"\n]");
    std::vector<ValueConflict> conflicts = annotate_conflicts(kSituation, chat, templates);
    REQUIRE(conflicts.size() == 3);
    CHECK(conflicts[0].value_a == "a one");
    CHECK(conflicts[1].value_a == "a two");
    CHECK(conflicts[2].value_b == "b three");
  }
  {
    auto chat = single_reply(R"(["no separator in this item"])");
    CHECK_THROWS_WITH_AS(annotate_conflicts(kSituation, chat, templates),
                         doctest::Contains("vs."), ParseError);
  }
  {
    auto chat = single_reply("[]");
    CHECK_THROWS_AS(annotate_conflicts(kSituation, chat, templates), ParseError);
  }
  {
    auto chat = single_reply("no list here");
    CHECK_THROWS_AS(annotate_conflicts(kSituation, chat, templates), ParseError);
  }
}

TEST_CASE("trade-off items render and parse as an identity") {
  std::mt19937_64 rng(5);
  const char* words[] = {"family", "autonomy", "honesty", "duty", "care", "freedom"};
  for (int i = 0; i < 50; ++i) {
    TradeOff t;
    t.preferred = std::string(words[rng() % 6]) + " " + words[rng() % 6] + " first";
    t.rejected = std::string(words[rng() % 6]) + " " + words[rng() % 6] + " second";
    TradeOff back = parse_tradeoff_item(render_tradeoff(t));
    CHECK(back.preferred == t.preferred);
    CHECK(back.rejected == t.rejected);
  }
  CHECK_THROWS_AS(parse_tradeoff_item("no arrow here"), ParseError);
  CHECK_THROWS_AS(parse_tradeoff_item("same > same"), ParseError);
}

TEST_CASE("annotate_tradeoffs parses directions and canonicalizes against conflicts") {
  PromptTemplates templates = the_templates();
  std::vector<ValueConflict> conflicts{
      {"personal autonomy in scheduling", "family caregiving obligations"}};

  {
    auto chat = single_reply(
        R"(["family caregiving obligations > personal autonomy in scheduling"])");
    std::vector<TradeOff> tradeoffs =
        annotate_tradeoffs(kSituation, conflicts, "c", "i1", chat, templates);
    REQUIRE(tradeoffs.size() == 1);
    CHECK(tradeoffs[0].preferred == "family caregiving obligations");
    CHECK(tradeoffs[0].rejected == "personal autonomy in scheduling");
    CHECK_FALSE(tradeoffs[0].model_generated);
    CHECK(tradeoffs[0].source_instance == "i1");
  }
  // Reversed direction swaps the fields.
  {
    auto chat = single_reply(
        R"(["personal autonomy in scheduling > family caregiving obligations"])");
    std::vector<TradeOff> tradeoffs =
        annotate_tradeoffs(kSituation, conflicts, "c", "i1", chat, templates);
    CHECK(tradeoffs[0].preferred == "personal autonomy in scheduling");
    CHECK_FALSE(tradeoffs[0].model_generated);
  }
  // Normalized matching tolerates case and punctuation.
  {
    auto chat = single_reply(
        R"(["Family caregiving obligations! > PERSONAL autonomy, in scheduling"])");
    std::vector<TradeOff> tradeoffs =
        annotate_tradeoffs(kSituation, conflicts, "c", "i1", chat, templates);
    CHECK(tradeoffs[0].preferred == "family caregiving obligations");
    CHECK(tradeoffs[0].rejected == "personal autonomy in scheduling");
    CHECK_FALSE(tradeoffs[0].model_generated);
  }
  // A pair outside the conflict list is retained but flagged.
  {
    auto chat = single_reply(R"(["honesty with strangers > quiet social peace"])");
    std::vector<TradeOff> tradeoffs =
        annotate_tradeoffs(kSituation, conflicts, "c", "i1", chat, templates);
    CHECK(tradeoffs[0].model_generated);
    CHECK(tradeoffs[0].preferred == "honesty with strangers");
  }
  // Multiple items keep their order; a subset of conflicts is fine.
  {
    std::vector<ValueConflict> three{{"aa bb cc", "dd ee ff"}, {"gg hh ii", "jj kk ll"},
                                     {"mm nn oo", "pp qq rr"}};
    auto chat = single_reply(R"(["aa bb cc > dd ee ff", "jj kk ll > gg hh ii"])");
    std::vector<TradeOff> tradeoffs =
        annotate_tradeoffs(kSituation, three, "c", "i1", chat, templates);
    REQUIRE(tradeoffs.size() == 2);
    CHECK_FALSE(tradeoffs[0].model_generated);
    CHECK_FALSE(tradeoffs[1].model_generated);
    CHECK(tradeoffs[1].preferred == "jj kk ll");
  }
  {
    auto chat = single_reply(R"(["item without the separator"])");
    CHECK_THROWS_AS(annotate_tradeoffs(kSituation, conflicts, "c", "i1", chat, templates),
                    ParseError);
  }
  CHECK_THROWS_AS(annotate_tradeoffs(kSituation, {}, "c", "i1",
                                     *std::make_unique<testing::PoisonChatClient>(), templates),
                  Error);
}

TEST_CASE("annotate_tradeoffs falls back to embedding cosine when words drift") {
  PromptTemplates templates = the_templates();
  std::vector<ValueConflict> conflicts{{"family caregiving obligations", "personal freedom"}};
  // One extra token: normalized exact match fails, cosine over mock embeddings
  // stays above the 0.8 floor.
  auto chat = single_reply(R"(["strict family caregiving obligations > personal freedom"])");
  MockEmbeddingClient matcher(64);
  std::vector<TradeOff> tradeoffs =
      annotate_tradeoffs(kSituation, conflicts, "c", "i1", chat, templates, &matcher);
  REQUIRE(tradeoffs.size() == 1);
  CHECK_FALSE(tradeoffs[0].model_generated);
  CHECK(tradeoffs[0].preferred == "family caregiving obligations");

  // Without the matcher the same item is model-generated.
  auto chat2 = single_reply(R"(["strict family caregiving obligations > personal freedom"])");
  std::vector<TradeOff> no_matcher =
      annotate_tradeoffs(kSituation, conflicts, "c", "i1", chat2, templates, nullptr);
  CHECK(no_matcher[0].model_generated);
}

TEST_CASE("value_text is a sorted, deduplicated, order-invariant join") {
  std::vector<ValueConflict> conflicts{{"beta value", "alpha value"}};
  CHECK(value_text(conflicts) == "alpha value; beta value");

  std::vector<ValueConflict> two{{"shared phrase", "first other"}, {"second other", "shared phrase"}};
  std::string text = value_text(two);
  CHECK(text == "first other; second other; shared phrase");

  std::vector<ValueConflict> reversed{{"second other", "shared phrase"},
                                      {"shared phrase", "first other"}};
  CHECK(value_text(reversed) == text);

  std::vector<TradeOff> tradeoffs;
  tradeoffs.push_back({"z phrase", "a phrase", "i1", false});
  CHECK(value_text(tradeoffs) == "a phrase; z phrase");

  CHECK_THROWS_AS(value_text(std::vector<ValueConflict>{}), Error);
}

TEST_CASE("cluster_values groups duplicated phrases into equal clusters") {
  // 100 copies each of 3 distinct phrases: all copies embed identically, so
  // the density stage alone must produce 3 clusters of 100.
  std::vector<std::string> phrases;
  for (int i = 0; i < 100; ++i) {
    phrases.push_back("alpha considerations of one kind");
    phrases.push_back("beta considerations of another kind");
    phrases.push_back("gamma considerations of a third kind");
  }
  MockEmbeddingClient embed(64);
  ClusteringParams params;
  params.embed_dim = 64;
  params.min_cluster_size = 100;
  std::vector<ValueCluster> clusters = cluster_values(phrases, embed, params);

  REQUIRE(clusters.size() == 3);
  for (const ValueCluster& c : clusters) {
    CHECK(c.items.size() == 100);
    CHECK(c.members.size() == 1);
  }

  // Partition: every input index appears exactly once.
  std::set<std::size_t> seen;
  for (const ValueCluster& c : clusters) {
    for (std::size_t item : c.items) CHECK(seen.insert(item).second);
  }
  CHECK(seen.size() == phrases.size());
}

TEST_CASE("cluster_values enforces its preconditions") {
  MockEmbeddingClient embed(64);
  ClusteringParams params;
  params.embed_dim = 64;
  params.min_cluster_size = 100;
  CHECK_THROWS_AS(cluster_values({"one phrase", "two phrase"}, embed, params), Error);

  std::vector<std::string> same(200, "identical phrase everywhere");
  CHECK_THROWS_WITH_AS(cluster_values(same, embed, params), doctest::Contains("degenerate"),
                       Error);
}

TEST_CASE("cluster_values sweeps leftovers into centroids or k-means groups") {
  // Two dense blobs of 12 plus 6 scattered points, via scripted embeddings.
  ScriptedEmbeddingClient embed(16);
  std::vector<std::string> phrases;
  std::mt19937_64 rng(17);
  std::normal_distribution<double> jitter(0.0, 0.01);

  auto add = [&](const std::string& name, double cx, double cy) {
    Vec v = Vec::Zero(16);
    v[0] = cx + jitter(rng);
    v[1] = cy + jitter(rng);
    embed.set(name, v);
    phrases.push_back(name);
  };
  for (int i = 0; i < 12; ++i) add("blob a phrase " + std::to_string(i), 0.0, 0.0);
  for (int i = 0; i < 12; ++i) add("blob b phrase " + std::to_string(i), 10.0, 0.0);
  // Far outliers, in one loose group of their own.
  for (int i = 0; i < 6; ++i) add("stray phrase " + std::to_string(i), 40.0 + i * 3.0, 20.0);

  ClusteringParams params;
  params.embed_dim = 16;
  params.reduce_dim = 2;
  params.min_cluster_size = 8;
  params.assignment_threshold = 0.95;
  params.seed = 9;

  std::vector<ValueCluster> clusters = cluster_values(phrases, embed, params);
  // Every phrase assigned exactly once.
  std::set<std::size_t> seen;
  std::size_t total = 0;
  for (const ValueCluster& c : clusters) {
    for (std::size_t item : c.items) {
      CHECK(seen.insert(item).second);
      ++total;
    }
  }
  CHECK(total == phrases.size());
  CHECK(clusters.size() >= 3);  // two dense blobs plus at least one fallback group

  // The two blobs stay intact inside single clusters.
  auto cluster_of = [&](const std::string& phrase) {
    for (const ValueCluster& c : clusters) {
      for (const std::string& m : c.members) {
        if (m == phrase) return c.cluster_id;
      }
    }
    return -1;
  };
  int blob_a = cluster_of("blob a phrase 0");
  int blob_b = cluster_of("blob b phrase 0");
  CHECK(blob_a != blob_b);
  for (int i = 1; i < 12; ++i) {
    CHECK(cluster_of("blob a phrase " + std::to_string(i)) == blob_a);
    CHECK(cluster_of("blob b phrase " + std::to_string(i)) == blob_b);
  }
}

TEST_CASE("name_clusters fills names and validates exemplars") {
  PromptTemplates templates = the_templates();
  ValueCluster cluster;
  cluster.cluster_id = 0;
  cluster.items = {3, 7, 9};
  cluster.item_texts = {"respecting personal space", "honoring boundaries", "privacy at home"};
  cluster.members = cluster.item_texts;

  {
    auto chat = single_reply(
        "NAME: Boundary Awareness and Respect\n"
        "PROMPT: Does this example involve respecting someone's boundaries?\n"
        "EXAMPLE_IDS: [3, 7, 9]");
    std::vector<ValueCluster> named = name_clusters({cluster}, chat, templates);
    REQUIRE(named.size() == 1);
    CHECK(named[0].name == "Boundary Awareness and Respect");
    CHECK(named[0].descriptor ==
          "Does this example involve respecting someone's boundaries?");
    CHECK(named[0].exemplars == std::vector<std::size_t>{3, 7, 9});
  }
  {
    auto chat = single_reply("NAME: X\nPROMPT: p\nEXAMPLE_IDS: [3, 7, 42]");
    CHECK_THROWS_WITH_AS(name_clusters({cluster}, chat, templates), doctest::Contains("42"),
                         ParseError);
  }
  {
    auto chat = single_reply(
        "NAME: one two three four five six seven eight nine\nPROMPT: p\nEXAMPLE_IDS: [3, 7, 9]");
    CHECK_THROWS_AS(name_clusters({cluster}, chat, templates), ParseError);
  }
  {
    auto chat = single_reply("free text with no structure");
    CHECK_THROWS_AS(name_clusters({cluster}, chat, templates), ParseError);
  }
  {
    ValueCluster empty;
    empty.cluster_id = 1;
    auto chat = single_reply("NAME: X\nPROMPT: p\nEXAMPLE_IDS: [0, 1, 2]");
    CHECK_THROWS_AS(name_clusters({empty}, chat, templates), Error);
  }
}
