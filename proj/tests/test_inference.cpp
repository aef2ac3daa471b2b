#include "solar/inference.hpp"

#include "test_helpers.hpp"

#include <doctest.h>

using namespace solar;
using solar::testing::make_corpus;
using solar::testing::make_instance;
using solar::testing::ScratchDir;

namespace {

Corpus judgments_corpus(const std::vector<std::pair<std::string, VerdictCode>>& who_said_what,
                        const std::string& sid = "s1") {
  std::vector<Instance> instances;
  int serial = 0;
  for (const auto& [redditor, verdict] : who_said_what) {
    instances.push_back(
        make_instance("i" + std::to_string(serial++), sid, redditor, verdict));
  }
  return make_corpus(instances);
}

}  // namespace

TEST_CASE("controversiality follows the strict agreement threshold") {
  // [A, A, A, U] among others: agreement 0.75, not controversial.
  Corpus corpus = judgments_corpus({{"u1", VerdictCode::NTA},
                                    {"u2", VerdictCode::NTA},
                                    {"u3", VerdictCode::NAH},
                                    {"u4", VerdictCode::YTA},
                                    {"target", VerdictCode::YTA}});
  Controversiality c = controversiality("s1", corpus, "target");
  CHECK(c.agreement == doctest::Approx(0.75));
  CHECK_FALSE(c.controversial);

  // [A, U]: agreement 0.5, controversial.
  Corpus split = judgments_corpus(
      {{"u1", VerdictCode::NTA}, {"u2", VerdictCode::YTA}, {"target", VerdictCode::NTA}});
  c = controversiality("s1", split, "target");
  CHECK(c.agreement == doctest::Approx(0.5));
  CHECK(c.controversial);

  // [A, A, A, A]: unanimous.
  Corpus unanimous = judgments_corpus({{"u1", VerdictCode::NTA},
                                       {"u2", VerdictCode::NAH},
                                       {"u3", VerdictCode::YWNBTA},
                                       {"u4", VerdictCode::NTA},
                                       {"target", VerdictCode::YTA}});
  c = controversiality("s1", unanimous, "target");
  CHECK(c.agreement == doctest::Approx(1.0));
  CHECK_FALSE(c.controversial);
}

TEST_CASE("controversiality boundary: 0.69 yes, 0.70 no, 0.71 no") {
  auto with_agreement = [](int acceptable, int total) {
    std::vector<std::pair<std::string, VerdictCode>> judgments;
    for (int i = 0; i < total; ++i) {
      judgments.push_back({"u" + std::to_string(i),
                           i < acceptable ? VerdictCode::NTA : VerdictCode::YTA});
    }
    judgments.push_back({"target", VerdictCode::NTA});
    return judgments_corpus(judgments);
  };

  Controversiality c69 = controversiality("s1", with_agreement(69, 100), "target");
  CHECK(c69.agreement == doctest::Approx(0.69));
  CHECK(c69.controversial);

  Controversiality c70 = controversiality("s1", with_agreement(70, 100), "target");
  CHECK(c70.agreement == doctest::Approx(0.70));
  CHECK_FALSE(c70.controversial);  // strict less-than

  Controversiality c71 = controversiality("s1", with_agreement(71, 100), "target");
  CHECK_FALSE(c71.controversial);
}

TEST_CASE("controversiality excludes the target and handles missing data") {
  // Only the target judged this situation.
  Corpus corpus = judgments_corpus({{"target", VerdictCode::NTA}});
  Controversiality c = controversiality("s1", corpus, "target");
  CHECK_FALSE(c.agreement.has_value());
  CHECK_FALSE(c.controversial);

  // INFO judgments never count.
  Corpus with_info = judgments_corpus(
      {{"u1", VerdictCode::INFO}, {"u2", VerdictCode::NTA}, {"target", VerdictCode::YTA}});
  c = controversiality("s1", with_info, "target");
  CHECK(c.agreement == doctest::Approx(1.0));
}

namespace {

HistoryEntry prompt_entry(const std::string& id, const std::string& situation,
                          const std::string& comment, Judgment judgment) {
  HistoryEntry e;
  e.instance_id = id;
  e.situation_id = "sit_" + id;
  e.situation_str = situation;
  e.comment = comment;
  e.judgment = judgment;
  e.schwartz.situation_values = {SchwartzValue::Security, SchwartzValue::Tradition};
  e.schwartz.comment_values = {SchwartzValue::SelfDirection, SchwartzValue::Universalism};
  e.tradeoffs.push_back({"first phrase", "second phrase", id, false});
  e.tradeoffs.push_back({"third phrase", "fourth phrase", id, false});
  e.situation_vec = Vec::Zero(8);
  e.value_vec = Vec::Zero(8);
  e.schwartz_vec = Vec::Zero(8);
  return e;
}

std::size_t count_occurrences(const std::string& text, const std::string& needle) {
  std::size_t count = 0;
  std::size_t pos = 0;
  while ((pos = text.find(needle, pos)) != std::string::npos) {
    ++count;
    pos += needle.size();
  }
  return count;
}

}  // namespace

TEST_CASE("build_prompt renders the template blocks per variant") {
  PromptTemplates templates = PromptTemplates::load_default();
  std::vector<HistoryEntry> entries;
  entries.push_back(prompt_entry("e1", "Not babysitting my niece", "When you talk to your brother",
                                 Judgment::Acceptable));

  RetrievalResult one;
  one.entries.push_back({&entries[0], 0.0});

  std::string prompt = build_prompt("Canceling a family road trip", one,
                                    InputVariant::CommentOnly, templates);
  CHECK(count_occurrences(prompt, "[Comment]") == 1);
  CHECK(count_occurrences(prompt, "[Values]") == 0);
  CHECK(count_occurrences(prompt, "[Value Trade-offs]") == 0);
  CHECK(count_occurrences(prompt, "[Judgment] Acceptable") == 1);
  CHECK(prompt.find("Canceling a family road trip") != std::string::npos);
  CHECK(prompt.rfind("Acceptable or Unacceptable.") != std::string::npos);

  // Five exemplars with trade-offs render five trade-off blocks.
  for (int i = 1; i < 5; ++i) {
    entries.push_back(prompt_entry("e" + std::to_string(i + 1), "situation " + std::to_string(i),
                                   "comment " + std::to_string(i),
                                   i % 2 ? Judgment::Unacceptable : Judgment::Acceptable));
  }
  RetrievalResult five;
  for (const HistoryEntry& e : entries) five.entries.push_back({&e, 0.1});
  std::string tradeoff_prompt =
      build_prompt("new situation text", five, InputVariant::CommentPlusTradeoff, templates);
  CHECK(count_occurrences(tradeoff_prompt, "[Value Trade-offs]") == 5);
  CHECK(count_occurrences(tradeoff_prompt, "first phrase > second phrase") == 5);
  CHECK(count_occurrences(tradeoff_prompt, "[Situation]") == 6);  // 5 exemplars + the test one

  std::string schwartz_prompt =
      build_prompt("new situation text", five, InputVariant::CommentPlusSchwartz, templates);
  CHECK(count_occurrences(schwartz_prompt, "[Values] Self-Direction, Universalism") == 5);
  CHECK(count_occurrences(schwartz_prompt, "[Value Trade-offs]") == 0);

  RetrievalResult none;
  CHECK_THROWS_AS(build_prompt("x", none, InputVariant::CommentOnly, templates), Error);

  // An exemplar without trade-offs cannot serve the enriched variant.
  std::vector<HistoryEntry> bare;
  bare.push_back(prompt_entry("e9", "sit", "com", Judgment::Acceptable));
  bare[0].tradeoffs.clear();
  RetrievalResult bare_result;
  bare_result.entries.push_back({&bare[0], 0.0});
  CHECK_THROWS_AS(
      build_prompt("x", bare_result, InputVariant::CommentPlusTradeoff, templates), Error);
}

TEST_CASE("build_prompt truncates situation texts to the prompt limit") {
  PromptTemplates templates = PromptTemplates::load_default();
  std::string long_text(5000, 'a');
  std::vector<HistoryEntry> entries;
  entries.push_back(prompt_entry("e1", long_text, "comment", Judgment::Acceptable));
  RetrievalResult one;
  one.entries.push_back({&entries[0], 0.0});
  std::string prompt = build_prompt(long_text, one, InputVariant::CommentOnly, templates, 100);
  CHECK(prompt.find(std::string(101, 'a')) == std::string::npos);
  CHECK(prompt.find(std::string(100, 'a')) != std::string::npos);
}

TEST_CASE("parse_judgment honors the substring shadowing order") {
  CHECK(parse_judgment("Acceptable") == Judgment::Acceptable);
  CHECK(parse_judgment("acceptable.") == Judgment::Acceptable);
  CHECK(parse_judgment("Person X would find this not acceptable.") == Judgment::Unacceptable);
  CHECK(parse_judgment("UNACCEPTABLE") == Judgment::Unacceptable);
  CHECK(parse_judgment("Unacceptable, because boundaries matter") == Judgment::Unacceptable);
  CHECK(parse_judgment("1") == Judgment::Unacceptable);
  CHECK(parse_judgment("0") == Judgment::Acceptable);
  CHECK_THROWS_AS(parse_judgment("I cannot tell"), ParseError);
  CHECK_THROWS_AS(parse_judgment(""), ParseError);

  // Rendering then parsing is the identity on both labels.
  CHECK(parse_judgment(judgment_label(Judgment::Acceptable)) == Judgment::Acceptable);
  CHECK(parse_judgment(judgment_label(Judgment::Unacceptable)) == Judgment::Unacceptable);
}

namespace {

struct PredictFixture {
  Corpus corpus;
  AnnotationStore annotations;
  EmbeddingStore embeddings;
  UserHistory history;
  PromptTemplates templates = PromptTemplates::load_default();

  const Instance* test_instance = nullptr;
};

/// Three situations judged by u1 plus neighbors; u1's history spans all three.
PredictFixture predict_fixture() {
  PredictFixture f;
  f.corpus = make_corpus({
      make_instance("i_u1_s1", "s1", "u1", VerdictCode::NTA, "u1 comment on s1"),
      make_instance("i_u1_s2", "s2", "u1", VerdictCode::YTA, "u1 comment on s2"),
      make_instance("i_u1_s3", "s3", "u1", VerdictCode::NTA, "u1 comment on s3"),
      make_instance("i_u2_s1", "s1", "u2", VerdictCode::NTA, "u2 comment on s1"),
      make_instance("i_u3_s1", "s1", "u3", VerdictCode::YTA, "u3 comment on s1"),
      make_instance("i_u2_s2", "s2", "u2", VerdictCode::YTA, "u2 comment on s2"),
      make_instance("i_u3_s2", "s2", "u3", VerdictCode::YTA, "u3 comment on s2"),
  });
  SchwartzAnnotation ann;
  ann.situation_values = {SchwartzValue::Security, SchwartzValue::Tradition};
  ann.comment_values = {SchwartzValue::SelfDirection, SchwartzValue::Power};
  for (const Instance& inst : f.corpus.instances) {
    f.annotations.schwartz_by_instance[inst.instance_id] = ann;
    f.annotations.tradeoffs_by_instance[inst.instance_id] = {
        {"phrase alpha", "phrase beta", inst.instance_id, false}};
  }
  f.embeddings.dim = 16;
  f.embeddings.model_name = "mock-embed";
  for (const char* sid : {"s1", "s2", "s3"}) {
    f.embeddings.situation_vecs[sid] = mock_embed(std::string("sit ") + sid, 16);
    f.embeddings.value_vecs[sid] = mock_embed(std::string("val ") + sid, 16);
    f.embeddings.schwartz_vecs[sid] = mock_embed(std::string("sch ") + sid, 16);
  }
  f.history = build_history(f.corpus, f.annotations, f.embeddings, "u1");
  f.test_instance = &f.corpus.instances[0];  // i_u1_s1
  return f;
}

}  // namespace

TEST_CASE("predict samples, parses and aggregates with the tie going Unacceptable") {
  PredictFixture f = predict_fixture();
  PredictOptions options;
  options.k = 2;
  options.sample_count = 2;

  {
    std::vector<ChatRule> rules;
    rules.push_back({"", {}, "", "", {"Acceptable"}});
    MockChatClient chat(std::move(rules));
    PredictionRecord r =
        predict(*f.test_instance, f.corpus, {RetrievalStrategy::Situation,
                                             InputVariant::CommentPlusTradeoff},
                f.history, f.embeddings, chat, f.templates, options);
    CHECK_FALSE(r.failed);
    REQUIRE(r.raw_replies.size() == 2);
    CHECK(r.final == Judgment::Acceptable);
    // The test situation never appears among the retrieved exemplars.
    for (const std::string& id : r.retrieved_ids) {
      CHECK(id != "i_u1_s1");
    }
    REQUIRE(r.retrieved_ids.size() == 2);
  }
  {
    std::vector<ChatRule> rules;
    rules.push_back({"", {}, "", "", {"Acceptable", "Unacceptable"}});
    MockChatClient chat(std::move(rules));
    PredictionRecord r =
        predict(*f.test_instance, f.corpus,
                {RetrievalStrategy::Situation, InputVariant::CommentOnly}, f.history,
                f.embeddings, chat, f.templates, options);
    REQUIRE(r.parsed.size() == 2);
    CHECK(r.final == Judgment::Unacceptable);  // tie-break
  }
}

TEST_CASE("predict records failures instead of throwing") {
  PredictFixture f = predict_fixture();
  PredictOptions options;

  // Missing value embedding for the query situation.
  f.embeddings.value_vecs.erase("s1");
  testing::PoisonChatClient poison;
  PredictionRecord r = predict(*f.test_instance, f.corpus,
                               {RetrievalStrategy::ValueTradeoff, InputVariant::CommentOnly},
                               f.history, f.embeddings, poison, f.templates, options);
  CHECK(r.failed);
  CHECK_FALSE(r.final.has_value());
  CHECK(r.error.find("s1") != std::string::npos);

  // An unparseable completion is also captured.
  PredictFixture g = predict_fixture();
  std::vector<ChatRule> rules;
  rules.push_back({"", {}, "", "", {"who knows"}});
  MockChatClient chat(std::move(rules));
  r = predict(*g.test_instance, g.corpus,
              {RetrievalStrategy::Situation, InputVariant::CommentOnly}, g.history, g.embeddings,
              chat, g.templates, options);
  CHECK(r.failed);
  CHECK(r.error.find("judgment") != std::string::npos);
}

TEST_CASE("strategies pick their query vector and metric") {
  PredictFixture f = predict_fixture();
  PredictOptions options;
  options.k = 1;
  options.sample_count = 1;
  std::vector<ChatRule> rules;
  rules.push_back({"", {}, "", "", {"Acceptable"}});
  MockChatClient chat(std::move(rules));

  // With the schwartz query identical to s2's schwartz vector, the nearest
  // schwartz entry must be i_u1_s2.
  f.embeddings.schwartz_vecs["s1"] = f.embeddings.schwartz_vecs["s2"];
  f.history = build_history(f.corpus, f.annotations, f.embeddings, "u1");
  PredictionRecord r =
      predict(*f.test_instance, f.corpus,
              {RetrievalStrategy::SchwartzValue, InputVariant::CommentOnly}, f.history,
              f.embeddings, chat, f.templates, options);
  REQUIRE(r.retrieved_ids.size() == 1);
  CHECK(r.retrieved_ids[0] == "i_u1_s2");

  PredictFixture g = predict_fixture();
  g.embeddings.value_vecs["s1"] = g.embeddings.value_vecs["s3"];
  g.history = build_history(g.corpus, g.annotations, g.embeddings, "u1");
  r = predict(*g.test_instance, g.corpus,
              {RetrievalStrategy::ValueTradeoff, InputVariant::CommentOnly}, g.history,
              g.embeddings, chat, g.templates, options);
  CHECK(r.retrieved_ids[0] == "i_u1_s3");
}

TEST_CASE("solar_predict routes by controversiality with trade-off exemplars either way") {
  PredictFixture f = predict_fixture();
  PredictOptions options;
  options.k = 2;
  options.sample_count = 2;
  std::vector<ChatRule> rules;
  rules.push_back({"", {}, "", "", {"Acceptable"}});
  MockChatClient chat(std::move(rules));
  JudgmentIndex index(f.corpus);

  // s1 for u1: others are u2 (A) and u3 (U) -> agreement 0.5, controversial.
  PredictionRecord contro = solar_predict(*f.test_instance, f.corpus, index, f.history,
                                          f.embeddings, chat, f.templates, options);
  CHECK(contro.controversial);
  CHECK(contro.agreement == doctest::Approx(0.5));
  CHECK(contro.strategy.retrieval == RetrievalStrategy::ValueTradeoff);
  CHECK(contro.strategy.input == InputVariant::CommentPlusTradeoff);
  CHECK(contro.prompt_text.find("[Value Trade-offs]") != std::string::npos);

  // s2 for u1: others are both U -> agreement 1.0, not controversial.
  const Instance* s2_instance = &f.corpus.instances[1];
  PredictionRecord calm = solar_predict(*s2_instance, f.corpus, index, f.history, f.embeddings,
                                        chat, f.templates, options);
  CHECK_FALSE(calm.controversial);
  CHECK(calm.strategy.retrieval == RetrievalStrategy::Situation);
  CHECK(calm.strategy.input == InputVariant::CommentPlusTradeoff);
  CHECK(calm.prompt_text.find("[Value Trade-offs]") != std::string::npos);
}

TEST_CASE("prediction records round-trip through JSON") {
  PredictFixture f = predict_fixture();
  PredictOptions options;
  std::vector<ChatRule> rules;
  rules.push_back({"", {}, "", "", {"Acceptable", "Unacceptable"}});
  MockChatClient chat(std::move(rules));
  JudgmentIndex index(f.corpus);
  PredictionRecord r = solar_predict(*f.test_instance, f.corpus, index, f.history, f.embeddings,
                                     chat, f.templates, options);

  ndjson::Json j = prediction_to_json(r);
  PredictionRecord back = prediction_from_json(j);
  CHECK(back.instance_id == r.instance_id);
  CHECK(back.redditor_id == r.redditor_id);
  CHECK(back.strategy.retrieval == r.strategy.retrieval);
  CHECK(back.strategy.input == r.strategy.input);
  CHECK(back.retrieved_ids == r.retrieved_ids);
  CHECK(back.raw_replies == r.raw_replies);
  CHECK(back.parsed == r.parsed);
  CHECK(back.final == r.final);
  CHECK(back.controversial == r.controversial);
  CHECK(back.agreement == doctest::Approx(*r.agreement));
}

TEST_CASE("the audit log replays into identical predictions") {
  PredictFixture f = predict_fixture();
  PredictOptions options;
  options.sample_count = 2;

  ScratchDir dir("replay");
  auto audit_file = dir.path() / "audit.ndjson";
  PredictionRecord original;
  {
    AuditLog audit(audit_file, AuditLog::logical_clock());
    std::vector<ChatRule> rules;
    rules.push_back({"", {}, "", "", {"Acceptable", "Unacceptable"}});
    MockChatClient chat(std::move(rules), &audit);
    JudgmentIndex index(f.corpus);
    original = solar_predict(*f.test_instance, f.corpus, index, f.history, f.embeddings, chat,
                             f.templates, options);
  }

  ReplayChatClient replay(audit_file);
  JudgmentIndex index(f.corpus);
  PredictionRecord replayed = solar_predict(*f.test_instance, f.corpus, index, f.history,
                                            f.embeddings, replay, f.templates, options);
  CHECK(prediction_to_json(replayed).dump() == prediction_to_json(original).dump());
}
