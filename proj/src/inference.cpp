#include "solar/inference.hpp"

#include <algorithm>

namespace solar {

std::string strategy_name(RetrievalStrategy s) {
  switch (s) {
    case RetrievalStrategy::Situation: return "situation";
    case RetrievalStrategy::SchwartzValue: return "schwartz_value";
    case RetrievalStrategy::ValueTradeoff: return "value_tradeoff";
  }
  throw Error("unknown retrieval strategy");
}

std::string variant_name(InputVariant v) {
  switch (v) {
    case InputVariant::CommentOnly: return "comment";
    case InputVariant::CommentPlusTradeoff: return "comment_tradeoff";
    case InputVariant::CommentPlusSchwartz: return "comment_schwartz";
  }
  throw Error("unknown input variant");
}

std::optional<RetrievalStrategy> parse_strategy(std::string_view text) {
  std::string t = lowercase(trim(text));
  if (t == "situation") return RetrievalStrategy::Situation;
  if (t == "schwartz_value" || t == "schwartz") return RetrievalStrategy::SchwartzValue;
  if (t == "value_tradeoff" || t == "tradeoff") return RetrievalStrategy::ValueTradeoff;
  return std::nullopt;
}

std::optional<InputVariant> parse_variant(std::string_view text) {
  std::string t = lowercase(trim(text));
  if (t == "comment") return InputVariant::CommentOnly;
  if (t == "comment_tradeoff" || t == "tradeoff") return InputVariant::CommentPlusTradeoff;
  if (t == "comment_schwartz" || t == "schwartz") return InputVariant::CommentPlusSchwartz;
  return std::nullopt;
}

JudgmentIndex::JudgmentIndex(const Corpus& corpus) {
  for (const Instance& inst : corpus.instances) {
    if (inst.judgment) {
      by_situation_[inst.situation_id].emplace_back(inst.redditor_id, *inst.judgment);
    }
  }
}

const std::vector<std::pair<std::string, Judgment>>& JudgmentIndex::judgments_on(
    const std::string& situation_id) const {
  static const std::vector<std::pair<std::string, Judgment>> empty;
  auto it = by_situation_.find(situation_id);
  return it == by_situation_.end() ? empty : it->second;
}

Controversiality controversiality(const JudgmentIndex& index, const std::string& situation_id,
                                  const std::string& exclude_redditor, double threshold) {
  std::int64_t acceptable = 0;
  std::int64_t total = 0;
  for (const auto& [redditor, judgment] : index.judgments_on(situation_id)) {
    if (redditor == exclude_redditor) continue;
    ++total;
    if (judgment == Judgment::Acceptable) ++acceptable;
  }
  Controversiality out;
  if (total == 0) return out;  // defaults: agreement unset, not controversial
  double share = static_cast<double>(acceptable) / static_cast<double>(total);
  out.agreement = std::max(share, 1.0 - share);
  out.controversial = *out.agreement < threshold;
  return out;
}

Controversiality controversiality(const std::string& situation_id, const Corpus& corpus,
                                  const std::string& exclude_redditor, double threshold) {
  return controversiality(JudgmentIndex(corpus), situation_id, exclude_redditor, threshold);
}

namespace {

std::string clipped(const std::string& text, std::size_t limit) {
  if (limit == 0 || text.size() <= limit) return text;
  return text.substr(0, limit);
}

std::string exemplar_block(const HistoryEntry& e, InputVariant variant, std::size_t limit) {
  std::string block = "[Situation] " + clipped(e.situation_str, limit) + "\n";
  block += "[Comment] " + clipped(e.comment, limit) + "\n";
  if (variant == InputVariant::CommentPlusSchwartz) {
    block += "[Values] " + schwartz_text(e.schwartz.comment_values) + "\n";
  } else if (variant == InputVariant::CommentPlusTradeoff) {
    if (e.tradeoffs.empty()) {
      throw Error("exemplar " + e.instance_id + " has no trade-offs for the requested variant");
    }
    block += "[Value Trade-offs]\n";
    for (const TradeOff& t : e.tradeoffs) block += render_tradeoff(t) + "\n";
  }
  block += "[Judgment] " + judgment_label(e.judgment);
  return block;
}

}  // namespace

std::string build_prompt(const std::string& test_situation_text, const RetrievalResult& exemplars,
                         InputVariant variant, const PromptTemplates& templates,
                         std::size_t prompt_limit) {
  if (exemplars.entries.empty()) throw Error("build_prompt requires at least one exemplar");

  std::string blocks;
  for (std::size_t i = 0; i < exemplars.entries.size(); ++i) {
    if (i) blocks += "\n\n";
    blocks += exemplar_block(*exemplars.entries[i].entry, variant, prompt_limit);
  }
  return render_template(templates.judgment(), {{"examples", blocks},
                                                {"situation", clipped(test_situation_text,
                                                                      prompt_limit)}});
}

Judgment parse_judgment(const std::string& completion) {
  if (completion.empty()) throw ParseError("empty completion");
  std::string low = lowercase(completion);
  for (const char* marker : {"not acceptable", "unacceptable", "1"}) {
    if (low.find(marker) != std::string::npos) return Judgment::Unacceptable;
  }
  for (const char* marker : {"acceptable", "0"}) {
    if (low.find(marker) != std::string::npos) return Judgment::Acceptable;
  }
  throw ParseError("no judgment label in completion: " + completion.substr(0, 120));
}

namespace {

const Vec& query_vector(const EmbeddingStore& embeddings, RetrievalStrategy strategy,
                        const std::string& situation_id) {
  const std::map<std::string, Vec>* store = nullptr;
  const char* what = "";
  switch (strategy) {
    case RetrievalStrategy::Situation:
      store = &embeddings.situation_vecs;
      what = "situation";
      break;
    case RetrievalStrategy::SchwartzValue:
      store = &embeddings.schwartz_vecs;
      what = "schwartz";
      break;
    case RetrievalStrategy::ValueTradeoff:
      store = &embeddings.value_vecs;
      what = "value";
      break;
  }
  auto it = store->find(situation_id);
  if (it == store->end()) {
    throw Error("missing " + std::string(what) + " embedding for test situation " + situation_id);
  }
  return it->second;
}

VectorKind strategy_vector_kind(RetrievalStrategy strategy) {
  switch (strategy) {
    case RetrievalStrategy::Situation: return VectorKind::Situation;
    case RetrievalStrategy::SchwartzValue: return VectorKind::Schwartz;
    case RetrievalStrategy::ValueTradeoff: return VectorKind::Value;
  }
  throw Error("unknown retrieval strategy");
}

}  // namespace

PredictionRecord predict(const Instance& test_instance, const Corpus& corpus,
                         StrategyChoice strategy, const UserHistory& history,
                         const EmbeddingStore& embeddings, ChatClient& chat,
                         const PromptTemplates& templates, const PredictOptions& options) {
  PredictionRecord record;
  record.instance_id = test_instance.instance_id;
  record.situation_id = test_instance.situation_id;
  record.redditor_id = test_instance.redditor_id;
  record.strategy = strategy;

  try {
    if (options.k < 1) throw Error("k must be >= 1");
    if (options.sample_count < 1) throw Error("sample_count must be >= 1");

    const Vec& query = query_vector(embeddings, strategy.retrieval, test_instance.situation_id);
    // The test situation must never be retrievable from the history.
    RetrievalResult exemplars = retrieve(history, query, options.k, test_instance.situation_id,
                                         strategy_vector_kind(strategy.retrieval));
    if (exemplars.entries.empty()) {
      throw Error("no retrievable history for instance " + test_instance.instance_id);
    }
    for (const RetrievedEntry& e : exemplars.entries) {
      record.retrieved_ids.push_back(e.entry->instance_id);
    }

    const std::string test_text =
        situation_text(corpus.situation(test_instance.situation_id));
    record.prompt_text =
        build_prompt(test_text, exemplars, strategy.input, templates, options.prompt_limit);

    ChatRequest request;
    request.user_text = record.prompt_text;
    request.model_name = options.model_name;
    request.temperature = options.sample_count > 1 ? options.multi_sample_temperature : 0.0;

    for (int s = 0; s < options.sample_count; ++s) {
      std::string reply = chat.chat(request);
      record.raw_replies.push_back(reply);
      record.parsed.push_back(parse_judgment(reply));
    }

    std::int64_t unacceptable = 0;
    for (Judgment j : record.parsed) {
      if (j == Judgment::Unacceptable) ++unacceptable;
    }
    // Majority with a deterministic tie-break to Unacceptable.
    record.final = (2 * unacceptable >= static_cast<std::int64_t>(record.parsed.size()))
                       ? Judgment::Unacceptable
                       : Judgment::Acceptable;
  } catch (const std::exception& e) {
    record.failed = true;
    record.error = e.what();
    record.final.reset();
  }
  return record;
}

PredictionRecord solar_predict(const Instance& test_instance, const Corpus& corpus,
                               const JudgmentIndex& index, const UserHistory& history,
                               const EmbeddingStore& embeddings, ChatClient& chat,
                               const PromptTemplates& templates, const PredictOptions& options) {
  Controversiality contro = controversiality(index, test_instance.situation_id,
                                             test_instance.redditor_id, options.threshold);
  StrategyChoice strategy;
  strategy.retrieval =
      contro.controversial ? RetrievalStrategy::ValueTradeoff : RetrievalStrategy::Situation;
  strategy.input = InputVariant::CommentPlusTradeoff;

  PredictionRecord record =
      predict(test_instance, corpus, strategy, history, embeddings, chat, templates, options);
  record.controversial = contro.controversial;
  record.agreement = contro.agreement;
  return record;
}

ndjson::Json prediction_to_json(const PredictionRecord& r) {
  ndjson::Json j;
  j["instance_id"] = r.instance_id;
  j["situation_id"] = r.situation_id;
  j["redditor_id"] = r.redditor_id;
  j["strategy"] = strategy_name(r.strategy.retrieval);
  j["input"] = variant_name(r.strategy.input);
  j["retrieved_ids"] = r.retrieved_ids;
  j["prompt_text"] = r.prompt_text;
  j["raw_replies"] = r.raw_replies;
  ndjson::Json parsed = ndjson::Json::array();
  for (Judgment p : r.parsed) parsed.push_back(judgment_label(p));
  j["parsed"] = std::move(parsed);
  if (r.final) j["final"] = judgment_label(*r.final);
  j["controversial"] = r.controversial;
  if (r.agreement) j["agreement"] = *r.agreement;
  j["failed"] = r.failed;
  if (r.failed) j["error"] = r.error;
  return j;
}

PredictionRecord prediction_from_json(const ndjson::Json& j) {
  PredictionRecord r;
  r.instance_id = j.at("instance_id").get<std::string>();
  r.situation_id = j.at("situation_id").get<std::string>();
  r.redditor_id = j.at("redditor_id").get<std::string>();
  auto strategy = parse_strategy(j.value("strategy", "situation"));
  auto variant = parse_variant(j.value("input", "comment"));
  if (!strategy || !variant) throw ParseError("bad strategy/input in prediction record");
  r.strategy = {*strategy, *variant};
  if (j.contains("retrieved_ids")) {
    for (const auto& id : j["retrieved_ids"]) r.retrieved_ids.push_back(id.get<std::string>());
  }
  r.prompt_text = j.value("prompt_text", "");
  if (j.contains("raw_replies")) {
    for (const auto& reply : j["raw_replies"]) r.raw_replies.push_back(reply.get<std::string>());
  }
  if (j.contains("parsed")) {
    for (const auto& p : j["parsed"]) {
      auto judgment = parse_judgment_label(p.get<std::string>());
      if (!judgment) throw ParseError("bad parsed judgment in prediction record");
      r.parsed.push_back(*judgment);
    }
  }
  if (j.contains("final")) {
    auto final_judgment = parse_judgment_label(j["final"].get<std::string>());
    if (!final_judgment) throw ParseError("bad final judgment in prediction record");
    r.final = final_judgment;
  }
  r.controversial = j.value("controversial", false);
  if (j.contains("agreement")) r.agreement = j["agreement"].get<double>();
  r.failed = j.value("failed", false);
  r.error = j.value("error", "");
  return r;
}

}  // namespace solar
