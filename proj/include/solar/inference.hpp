#pragma once

#include "solar/corpus.hpp"
#include "solar/prompts.hpp"
#include "solar/providers.hpp"
#include "solar/retrieval.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace solar {

/// What each few-shot exemplar carries besides the situation.
enum class InputVariant { CommentOnly, CommentPlusTradeoff, CommentPlusSchwartz };

enum class RetrievalStrategy { Situation, SchwartzValue, ValueTradeoff };

struct StrategyChoice {
  RetrievalStrategy retrieval = RetrievalStrategy::Situation;
  InputVariant input = InputVariant::CommentOnly;
};

std::string strategy_name(RetrievalStrategy s);
std::string variant_name(InputVariant v);
std::optional<RetrievalStrategy> parse_strategy(std::string_view text);
std::optional<InputVariant> parse_variant(std::string_view text);

/// Situation-id -> judgments of everyone who commented on it.
class JudgmentIndex {
 public:
  explicit JudgmentIndex(const Corpus& corpus);
  const std::vector<std::pair<std::string, Judgment>>& judgments_on(
      const std::string& situation_id) const;

 private:
  std::map<std::string, std::vector<std::pair<std::string, Judgment>>> by_situation_;
};

struct Controversiality {
  std::optional<double> agreement;  // absent when no other judgments exist
  bool controversial = false;
};

/// Agreement = max(share acceptable, share unacceptable) among judgments by
/// redditors other than `exclude_redditor`; controversial iff strictly below
/// the threshold. With no other judgments the situation counts as
/// non-controversial and the agreement stays unset.
Controversiality controversiality(const JudgmentIndex& index, const std::string& situation_id,
                                  const std::string& exclude_redditor, double threshold = 0.70);
Controversiality controversiality(const std::string& situation_id, const Corpus& corpus,
                                  const std::string& exclude_redditor, double threshold = 0.70);

/// Renders the few-shot prompt: instruction header, one block per exemplar
/// ([Situation]/[Comment]/optional values/[Judgment]), then the new situation
/// and the answer request.
std::string build_prompt(const std::string& test_situation_text, const RetrievalResult& exemplars,
                         InputVariant variant, const PromptTemplates& templates,
                         std::size_t prompt_limit = kDefaultPromptLimit);

/// Case-insensitive label scan. The unacceptable markers ("not acceptable",
/// "unacceptable", "1") are checked before the acceptable ones ("acceptable",
/// "0") because of substring shadowing. Throws ParseError when no label is
/// found.
Judgment parse_judgment(const std::string& completion);

struct PredictOptions {
  int k = 5;
  int sample_count = 2;
  double threshold = 0.70;
  double multi_sample_temperature = 0.7;  // temperature 0 when sample_count == 1
  std::size_t prompt_limit = kDefaultPromptLimit;
  std::string model_name;
};

struct PredictionRecord {
  std::string instance_id;
  std::string situation_id;
  std::string redditor_id;
  StrategyChoice strategy;
  std::vector<std::string> retrieved_ids;
  std::string prompt_text;
  std::vector<std::string> raw_replies;
  std::vector<Judgment> parsed;
  std::optional<Judgment> final;  // majority; ties resolve to Unacceptable
  bool controversial = false;
  std::optional<double> agreement;
  bool failed = false;
  std::string error;
};

/// Runs one strategy for one test instance: retrieve (the test situation is
/// always excluded), build the prompt, sample, parse, aggregate. Errors are
/// captured in the record rather than thrown.
PredictionRecord predict(const Instance& test_instance, const Corpus& corpus,
                         StrategyChoice strategy, const UserHistory& history,
                         const EmbeddingStore& embeddings, ChatClient& chat,
                         const PromptTemplates& templates, const PredictOptions& options);

/// Ensemble routing: controversial situations use trade-off retrieval,
/// everything else situation retrieval; exemplars carry trade-offs either way.
PredictionRecord solar_predict(const Instance& test_instance, const Corpus& corpus,
                               const JudgmentIndex& index, const UserHistory& history,
                               const EmbeddingStore& embeddings, ChatClient& chat,
                               const PromptTemplates& templates, const PredictOptions& options);

ndjson::Json prediction_to_json(const PredictionRecord& record);
PredictionRecord prediction_from_json(const ndjson::Json& j);

}  // namespace solar
