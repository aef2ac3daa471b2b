#pragma once

#include "solar/corpus.hpp"
#include "solar/values.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace solar {

/// Per-situation annotations and vectors the history builder consumes.
struct AnnotationStore {
  std::map<std::string, SchwartzAnnotation> schwartz_by_instance;
  std::map<std::string, std::vector<ValueConflict>> conflicts_by_situation;
  std::map<std::string, std::vector<TradeOff>> tradeoffs_by_instance;
  std::string template_hash;
};

struct EmbeddingStore {
  int dim = 0;
  std::string model_name;
  std::map<std::string, Vec> situation_vecs;  // situation text
  std::map<std::string, Vec> value_vecs;      // canonical conflict text
  std::map<std::string, Vec> schwartz_vecs;   // situation-level Schwartz names
};

struct HistoryEntry {
  std::string instance_id;
  std::string situation_id;
  std::string situation_str;  // prompt-facing situation text
  Vec situation_vec;
  Vec value_vec;
  Vec schwartz_vec;
  std::string comment;
  std::vector<TradeOff> tradeoffs;
  SchwartzAnnotation schwartz;
  Judgment judgment = Judgment::Acceptable;
};

struct UserHistory {
  std::string redditor_id;
  std::vector<HistoryEntry> entries;  // ordered by instance_id
  int dim = 0;
};

/// Which vector the distance is measured on.
enum class VectorKind { Situation, Value, Schwartz };

struct RetrievedEntry {
  const HistoryEntry* entry = nullptr;
  double distance = 0.0;
};

/// Distances non-decreasing; ties broken by instance_id ascending; at most k
/// entries. Pointers borrow from the history passed to retrieve.
struct RetrievalResult {
  std::vector<RetrievedEntry> entries;
};

/// One entry per judgment-bearing instance of the redditor. Fails naming the
/// instance if any embedding or annotation is missing.
UserHistory build_history(const Corpus& corpus, const AnnotationStore& annotations,
                          const EmbeddingStore& embeddings, const std::string& redditor_id);

/// Exact top-k scan by Euclidean distance on the selected vector. Entries on
/// the excluded situation are skipped.
RetrievalResult retrieve(const UserHistory& history, const Vec& query, int k,
                         const std::optional<std::string>& exclude_situation, VectorKind kind);

RetrievalResult retrieve_by_situation(const UserHistory& history, const Vec& query, int k,
                                      const std::optional<std::string>& exclude_situation = {});

RetrievalResult retrieve_by_value(const UserHistory& history, const Vec& query, int k,
                                  const std::optional<std::string>& exclude_situation = {});

/// Mean over queries of the mean top-k situation distance.
double mean_retrieval_distance(const UserHistory& history, const std::vector<Vec>& queries, int k);

/// History sidecar, one file per redditor, versioned by embedding model.
void save_history(const UserHistory& history, const std::string& model_name,
                  const std::filesystem::path& file);
UserHistory load_history(const std::filesystem::path& file, const std::string& expect_model,
                         int expect_dim);

}  // namespace solar
