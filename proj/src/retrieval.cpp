#include "solar/retrieval.hpp"

#include <algorithm>

namespace solar {

namespace {

std::vector<double> json_vec(const Vec& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Vec vec_from_json(const ndjson::Json& values) {
  Vec v(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    v[static_cast<Eigen::Index>(i)] = values[i].get<double>();
  }
  return v;
}

const Vec& entry_vec(const HistoryEntry& e, VectorKind kind) {
  switch (kind) {
    case VectorKind::Situation: return e.situation_vec;
    case VectorKind::Value: return e.value_vec;
    case VectorKind::Schwartz: return e.schwartz_vec;
  }
  throw Error("unknown vector kind");
}

}  // namespace

UserHistory build_history(const Corpus& corpus, const AnnotationStore& annotations,
                          const EmbeddingStore& embeddings, const std::string& redditor_id) {
  if (!corpus.redditors.count(redditor_id)) {
    throw Error("unknown redditor: " + redditor_id);
  }

  UserHistory history;
  history.redditor_id = redditor_id;
  history.dim = embeddings.dim;

  std::vector<const Instance*> mine = corpus.instances_of(redditor_id);
  std::sort(mine.begin(), mine.end(), [](const Instance* a, const Instance* b) {
    return a->instance_id < b->instance_id;
  });

  for (const Instance* inst : mine) {
    if (!inst->judgment) continue;  // INFO carries no judgment

    auto require_vec = [&](const std::map<std::string, Vec>& store, const char* what) -> const Vec& {
      auto it = store.find(inst->situation_id);
      if (it == store.end()) {
        throw Error("missing " + std::string(what) + " embedding for situation " +
                    inst->situation_id + " (instance " + inst->instance_id + ")");
      }
      if (it->second.size() != embeddings.dim) {
        throw Error("embedding dimension mismatch for situation " + inst->situation_id);
      }
      return it->second;
    };

    auto schwartz_it = annotations.schwartz_by_instance.find(inst->instance_id);
    if (schwartz_it == annotations.schwartz_by_instance.end()) {
      throw Error("missing schwartz annotation for instance " + inst->instance_id);
    }
    auto tradeoff_it = annotations.tradeoffs_by_instance.find(inst->instance_id);
    if (tradeoff_it == annotations.tradeoffs_by_instance.end()) {
      throw Error("missing trade-off annotation for instance " + inst->instance_id);
    }

    HistoryEntry entry;
    entry.instance_id = inst->instance_id;
    entry.situation_id = inst->situation_id;
    entry.situation_str = situation_text(corpus.situation(inst->situation_id));
    entry.situation_vec = require_vec(embeddings.situation_vecs, "situation");
    entry.value_vec = require_vec(embeddings.value_vecs, "value");
    entry.schwartz_vec = require_vec(embeddings.schwartz_vecs, "schwartz");
    entry.comment = inst->comment;
    entry.tradeoffs = tradeoff_it->second;
    entry.schwartz = schwartz_it->second;
    entry.judgment = *inst->judgment;
    history.entries.push_back(std::move(entry));
  }

  if (history.entries.empty()) {
    throw Error("redditor " + redditor_id + " has no judgment-bearing instances");
  }
  return history;
}

RetrievalResult retrieve(const UserHistory& history, const Vec& query, int k,
                         const std::optional<std::string>& exclude_situation, VectorKind kind) {
  if (k < 1) throw Error("k must be >= 1");
  if (query.size() != history.dim) {
    throw Error("query dimension " + std::to_string(query.size()) + " does not match history dim " +
                std::to_string(history.dim));
  }

  std::vector<RetrievedEntry> scored;
  scored.reserve(history.entries.size());
  for (const HistoryEntry& entry : history.entries) {
    if (exclude_situation && entry.situation_id == *exclude_situation) continue;
    scored.push_back({&entry, (query - entry_vec(entry, kind)).norm()});
  }
  std::sort(scored.begin(), scored.end(), [](const RetrievedEntry& a, const RetrievedEntry& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.entry->instance_id < b.entry->instance_id;
  });
  if (scored.size() > static_cast<std::size_t>(k)) scored.resize(static_cast<std::size_t>(k));
  return {std::move(scored)};
}

RetrievalResult retrieve_by_situation(const UserHistory& history, const Vec& query, int k,
                                      const std::optional<std::string>& exclude_situation) {
  return retrieve(history, query, k, exclude_situation, VectorKind::Situation);
}

RetrievalResult retrieve_by_value(const UserHistory& history, const Vec& query, int k,
                                  const std::optional<std::string>& exclude_situation) {
  return retrieve(history, query, k, exclude_situation, VectorKind::Value);
}

double mean_retrieval_distance(const UserHistory& history, const std::vector<Vec>& queries,
                               int k) {
  if (history.entries.empty()) throw Error("mean_retrieval_distance requires a non-empty history");
  if (queries.empty()) throw Error("mean_retrieval_distance requires at least one query");

  double total = 0;
  for (const Vec& q : queries) {
    RetrievalResult r = retrieve_by_situation(history, q, k);
    double sum = 0;
    for (const RetrievedEntry& e : r.entries) sum += e.distance;
    total += sum / static_cast<double>(r.entries.size());
  }
  return total / static_cast<double>(queries.size());
}

void save_history(const UserHistory& history, const std::string& model_name,
                  const std::filesystem::path& file) {
  ndjson::Json doc;
  doc["redditor_id"] = history.redditor_id;
  doc["model"] = model_name;
  doc["dim"] = history.dim;
  ndjson::Json entries = ndjson::Json::array();
  for (const HistoryEntry& e : history.entries) {
    ndjson::Json j;
    j["instance_id"] = e.instance_id;
    j["situation_id"] = e.situation_id;
    j["situation_text"] = e.situation_str;
    j["judgment"] = judgment_label(e.judgment);
    j["comment"] = e.comment;
    j["schwartz_situation"] = {schwartz_name(e.schwartz.situation_values[0]),
                               schwartz_name(e.schwartz.situation_values[1])};
    j["schwartz_comment"] = {schwartz_name(e.schwartz.comment_values[0]),
                             schwartz_name(e.schwartz.comment_values[1])};
    ndjson::Json tradeoffs = ndjson::Json::array();
    for (const TradeOff& t : e.tradeoffs) {
      tradeoffs.push_back({{"preferred", t.preferred},
                           {"rejected", t.rejected},
                           {"model_generated", t.model_generated}});
    }
    j["tradeoffs"] = std::move(tradeoffs);
    j["situation_vec"] = json_vec(e.situation_vec);
    j["value_vec"] = json_vec(e.value_vec);
    j["schwartz_vec"] = json_vec(e.schwartz_vec);
    entries.push_back(std::move(j));
  }
  doc["entries"] = std::move(entries);
  ndjson::atomic_write(file, doc.dump());
}

UserHistory load_history(const std::filesystem::path& file, const std::string& expect_model,
                         int expect_dim) {
  ndjson::Json doc = ndjson::Json::parse(ndjson::read_text(file));
  if (doc.value("model", "") != expect_model) {
    throw Error("history " + file.string() + " was built with model \"" + doc.value("model", "") +
                "\", expected \"" + expect_model + "\"");
  }
  UserHistory history;
  history.redditor_id = doc.at("redditor_id").get<std::string>();
  history.dim = doc.at("dim").get<int>();
  if (expect_dim > 0 && history.dim != expect_dim) {
    throw Error("history dim " + std::to_string(history.dim) + " does not match expected " +
                std::to_string(expect_dim));
  }
  for (const auto& j : doc.at("entries")) {
    HistoryEntry e;
    e.instance_id = j.at("instance_id").get<std::string>();
    e.situation_id = j.at("situation_id").get<std::string>();
    e.situation_str = j.value("situation_text", "");
    auto judgment = parse_judgment_label(j.at("judgment").get<std::string>());
    if (!judgment) throw Error("bad judgment label in " + file.string());
    e.judgment = *judgment;
    e.comment = j.value("comment", "");
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
    e.schwartz.situation_values = parse_pair("schwartz_situation");
    e.schwartz.comment_values = parse_pair("schwartz_comment");
    for (const auto& t : j.at("tradeoffs")) {
      TradeOff to;
      to.preferred = t.at("preferred").get<std::string>();
      to.rejected = t.at("rejected").get<std::string>();
      to.model_generated = t.value("model_generated", false);
      to.source_instance = e.instance_id;
      e.tradeoffs.push_back(std::move(to));
    }
    e.situation_vec = vec_from_json(j.at("situation_vec"));
    e.value_vec = vec_from_json(j.at("value_vec"));
    e.schwartz_vec = vec_from_json(j.at("schwartz_vec"));
    if (e.situation_vec.size() != history.dim || e.value_vec.size() != history.dim ||
        e.schwartz_vec.size() != history.dim) {
      throw Error("vector dimension mismatch in " + file.string());
    }
    history.entries.push_back(std::move(e));
  }
  if (history.entries.empty()) throw Error("empty history in " + file.string());
  return history;
}

}  // namespace solar
