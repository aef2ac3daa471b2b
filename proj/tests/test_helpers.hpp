#pragma once

#include "solar/corpus.hpp"
#include "solar/providers.hpp"
#include "solar/retrieval.hpp"

#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace solar::testing {

/// Fresh scratch directory under the system temp root, removed on destruction.
class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag) {
    static std::atomic<unsigned> counter{0};
    dir_ = std::filesystem::temp_directory_path() /
           ("solar_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(dir_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(dir_, ec);
  }
  const std::filesystem::path& path() const { return dir_; }

 private:
  std::filesystem::path dir_;
};

inline Instance make_instance(const std::string& instance_id, const std::string& situation_id,
                              const std::string& redditor_id, VerdictCode verdict,
                              const std::string& comment = "a comment") {
  Instance inst;
  inst.instance_id = instance_id;
  inst.situation_id = situation_id;
  inst.redditor_id = redditor_id;
  inst.comment = comment;
  inst.verdict = verdict;
  inst.judgment = map_verdict(verdict);
  return inst;
}

inline Corpus make_corpus(const std::vector<Instance>& instances) {
  Corpus corpus;
  for (const Instance& inst : instances) {
    if (!corpus.situations.count(inst.situation_id)) {
      corpus.situations.emplace(
          inst.situation_id,
          Situation{inst.situation_id, "title of " + inst.situation_id, "body text"});
    }
    corpus.redditors.insert(inst.redditor_id);
    corpus.instances.push_back(inst);
  }
  return corpus;
}

/// Embedding client returning pre-registered vectors; unknown texts throw.
class ScriptedEmbeddingClient : public EmbeddingClient {
 public:
  explicit ScriptedEmbeddingClient(int dim) : dim_(dim) {}

  void set(const std::string& text, Vec v) { vectors_[text] = std::move(v); }

  std::vector<Vec> embed_batch(const std::vector<std::string>& texts) override {
    std::vector<Vec> out;
    for (const std::string& t : texts) {
      auto it = vectors_.find(t);
      if (it == vectors_.end()) throw ProviderError("no scripted embedding for: " + t);
      out.push_back(it->second);
    }
    return out;
  }
  int dim() const override { return dim_; }

 private:
  int dim_;
  std::map<std::string, Vec> vectors_;
};

/// Chat client that fails every call; for asserting a path never talks to it.
class PoisonChatClient : public ChatClient {
 public:
  std::string chat(const ChatRequest&) override {
    throw ProviderError("poison chat client was called");
  }
};

inline Vec random_vec(std::mt19937_64& rng, int dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec v(dim);
  for (int i = 0; i < dim; ++i) v[i] = normal(rng);
  return v;
}

}  // namespace solar::testing
