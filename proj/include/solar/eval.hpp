#pragma once

#include "solar/corpus.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace solar {

/// One 60/10/30 partition of a redditor's judgment-bearing instances.
struct Split {
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> test;
  int fold = 0;
  std::uint64_t seed = 0;
};

/// `folds` independent seeded 60/10/30 partitions, stratified by judgment
/// label. Deterministic for a given (seed, redditor).
std::vector<Split> make_splits(const Corpus& corpus, const std::string& redditor_id,
                               std::uint64_t seed, int folds = 5);

/// Pairs are (predicted, gold). Unweighted mean of per-class F1 over classes
/// present in gold; a single-class gold set scores as that class's F1.
double macro_f1(const std::vector<std::pair<Judgment, Judgment>>& pairs);

struct CohortScores {
  std::optional<double> all;
  std::optional<double> contro;
};

struct EvalReport {
  std::map<std::string, double> per_redditor_f1;
  double overall = 0.0;  // unweighted mean of per_redditor_f1
  std::map<std::string, CohortScores> cohorts;  // keys: All, Top50, Bottom50
  std::optional<std::pair<double, double>> run_spread;  // (min, max) over sample runs
};

/// Cohorts split redditors at the median instance count (ties go Top). The
/// contro map may cover fewer redditors; missing ones drop out of the contro
/// means.
EvalReport aggregate(const std::map<std::string, double>& per_redditor_all,
                     const std::map<std::string, double>& per_redditor_contro,
                     const Corpus& corpus);

ndjson::Json report_to_json(const EvalReport& report);

}  // namespace solar
