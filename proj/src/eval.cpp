#include "solar/eval.hpp"

#include "solar/math.hpp"

#include <algorithm>
#include <cmath>

namespace solar {

std::vector<Split> make_splits(const Corpus& corpus, const std::string& redditor_id,
                               std::uint64_t seed, int folds) {
  if (folds < 1) throw Error("folds must be >= 1");

  std::vector<std::string> acceptable;
  std::vector<std::string> unacceptable;
  for (const Instance& inst : corpus.instances) {
    if (inst.redditor_id != redditor_id || !inst.judgment) continue;
    (*inst.judgment == Judgment::Acceptable ? acceptable : unacceptable)
        .push_back(inst.instance_id);
  }
  std::sort(acceptable.begin(), acceptable.end());
  std::sort(unacceptable.begin(), unacceptable.end());

  const std::size_t n = acceptable.size() + unacceptable.size();
  if (n < 2 * static_cast<std::size_t>(folds)) {
    throw Error("redditor " + redditor_id + " has too few instances (" + std::to_string(n) +
                ") for " + std::to_string(folds) + " folds");
  }

  std::vector<Split> splits;
  for (int fold = 0; fold < folds; ++fold) {
    Split split;
    split.fold = fold;
    split.seed = seed;
    for (const std::vector<std::string>* cls : {&acceptable, &unacceptable}) {
      if (cls->empty()) continue;
      std::vector<std::size_t> order(cls->size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::uint64_t stream = fnv1a64(redditor_id) ^ (static_cast<std::uint64_t>(fold) << 32) ^
                             (cls == &acceptable ? 0x41ULL : 0x55ULL);
      math::shuffle_indices(order, mix_seed(seed, stream));

      const auto nc = static_cast<std::int64_t>(cls->size());
      auto n_test = static_cast<std::size_t>(std::llround(0.3 * static_cast<double>(nc)));
      auto n_val = static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(nc)));
      std::size_t n_train = cls->size() - n_test - n_val;

      for (std::size_t i = 0; i < order.size(); ++i) {
        const std::string& id = (*cls)[order[i]];
        if (i < n_train) {
          split.train.push_back(id);
        } else if (i < n_train + n_val) {
          split.validation.push_back(id);
        } else {
          split.test.push_back(id);
        }
      }
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.validation.begin(), split.validation.end());
    std::sort(split.test.begin(), split.test.end());
    splits.push_back(std::move(split));
  }
  return splits;
}

double macro_f1(const std::vector<std::pair<Judgment, Judgment>>& pairs) {
  if (pairs.empty()) throw Error("macro_f1 requires a non-empty list");

  auto f1_for = [&](Judgment cls) {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;
    for (const auto& [predicted, gold] : pairs) {
      const bool p = predicted == cls;
      const bool g = gold == cls;
      if (p && g) ++tp;
      if (p && !g) ++fp;
      if (!p && g) ++fn;
    }
    if (tp == 0) return 0.0;
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    return 2.0 * precision * recall / (precision + recall);
  };

  bool has_acceptable = false;
  bool has_unacceptable = false;
  for (const auto& [predicted, gold] : pairs) {
    (void)predicted;
    (gold == Judgment::Acceptable ? has_acceptable : has_unacceptable) = true;
  }

  double sum = 0;
  int classes = 0;
  if (has_acceptable) {
    sum += f1_for(Judgment::Acceptable);
    ++classes;
  }
  if (has_unacceptable) {
    sum += f1_for(Judgment::Unacceptable);
    ++classes;
  }
  return sum / static_cast<double>(classes);
}

EvalReport aggregate(const std::map<std::string, double>& per_redditor_all,
                     const std::map<std::string, double>& per_redditor_contro,
                     const Corpus& corpus) {
  if (per_redditor_all.empty()) throw Error("aggregate requires at least one redditor score");

  EvalReport report;
  report.per_redditor_f1 = per_redditor_all;

  double sum = 0;
  for (const auto& [id, score] : per_redditor_all) sum += score;
  report.overall = sum / static_cast<double>(per_redditor_all.size());

  // Median split on instance counts; counts of exactly the median go Top.
  std::map<std::string, std::int64_t> counts;
  for (const Instance& inst : corpus.instances) ++counts[inst.redditor_id];
  std::vector<double> sorted_counts;
  for (const auto& [id, score] : per_redditor_all) {
    (void)score;
    auto it = counts.find(id);
    sorted_counts.push_back(it == counts.end() ? 0.0 : static_cast<double>(it->second));
  }
  std::sort(sorted_counts.begin(), sorted_counts.end());
  double median;
  const std::size_t m = sorted_counts.size();
  if (m % 2 == 1) {
    median = sorted_counts[m / 2];
  } else {
    median = 0.5 * (sorted_counts[m / 2 - 1] + sorted_counts[m / 2]);
  }

  auto cohort_of = [&](const std::string& id) -> std::string {
    auto it = counts.find(id);
    double c = it == counts.end() ? 0.0 : static_cast<double>(it->second);
    return c >= median ? "Top50" : "Bottom50";
  };

  std::map<std::string, std::pair<double, std::int64_t>> all_sums;      // cohort -> (sum, n)
  std::map<std::string, std::pair<double, std::int64_t>> contro_sums;
  for (const auto& [id, score] : per_redditor_all) {
    for (const std::string& key : {std::string("All"), cohort_of(id)}) {
      all_sums[key].first += score;
      ++all_sums[key].second;
    }
    auto contro_it = per_redditor_contro.find(id);
    if (contro_it != per_redditor_contro.end()) {
      for (const std::string& key : {std::string("All"), cohort_of(id)}) {
        contro_sums[key].first += contro_it->second;
        ++contro_sums[key].second;
      }
    }
  }

  for (const char* key : {"All", "Top50", "Bottom50"}) {
    CohortScores scores;
    auto a = all_sums.find(key);
    if (a != all_sums.end() && a->second.second > 0) {
      scores.all = a->second.first / static_cast<double>(a->second.second);
    }
    auto c = contro_sums.find(key);
    if (c != contro_sums.end() && c->second.second > 0) {
      scores.contro = c->second.first / static_cast<double>(c->second.second);
    }
    report.cohorts[key] = scores;
  }
  return report;
}

ndjson::Json report_to_json(const EvalReport& report) {
  ndjson::Json j;
  j["overall"] = report.overall;
  ndjson::Json per = ndjson::Json::object();
  for (const auto& [id, score] : report.per_redditor_f1) per[id] = score;
  j["per_redditor_f1"] = std::move(per);
  ndjson::Json cohorts = ndjson::Json::object();
  for (const auto& [name, scores] : report.cohorts) {
    ndjson::Json c = ndjson::Json::object();
    if (scores.all) c["all"] = *scores.all;
    if (scores.contro) c["contro"] = *scores.contro;
    cohorts[name] = std::move(c);
  }
  j["cohorts"] = std::move(cohorts);
  if (report.run_spread) {
    j["run_spread"] = {{"min", report.run_spread->first}, {"max", report.run_spread->second}};
  }
  return j;
}

}  // namespace solar
