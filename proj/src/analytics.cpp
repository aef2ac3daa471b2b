#include "solar/analytics.hpp"

#include "solar/math.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace solar {

WinRateMatrix win_rate_matrix(const std::map<std::string, std::vector<TradeOff>>& by_redditor,
                              const std::vector<ValueCluster>& clusters,
                              std::int64_t min_support) {
  std::map<std::string, std::string> cluster_of;  // normalized phrase -> cluster name
  for (const ValueCluster& c : clusters) {
    std::string label = c.name.empty() ? ("cluster_" + std::to_string(c.cluster_id)) : c.name;
    for (const std::string& member : c.members) cluster_of[normalize_phrase(member)] = label;
  }

  WinRateMatrix matrix;
  // pair -> redditor -> (wins for the lexicographically first cluster, total)
  std::map<std::pair<std::string, std::string>,
           std::map<std::string, std::pair<std::int64_t, std::int64_t>>>
      tallies;

  for (const auto& [redditor, tradeoffs] : by_redditor) {
    matrix.redditor_ids.push_back(redditor);
    for (const TradeOff& t : tradeoffs) {
      auto pref = cluster_of.find(normalize_phrase(t.preferred));
      auto rej = cluster_of.find(normalize_phrase(t.rejected));
      if (pref == cluster_of.end() || rej == cluster_of.end()) {
        ++matrix.skipped_unmapped;
        continue;
      }
      if (pref->second == rej->second) continue;  // both sides in one concept
      std::string first = std::min(pref->second, rej->second);
      std::string second = std::max(pref->second, rej->second);
      auto& tally = tallies[{first, second}][redditor];
      ++tally.second;
      if (pref->second == first) ++tally.first;
    }
  }

  // Rows ordered by total occurrences (descending), then label.
  std::vector<std::pair<std::pair<std::string, std::string>, std::int64_t>> row_order;
  for (const auto& [pair, per_redditor] : tallies) {
    std::int64_t total = 0;
    for (const auto& [redditor, tally] : per_redditor) total += tally.second;
    row_order.push_back({pair, total});
  }
  std::sort(row_order.begin(), row_order.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  bool any_cell = false;
  for (const auto& [pair, total] : row_order) {
    (void)total;
    std::vector<std::optional<WinRateCell>> row(matrix.redditor_ids.size());
    const auto& per_redditor = tallies[pair];
    for (std::size_t col = 0; col < matrix.redditor_ids.size(); ++col) {
      auto it = per_redditor.find(matrix.redditor_ids[col]);
      if (it == per_redditor.end()) continue;
      const auto& [wins, count] = it->second;
      if (count < min_support) continue;
      row[col] = WinRateCell{static_cast<double>(wins) / static_cast<double>(count), count};
      any_cell = true;
    }
    matrix.pair_labels.push_back(pair.first + " > " + pair.second);
    matrix.cells.push_back(std::move(row));
  }

  if (!any_cell) {
    throw Error("no value pair reaches the support floor of " + std::to_string(min_support));
  }
  return matrix;
}

Mat cooccurrence_counts(
    const std::map<std::string, SchwartzAnnotation>& schwartz_by_instance, const Corpus& corpus,
    const std::map<std::string, std::vector<ValueConflict>>& conflicts_by_situation,
    const std::vector<ValueCluster>& clusters) {
  std::map<std::string, std::size_t> cluster_row;  // normalized phrase -> row
  for (std::size_t row = 0; row < clusters.size(); ++row) {
    for (const std::string& member : clusters[row].members) {
      cluster_row[normalize_phrase(member)] = row;
    }
  }

  std::map<std::string, const Instance*> instance_by_id;
  for (const Instance& inst : corpus.instances) instance_by_id[inst.instance_id] = &inst;

  // Distinct Schwartz situation values per situation, over all annotations.
  std::map<std::string, std::set<int>> schwartz_of_situation;
  for (const auto& [instance_id, annotation] : schwartz_by_instance) {
    auto it = instance_by_id.find(instance_id);
    if (it == instance_by_id.end()) continue;
    auto& set = schwartz_of_situation[it->second->situation_id];
    set.insert(static_cast<int>(annotation.situation_values[0]));
    set.insert(static_cast<int>(annotation.situation_values[1]));
  }

  Mat counts = Mat::Zero(static_cast<Eigen::Index>(clusters.size()), 10);
  for (const auto& [situation_id, schwartz_set] : schwartz_of_situation) {
    auto conflicts_it = conflicts_by_situation.find(situation_id);
    if (conflicts_it == conflicts_by_situation.end()) continue;

    std::set<std::size_t> rows;
    for (const ValueConflict& c : conflicts_it->second) {
      for (const std::string& phrase : {c.value_a, c.value_b}) {
        auto row_it = cluster_row.find(normalize_phrase(phrase));
        if (row_it != cluster_row.end()) rows.insert(row_it->second);
      }
    }
    for (std::size_t row : rows) {
      for (int value : schwartz_set) {
        counts(static_cast<Eigen::Index>(row), value) += 1.0;
      }
    }
  }

  return (counts.array() + 1.0).log().matrix();
}

Mat project_2d(const std::vector<Vec>& vectors) {
  if (vectors.size() < 3) throw Error("project_2d requires at least 3 vectors");
  const Eigen::Index dim = vectors[0].size();
  for (const Vec& v : vectors) {
    if (v.size() != dim) throw Error("project_2d requires a shared dimension");
  }
  Mat data(static_cast<Eigen::Index>(vectors.size()), dim);
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    data.row(static_cast<Eigen::Index>(i)) = vectors[i];
  }
  return math::pca_reduce(data, 2);
}

namespace {

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += "\"";
  return out;
}

}  // namespace

std::string win_rate_csv(const WinRateMatrix& matrix) {
  std::ostringstream out;
  out << "pair";
  for (const std::string& id : matrix.redditor_ids) out << ',' << csv_escape(id);
  out << '\n';
  for (std::size_t row = 0; row < matrix.pair_labels.size(); ++row) {
    out << csv_escape(matrix.pair_labels[row]);
    for (const auto& cell : matrix.cells[row]) {
      out << ',';
      if (cell) out << cell->rate;
    }
    out << '\n';
  }
  return out.str();
}

std::string matrix_csv(const Mat& matrix, const std::vector<std::string>& row_labels,
                       const std::vector<std::string>& col_labels) {
  std::ostringstream out;
  out << "row";
  for (const std::string& c : col_labels) out << ',' << csv_escape(c);
  out << '\n';
  for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
    out << csv_escape(row_labels[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < matrix.cols(); ++j) out << ',' << matrix(i, j);
    out << '\n';
  }
  return out.str();
}

}  // namespace solar
