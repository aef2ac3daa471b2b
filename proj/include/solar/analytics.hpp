#pragma once

#include "solar/retrieval.hpp"
#include "solar/values.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace solar {

struct WinRateCell {
  double rate = 0.0;  // share of occurrences preferring the pair's first value
  std::int64_t support = 0;
};

/// Rows are cluster-level value pairs labeled "A > B" with A before B
/// lexicographically; columns are redditors. Cells exist only at or above the
/// support floor.
struct WinRateMatrix {
  std::vector<std::string> pair_labels;
  std::vector<std::string> redditor_ids;
  std::vector<std::vector<std::optional<WinRateCell>>> cells;  // [row][col]
  std::int64_t skipped_unmapped = 0;  // trade-offs whose phrases map to no cluster
};

WinRateMatrix win_rate_matrix(const std::map<std::string, std::vector<TradeOff>>& by_redditor,
                              const std::vector<ValueCluster>& clusters,
                              std::int64_t min_support = 3);

/// log(count + 1) of per-situation joint appearances. Rows follow `clusters`,
/// columns the ten Schwartz values in declaration order.
Mat cooccurrence_counts(const std::map<std::string, SchwartzAnnotation>& schwartz_by_instance,
                        const Corpus& corpus,
                        const std::map<std::string, std::vector<ValueConflict>>& conflicts_by_situation,
                        const std::vector<ValueCluster>& clusters);

/// PCA onto the two leading components; output centered, components ordered by
/// descending explained variance.
Mat project_2d(const std::vector<Vec>& vectors);

std::string win_rate_csv(const WinRateMatrix& matrix);
std::string matrix_csv(const Mat& matrix, const std::vector<std::string>& row_labels,
                       const std::vector<std::string>& col_labels);

}  // namespace solar
