#pragma once

#include "solar/util.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace solar::math {

// Rows are samples throughout.

struct PcaModel {
  Eigen::RowVectorXd mean;
  Mat components;               // dim x n_components, orthonormal columns
  Vec explained_variance;       // descending
};

/// Fits principal components via SVD of the centered data matrix. Component
/// signs are fixed so the largest-magnitude loading of each component is
/// positive. Throws on fewer than 2 rows or zero total variance.
PcaModel pca_fit(const Eigen::Ref<const Mat>& data, int n_components);

Mat pca_transform(const PcaModel& model, const Eigen::Ref<const Mat>& data);

inline Mat pca_reduce(const Eigen::Ref<const Mat>& data, int n_components) {
  return pca_transform(pca_fit(data, n_components), data);
}

/// Density clustering. Returns one label per row; -1 marks noise. A point is
/// core when its closed eps-ball (distance <= eps, self included) holds at
/// least `min_samples` points. Iteration order is by row index, so labels are
/// deterministic.
std::vector<int> dbscan(const Eigen::Ref<const Mat>& data, double eps, int min_samples);

/// eps estimate for dbscan: sorts each point's distance to its k-th nearest
/// neighbor (self excluded, k = min_samples - 1 others) ascending and returns
/// the value at the point of maximum deviation from the chord between the
/// curve's endpoints.
double kdistance_elbow(const Eigen::Ref<const Mat>& data, int min_samples);

struct KMeansResult {
  std::vector<int> labels;
  Mat centroids;  // k x dim
};

/// Lloyd iterations with greedy++ seeding driven by an explicit RNG, so
/// results are identical across platforms for a given seed. Empty clusters are
/// reseeded at the farthest point from its centroid.
KMeansResult kmeans(const Eigen::Ref<const Mat>& data, int k, std::uint64_t seed,
                    int max_iter = 100);

/// Deterministic in-place Fisher-Yates driven by splitmix64 (std::shuffle is
/// implementation-defined).
void shuffle_indices(std::vector<std::size_t>& indices, std::uint64_t seed);

}  // namespace solar::math
