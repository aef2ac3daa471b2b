#include "solar/math.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace solar::math {

namespace {

// splitmix64 stream; the project's only RNG primitive.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Unbiased bounded draw by rejection.
  std::uint64_t below(std::uint64_t bound) {
    if (bound == 0) throw Error("rng bound must be positive");
    std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                          std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x = next();
    while (x >= limit) x = next();
    return x % bound;
  }

  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

}  // namespace

PcaModel pca_fit(const Eigen::Ref<const Mat>& data, int n_components) {
  const Eigen::Index rows = data.rows();
  const Eigen::Index cols = data.cols();
  if (rows < 2) throw Error("pca requires at least 2 samples");
  if (n_components < 1) throw Error("pca requires at least 1 component");

  PcaModel model;
  model.mean = data.colwise().mean();
  Mat centered = data.rowwise() - model.mean;

  Eigen::BDCSVD<Mat> svd(centered, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vec& singular = svd.singularValues();
  if (singular.size() == 0 || singular(0) * singular(0) / static_cast<double>(rows - 1) <= 1e-24) {
    throw Error("pca input is degenerate (zero variance)");
  }

  const int c = static_cast<int>(std::min<Eigen::Index>(n_components, std::min(rows, cols)));
  model.components = svd.matrixV().leftCols(c);
  model.explained_variance =
      singular.head(c).array().square() / static_cast<double>(rows - 1);

  // Deterministic sign: largest-magnitude loading positive.
  for (int j = 0; j < c; ++j) {
    Eigen::Index imax;
    model.components.col(j).cwiseAbs().maxCoeff(&imax);
    if (model.components(imax, j) < 0) model.components.col(j) = -model.components.col(j);
  }
  return model;
}

Mat pca_transform(const PcaModel& model, const Eigen::Ref<const Mat>& data) {
  if (data.cols() != model.mean.cols()) throw Error("pca dimension mismatch");
  return (data.rowwise() - model.mean) * model.components;
}

std::vector<int> dbscan(const Eigen::Ref<const Mat>& data, double eps, int min_samples) {
  const Eigen::Index n = data.rows();
  if (min_samples < 1) throw Error("min_samples must be >= 1");
  if (eps < 0) throw Error("eps must be >= 0");

  const double eps_sq = eps * eps;
  auto neighbors_of = [&](Eigen::Index i) {
    std::vector<Eigen::Index> out;
    for (Eigen::Index j = 0; j < n; ++j) {
      if ((data.row(i) - data.row(j)).squaredNorm() <= eps_sq) out.push_back(j);
    }
    return out;
  };

  constexpr int kUnvisited = -2;
  constexpr int kNoise = -1;
  std::vector<int> labels(static_cast<std::size_t>(n), kUnvisited);
  int next_cluster = 0;

  for (Eigen::Index i = 0; i < n; ++i) {
    if (labels[static_cast<std::size_t>(i)] != kUnvisited) continue;
    std::vector<Eigen::Index> neigh = neighbors_of(i);
    if (neigh.size() < static_cast<std::size_t>(min_samples)) {
      labels[static_cast<std::size_t>(i)] = kNoise;
      continue;
    }
    const int cluster = next_cluster++;
    labels[static_cast<std::size_t>(i)] = cluster;
    std::deque<Eigen::Index> frontier(neigh.begin(), neigh.end());
    while (!frontier.empty()) {
      Eigen::Index q = frontier.front();
      frontier.pop_front();
      int& label = labels[static_cast<std::size_t>(q)];
      if (label == kNoise) label = cluster;  // border point
      if (label != kUnvisited) continue;
      label = cluster;
      std::vector<Eigen::Index> qn = neighbors_of(q);
      if (qn.size() >= static_cast<std::size_t>(min_samples)) {
        frontier.insert(frontier.end(), qn.begin(), qn.end());
      }
    }
  }

  for (int& label : labels) {
    if (label == kUnvisited) label = kNoise;
  }
  return labels;
}

double kdistance_elbow(const Eigen::Ref<const Mat>& data, int min_samples) {
  const Eigen::Index n = data.rows();
  if (n < 2) throw Error("kdistance_elbow requires at least 2 samples");
  const int k = std::max(1, min_samples - 1);  // k-th nearest among the others
  if (static_cast<Eigen::Index>(k) >= n) {
    throw Error("min_samples exceeds sample count");
  }

  std::vector<double> kdist(static_cast<std::size_t>(n));
  std::vector<double> dists(static_cast<std::size_t>(n - 1));
  for (Eigen::Index i = 0; i < n; ++i) {
    std::size_t m = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      dists[m++] = (data.row(i) - data.row(j)).norm();
    }
    std::nth_element(dists.begin(), dists.begin() + (k - 1), dists.end());
    kdist[static_cast<std::size_t>(i)] = dists[static_cast<std::size_t>(k - 1)];
  }
  std::sort(kdist.begin(), kdist.end());

  const std::size_t m = kdist.size();
  const double dy = kdist.back() - kdist.front();
  if (dy <= 0) return kdist.front();

  // Max vertical-normal deviation from the chord through the endpoints.
  const double dx = static_cast<double>(m - 1);
  const double norm = std::sqrt(dx * dx + dy * dy);
  double best = -1;
  std::size_t best_i = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const double d = std::abs(dy * static_cast<double>(i) - dx * (kdist[i] - kdist.front())) / norm;
    if (d > best) {
      best = d;
      best_i = i;
    }
  }
  return kdist[best_i];
}

KMeansResult kmeans(const Eigen::Ref<const Mat>& data, int k, std::uint64_t seed, int max_iter) {
  const Eigen::Index n = data.rows();
  if (k < 1) throw Error("kmeans requires k >= 1");
  if (n < k) throw Error("kmeans requires at least k samples");

  Rng rng(mix_seed(seed, 0x6b6d65616e73ULL));
  Mat centroids(k, data.cols());

  // Greedy++ seeding: first centroid uniform, then weight by squared distance.
  std::vector<double> min_sq(static_cast<std::size_t>(n), 0.0);
  centroids.row(0) = data.row(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n))));
  for (Eigen::Index i = 0; i < n; ++i) {
    min_sq[static_cast<std::size_t>(i)] = (data.row(i) - centroids.row(0)).squaredNorm();
  }
  for (int c = 1; c < k; ++c) {
    double total = 0;
    for (double d : min_sq) total += d;
    Eigen::Index chosen = 0;
    if (total > 0) {
      double target = rng.uniform01() * total;
      double acc = 0;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += min_sq[static_cast<std::size_t>(i)];
        if (acc >= target) {
          chosen = i;
          break;
        }
      }
    } else {
      chosen = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
    }
    centroids.row(c) = data.row(chosen);
    for (Eigen::Index i = 0; i < n; ++i) {
      double d = (data.row(i) - centroids.row(c)).squaredNorm();
      min_sq[static_cast<std::size_t>(i)] = std::min(min_sq[static_cast<std::size_t>(i)], d);
    }
  }

  KMeansResult result;
  result.labels.assign(static_cast<std::size_t>(n), 0);

  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_sq = (data.row(i) - centroids.row(0)).squaredNorm();
      for (int c = 1; c < k; ++c) {
        double d = (data.row(i) - centroids.row(c)).squaredNorm();
        if (d < best_sq) {
          best_sq = d;
          best = c;
        }
      }
      if (result.labels[static_cast<std::size_t>(i)] != best) {
        result.labels[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }

    Mat sums = Mat::Zero(k, data.cols());
    std::vector<std::int64_t> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(result.labels[static_cast<std::size_t>(i)]) += data.row(i);
      ++counts[static_cast<std::size_t>(result.labels[static_cast<std::size_t>(i)])];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        centroids.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
      } else {
        // Reseed an empty cluster at the point farthest from its centroid.
        Eigen::Index far = 0;
        double far_sq = -1;
        for (Eigen::Index i = 0; i < n; ++i) {
          int owner = result.labels[static_cast<std::size_t>(i)];
          double d = (data.row(i) - centroids.row(owner)).squaredNorm();
          if (d > far_sq) {
            far_sq = d;
            far = i;
          }
        }
        centroids.row(c) = data.row(far);
        changed = true;
      }
    }
    if (!changed && iter > 0) break;
  }

  result.centroids = std::move(centroids);
  return result;
}

void shuffle_indices(std::vector<std::size_t>& indices, std::uint64_t seed) {
  Rng rng(seed);
  for (std::size_t i = indices.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(indices[i - 1], indices[j]);
  }
}

}  // namespace solar::math
