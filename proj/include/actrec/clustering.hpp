#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "actrec/types.hpp"

namespace actrec {

enum class FeatureKind { stft_magnitude, log_magnitude };

FeatureKind feature_kind_from_string(const std::string& s);
std::string to_string(FeatureKind k);

struct FeatureMatrix {
  MatD features;  // dim x frames
  FeatureKind kind = FeatureKind::log_magnitude;

  long dim() const { return features.rows(); }
  long frames() const { return features.cols(); }
};

// Per-frame half-spectrum magnitudes, bins 0..floor(W/2). log_magnitude
// applies log1p to tame the wide energy spread between sources.
FeatureMatrix extract_features(const SpectralFrames& z,
                               FeatureKind kind = FeatureKind::log_magnitude);

struct KmeansConfig {
  int max_iter = 100;
  double tol = 1e-10;  // relative inertia improvement below this stops Lloyd
  int restarts = 1;    // independent seeded inits, best inertia wins
};

struct ClusterResult {
  LabelMatrix labels;
  MatD centroids;  // feature-space means, diagnostic only
  double inertia = 0.0;
  std::vector<double> inertia_history;  // after each Lloyd iteration
  int empty_clusters = 0;  // nonzero only when duplicates starve a cluster
};

// Lloyd iterations from explicit starting centroids (dim x k). The final
// assignment depends only on the start points, not on frame order.
ClusterResult kmeans_lloyd(const FeatureMatrix& f, const MatD& initial,
                           const KmeansConfig& cfg = {});

// k-means++ seeded start, deterministic for a given seed.
ClusterResult kmeans(const FeatureMatrix& f, int k, std::uint64_t seed,
                     const KmeansConfig& cfg = {});

// Mean silhouette over all frames; singleton clusters contribute 0.
double silhouette_score(const FeatureMatrix& f, const LabelMatrix& labels);

struct OperationCountEstimate {
  int k = 0;
  bool degenerate = false;  // identical features, minimum of range returned
  std::vector<int> candidates;
  std::vector<double> scores;  // silhouette per candidate, -1 if unfillable
};

OperationCountEstimate estimate_num_operations(const FeatureMatrix& f, int k_lo,
                                               int k_hi, std::uint64_t seed,
                                               const KmeansConfig& cfg = {});

}  // namespace actrec
