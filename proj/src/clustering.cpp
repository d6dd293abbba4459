#include "actrec/clustering.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace actrec {

namespace {

// Uniform in [0,1) from raw engine words; keeps draws identical across
// standard libraries, unlike std::uniform_real_distribution.
double uniform01(std::mt19937_64& rng) {
  return (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;
}

long pick_index(std::mt19937_64& rng, long n) {
  long i = static_cast<long>(uniform01(rng) * static_cast<double>(n));
  return i >= n ? n - 1 : i;
}

double sq_dist(const MatD& f, long col, const MatD& centroids, long c) {
  return (f.col(col) - centroids.col(c)).squaredNorm();
}

// dim x k starting centroids by D^2 sampling over the frames.
MatD seed_plusplus(const MatD& f, int k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const long n = f.cols();
  MatD centroids(f.rows(), k);
  centroids.col(0) = f.col(pick_index(rng, n));

  VecD best = VecD::Constant(n, std::numeric_limits<double>::infinity());
  for (int c = 1; c < k; ++c) {
    for (long i = 0; i < n; ++i) {
      double d = (f.col(i) - centroids.col(c - 1)).squaredNorm();
      if (d < best[i]) best[i] = d;
    }
    const double total = best.sum();
    if (total <= 0.0) {
      // every frame coincides with a chosen centroid; duplicate one
      centroids.col(c) = f.col(pick_index(rng, n));
      continue;
    }
    double target = uniform01(rng) * total;
    long pick = n - 1;
    double acc = 0.0;
    for (long i = 0; i < n; ++i) {
      acc += best[i];
      if (acc > target) {
        pick = i;
        break;
      }
    }
    centroids.col(c) = f.col(pick);
  }
  return centroids;
}

}  // namespace

FeatureKind feature_kind_from_string(const std::string& s) {
  if (s == "magnitude") return FeatureKind::stft_magnitude;
  if (s == "log_magnitude") return FeatureKind::log_magnitude;
  throw std::invalid_argument("features: unknown kind '" + s + "'");
}

std::string to_string(FeatureKind k) {
  switch (k) {
    case FeatureKind::stft_magnitude: return "magnitude";
    case FeatureKind::log_magnitude: return "log_magnitude";
  }
  return "?";
}

FeatureMatrix extract_features(const SpectralFrames& z, FeatureKind kind) {
  const long half = z.window() / 2 + 1;
  FeatureMatrix out;
  out.kind = kind;
  out.features = z.z.topRows(half).cwiseAbs();
  if (kind == FeatureKind::log_magnitude)
    out.features = out.features.unaryExpr([](double v) { return std::log1p(v); });
  return out;
}

ClusterResult kmeans_lloyd(const FeatureMatrix& f, const MatD& initial,
                           const KmeansConfig& cfg) {
  const long n = f.frames();
  const int k = static_cast<int>(initial.cols());
  if (n < 1) throw std::invalid_argument("kmeans: no frames");
  if (k < 1 || k > n) throw std::invalid_argument("kmeans: k outside [1, frames]");
  if (initial.rows() != f.dim())
    throw std::invalid_argument("kmeans: centroid dimension mismatch");
  if (cfg.max_iter < 1) throw std::invalid_argument("kmeans: max_iter < 1");

  ClusterResult out;
  out.centroids = initial;
  out.labels.num_labels = k;
  out.labels.assign.assign(static_cast<size_t>(n), 0);

  std::vector<int> prev(static_cast<size_t>(n), -1);
  double prev_inertia = std::numeric_limits<double>::infinity();

  for (int it = 0; it < cfg.max_iter; ++it) {
    // assignment, ties to the lowest centroid index
    for (long i = 0; i < n; ++i) {
      int arg = 0;
      double best = sq_dist(f.features, i, out.centroids, 0);
      for (int c = 1; c < k; ++c) {
        double d = sq_dist(f.features, i, out.centroids, c);
        if (d < best) {
          best = d;
          arg = c;
        }
      }
      out.labels.assign[static_cast<size_t>(i)] = arg;
    }

    // revive empty clusters at the point farthest from its own centroid
    std::vector<long> counts(static_cast<size_t>(k), 0);
    for (long i = 0; i < n; ++i) ++counts[static_cast<size_t>(out.labels.assign[static_cast<size_t>(i)])];
    std::vector<char> claimed(static_cast<size_t>(n), 0);
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<size_t>(c)] > 0) continue;
      long far_i = -1;
      double far_d = 0.0;
      for (long i = 0; i < n; ++i) {
        if (claimed[static_cast<size_t>(i)]) continue;
        int owner = out.labels.assign[static_cast<size_t>(i)];
        if (counts[static_cast<size_t>(owner)] <= 1) continue;  // keep owner non-empty
        double d = sq_dist(f.features, i, out.centroids, owner);
        if (d > far_d) {
          far_d = d;
          far_i = i;
        }
      }
      if (far_i < 0) continue;  // nothing strictly displaced; cluster stays empty
      int owner = out.labels.assign[static_cast<size_t>(far_i)];
      out.centroids.col(c) = f.features.col(far_i);
      out.labels.assign[static_cast<size_t>(far_i)] = c;
      --counts[static_cast<size_t>(owner)];
      ++counts[static_cast<size_t>(c)];
      claimed[static_cast<size_t>(far_i)] = 1;
    }

    // update step
    MatD sums = MatD::Zero(f.dim(), k);
    std::fill(counts.begin(), counts.end(), 0);
    for (long i = 0; i < n; ++i) {
      int c = out.labels.assign[static_cast<size_t>(i)];
      sums.col(c) += f.features.col(i);
      ++counts[static_cast<size_t>(c)];
    }
    for (int c = 0; c < k; ++c)
      if (counts[static_cast<size_t>(c)] > 0)
        out.centroids.col(c) = sums.col(c) / static_cast<double>(counts[static_cast<size_t>(c)]);

    double inertia = 0.0;
    for (long i = 0; i < n; ++i)
      inertia += sq_dist(f.features, i, out.centroids,
                         out.labels.assign[static_cast<size_t>(i)]);
    out.inertia_history.push_back(inertia);
    out.inertia = inertia;

    bool same = (out.labels.assign == prev);
    bool converged = prev_inertia - inertia <= cfg.tol * std::max(prev_inertia, 1.0) &&
                     std::isfinite(prev_inertia);
    prev = out.labels.assign;
    prev_inertia = inertia;
    if (same || converged) break;
  }

  std::vector<long> counts(static_cast<size_t>(k), 0);
  for (int a : out.labels.assign) ++counts[static_cast<size_t>(a)];
  for (long c : counts)
    if (c == 0) ++out.empty_clusters;
  out.labels.validate();
  return out;
}

ClusterResult kmeans(const FeatureMatrix& f, int k, std::uint64_t seed,
                     const KmeansConfig& cfg) {
  if (k < 1 || k > f.frames())
    throw std::invalid_argument("kmeans: k outside [1, frames]");
  if (cfg.restarts < 1) throw std::invalid_argument("kmeans: restarts < 1");

  ClusterResult best;
  bool have = false;
  for (int r = 0; r < cfg.restarts; ++r) {
    ClusterResult run =
        kmeans_lloyd(f, seed_plusplus(f.features, k, seed + static_cast<std::uint64_t>(r)), cfg);
    if (!have || run.inertia < best.inertia) {
      best = run;
      have = true;
    }
  }
  return best;
}

double silhouette_score(const FeatureMatrix& f, const LabelMatrix& labels) {
  const long n = f.frames();
  if (labels.frames() != n) throw std::invalid_argument("silhouette: label/frame mismatch");
  const int k = labels.num_labels;
  if (k < 2) throw std::invalid_argument("silhouette: needs at least two clusters");

  std::vector<long> counts(static_cast<size_t>(k), 0);
  for (int a : labels.assign) {
    if (a < 0) throw std::invalid_argument("silhouette: unlabeled frame");
    ++counts[static_cast<size_t>(a)];
  }

  double total = 0.0;
  for (long i = 0; i < n; ++i) {
    const int own = labels.assign[static_cast<size_t>(i)];
    if (counts[static_cast<size_t>(own)] <= 1) continue;  // singleton scores 0

    VecD mean_d = VecD::Zero(k);
    for (long j = 0; j < n; ++j) {
      if (j == i) continue;
      mean_d[labels.assign[static_cast<size_t>(j)]] +=
          (f.features.col(i) - f.features.col(j)).norm();
    }
    double a = mean_d[own] / static_cast<double>(counts[static_cast<size_t>(own)] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      if (c == own || counts[static_cast<size_t>(c)] == 0) continue;
      b = std::min(b, mean_d[c] / static_cast<double>(counts[static_cast<size_t>(c)]));
    }
    if (!std::isfinite(b)) continue;  // no other populated cluster
    double m = std::max(a, b);
    total += m > 0.0 ? (b - a) / m : 0.0;
  }
  return total / static_cast<double>(n);
}

OperationCountEstimate estimate_num_operations(const FeatureMatrix& f, int k_lo,
                                               int k_hi, std::uint64_t seed,
                                               const KmeansConfig& cfg) {
  const long n = f.frames();
  if (k_lo < 2 || k_hi < k_lo || k_hi > n - 1)
    throw std::invalid_argument("estimate_num_operations: range outside [2, frames-1]");

  OperationCountEstimate out;

  bool constant = true;
  for (long i = 1; i < n && constant; ++i)
    constant = (f.features.col(i) == f.features.col(0));
  if (constant) {
    out.k = k_lo;
    out.degenerate = true;
    return out;
  }

  double best = -std::numeric_limits<double>::infinity();
  for (int k = k_lo; k <= k_hi; ++k) {
    ClusterResult r = kmeans(f, k, seed, cfg);
    double s = r.empty_clusters > 0 ? -1.0 : silhouette_score(f, r.labels);
    out.candidates.push_back(k);
    out.scores.push_back(s);
    if (s > best) {
      best = s;
      out.k = k;
    }
  }
  return out;
}

}  // namespace actrec
