#include "actrec/metrics.hpp"

#include <algorithm>
#include <json.hpp>
#include <limits>
#include <stdexcept>
#include <vector>

namespace actrec {

namespace {

// Balanced accuracy of one 0/1 row against another: mean of the hit rate on
// active frames and on silent frames. A side with no frames drops out of the
// mean; with nothing to score at all the row counts as perfect.
template <typename Rec, typename Tru>
double balanced_accuracy(Rec rec, Tru tru, long frames,
                         const std::vector<char>& mask) {
  long tp = 0, tn = 0, fp = 0, fn = 0;
  for (long t = 0; t < frames; ++t) {
    if (!mask.empty() && mask[static_cast<size_t>(t)]) continue;
    const bool r = rec(t) != 0;
    const bool g = tru(t) != 0;
    if (g && r) ++tp;
    else if (g && !r) ++fn;
    else if (!g && r) ++fp;
    else ++tn;
  }
  double sum = 0.0;
  int rates = 0;
  if (tp + fn > 0) {
    sum += static_cast<double>(tp) / static_cast<double>(tp + fn);
    ++rates;
  }
  if (tn + fp > 0) {
    sum += static_cast<double>(tn) / static_cast<double>(tn + fp);
    ++rates;
  }
  return rates ? sum / rates : 1.0;
}

}  // namespace

int FrameTruth::masked() const {
  return static_cast<int>(std::count(mask.begin(), mask.end(), char(1)));
}

FrameTruth align_frames(const MatI& truth_samples, const StftConfig& cfg) {
  cfg.validate();
  const long n = truth_samples.cols();
  const long s = truth_samples.rows();
  const long w = cfg.window;
  const long h = cfg.hop;

  FrameTruth out;
  if (n < w) {
    out.truth.resize(s, 0);
    return out;
  }
  const long frames = (n - w) / h + 1;

  // Prefix sums: per-source active counts, and boundary instants. A boundary
  // sits at sample p when the truth column changes from p-1 to p; a window
  // straddles it when p falls anywhere in [start, start + w), so a boundary
  // landing exactly on a frame start masks that frame, not the one before.
  MatI active = MatI::Zero(s, n + 1);
  std::vector<long> boundary(static_cast<size_t>(n) + 1, 0);
  for (long p = 0; p < n; ++p) {
    for (long i = 0; i < s; ++i)
      active(i, p + 1) = active(i, p) + (truth_samples(i, p) != 0 ? 1 : 0);
    const bool change =
        p > 0 && (truth_samples.col(p).array() != truth_samples.col(p - 1).array()).any();
    boundary[static_cast<size_t>(p) + 1] =
        boundary[static_cast<size_t>(p)] + (change ? 1 : 0);
  }

  out.truth.resize(s, frames);
  out.mask.assign(static_cast<size_t>(frames), 0);
  for (long l = 0; l < frames; ++l) {
    const long a = l * h;
    for (long i = 0; i < s; ++i) {
      const long count = active(i, a + w) - active(i, a);
      out.truth(i, l) = 2 * count > w ? 1 : 0;
    }
    out.mask[static_cast<size_t>(l)] =
        boundary[static_cast<size_t>(a + w)] > boundary[static_cast<size_t>(a)] ? 1 : 0;
  }
  return out;
}

std::vector<int> max_assignment(const MatD& value) {
  const int nr = static_cast<int>(value.rows());
  const int nc = static_cast<int>(value.cols());
  const int n = std::max(nr, nc);
  if (n == 0) return {};

  // Shortest-augmenting-path assignment with potentials, on a square cost
  // matrix padded with zero-value cells so leftovers pair off harmlessly.
  const double vmax = value.size() ? std::max(0.0, value.maxCoeff()) : 0.0;
  MatD cost = MatD::Constant(n, n, vmax);
  cost.topLeftCorner(nr, nc) = MatD::Constant(nr, nc, vmax) - value;

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<size_t>(n) + 1, 0.0);
  std::vector<double> v(static_cast<size_t>(n) + 1, 0.0);
  std::vector<int> match(static_cast<size_t>(n) + 1, 0);  // column -> row
  std::vector<int> way(static_cast<size_t>(n) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<size_t>(n) + 1, inf);
    std::vector<char> used(static_cast<size_t>(n) + 1, 0);
    do {
      used[static_cast<size_t>(j0)] = 1;
      const int i0 = match[static_cast<size_t>(j0)];
      int j1 = 0;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<size_t>(j)]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<size_t>(i0)] -
                           v[static_cast<size_t>(j)];
        if (cur < minv[static_cast<size_t>(j)]) {
          minv[static_cast<size_t>(j)] = cur;
          way[static_cast<size_t>(j)] = j0;
        }
        if (minv[static_cast<size_t>(j)] < delta) {
          delta = minv[static_cast<size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<size_t>(j)]) {
          u[static_cast<size_t>(match[static_cast<size_t>(j)])] += delta;
          v[static_cast<size_t>(j)] -= delta;
        } else {
          minv[static_cast<size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (match[static_cast<size_t>(j0)] != 0);
    for (; j0 != 0;) {
      const int j1 = way[static_cast<size_t>(j0)];
      match[static_cast<size_t>(j0)] = match[static_cast<size_t>(j1)];
      j0 = j1;
    }
  }

  std::vector<int> out(static_cast<size_t>(nr), -1);
  for (int j = 1; j <= n; ++j) {
    const int i = match[static_cast<size_t>(j)];
    if (i >= 1 && i <= nr && j <= nc) out[static_cast<size_t>(i) - 1] = j - 1;
  }
  return out;
}

EvalReport score(const MatI& recovered, const MatI& truth,
                 const std::vector<char>& mask) {
  if (recovered.cols() != truth.cols())
    throw std::invalid_argument("score: frame count mismatch");
  const long frames = truth.cols();
  if (!mask.empty() && static_cast<long>(mask.size()) != frames)
    throw std::invalid_argument("score: mask length mismatch");
  const long nr = recovered.rows();
  const long nt = truth.rows();

  MatD value(nr, nt);
  for (long i = 0; i < nr; ++i)
    for (long j = 0; j < nt; ++j)
      value(i, j) = balanced_accuracy([&](long t) { return recovered(i, t); },
                                      [&](long t) { return truth(j, t); }, frames, mask);

  EvalReport rep;
  rep.assignment = max_assignment(value);
  rep.masked_frames =
      static_cast<int>(std::count(mask.begin(), mask.end(), char(1)));

  std::vector<int> rec_of_truth(static_cast<size_t>(nt), -1);
  for (long i = 0; i < nr; ++i) {
    const int j = rep.assignment[static_cast<size_t>(i)];
    if (j >= 0) rec_of_truth[static_cast<size_t>(j)] = static_cast<int>(i);
  }

  rep.per_source.resize(static_cast<size_t>(nt));
  for (long j = 0; j < nt; ++j) {
    const int i = rec_of_truth[static_cast<size_t>(j)];
    rep.per_source[static_cast<size_t>(j)] =
        i >= 0 ? value(i, j)
               : balanced_accuracy([](long) { return 0; },
                                   [&](long t) { return truth(j, t); }, frames, mask);
  }

  // Cell-level agreement: matched rows against their partner, leftovers on
  // both sides against silence.
  long agree = 0, cells = 0, exact = 0, scored = 0;
  for (long t = 0; t < frames; ++t) {
    if (!mask.empty() && mask[static_cast<size_t>(t)]) continue;
    ++scored;
    bool all = true;
    for (long j = 0; j < nt; ++j) {
      const int i = rec_of_truth[static_cast<size_t>(j)];
      const bool r = i >= 0 && recovered(i, t) != 0;
      const bool g = truth(j, t) != 0;
      agree += r == g;
      all = all && r == g;
      ++cells;
    }
    for (long i = 0; i < nr; ++i) {
      if (rep.assignment[static_cast<size_t>(i)] >= 0) continue;
      const bool r = recovered(i, t) != 0;
      agree += !r;
      all = all && !r;
      ++cells;
    }
    exact += all;
  }
  rep.hamming = cells ? static_cast<double>(agree) / static_cast<double>(cells) : 1.0;
  rep.exact_match = scored ? static_cast<double>(exact) / static_cast<double>(scored) : 1.0;
  return rep;
}

std::string EvalReport::to_json_text() const {
  nlohmann::json j;
  j["assignment"] = assignment;
  j["per_source_balanced_accuracy"] = per_source;
  j["hamming_accuracy"] = hamming;
  j["exact_match_ratio"] = exact_match;
  j["masked_frames"] = masked_frames;
  return j.dump(2);
}

}  // namespace actrec
