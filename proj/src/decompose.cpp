#include "actrec/decompose.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "actrec/spectral.hpp"

namespace actrec {

namespace {

struct Pick {
  long g = -1;
  double value = 0.0;
  int mult = 0;
};

// flattened final column: (atom, accumulated shift) per instance
struct Expansion {
  std::vector<std::pair<int, double>> inst;
};

int find_root(std::vector<int>& parent, int x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

}  // namespace

Representation greedy_select(const ResidualMatrix& r, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
  if (r.atoms < 1) throw std::invalid_argument("empty residual matrix");
  if (r.base < 2) throw std::invalid_argument("base must be at least 2");
  const int n = r.atoms;
  const long combos = r.combos();
  if (n > 1 && static_cast<long>(r.cells.size()) != static_cast<long>(n) * combos)
    throw std::invalid_argument("incomplete residual matrix");

  Representation rep;
  rep.base = r.base;
  rep.tau = tau;
  rep.chosen.assign(static_cast<size_t>(n), -1);

  // Per-operation pick. Admissibility never depends on what other rows chose,
  // so the scan order is immaterial; ascending g makes the last tie-break free.
  if (n > 1) {
    for (int c = 0; c < n; ++c) {
      Pick best;
      for (long g = 1; g < combos; ++g) {
        const ResidualCell& cell = r.at(c, g);
        if (cell.status != CellStatus::computed) continue;
        if (!(cell.value <= tau)) continue;
        std::vector<int> digits = ResidualMatrix::to_digits(g, r.base, n);
        int mult = std::accumulate(digits.begin(), digits.end(), 0);
        if (best.g < 0 || mult < best.mult ||
            (mult == best.mult && cell.value < best.value))
          best = {g, cell.value, mult};
      }
      rep.chosen[static_cast<size_t>(c)] = best.g;
    }
  }

  // Fixed-point expansion: substitute resolved constituents until only
  // sources remain. A dependency cycle demotes the re-entered operation to a
  // source and the expansion restarts; each restart shrinks the resolved set,
  // so this terminates.
  std::vector<Expansion> memo(static_cast<size_t>(n));
  std::vector<int> state;
  bool again = true;
  while (again) {
    again = false;
    state.assign(static_cast<size_t>(n), 0);  // 0 fresh, 1 on stack, 2 done
    for (Expansion& e : memo) e.inst.clear();
    std::function<bool(int)> expand = [&](int c) -> bool {
      if (state[static_cast<size_t>(c)] == 2) return true;
      if (state[static_cast<size_t>(c)] == 1) {
        rep.chosen[static_cast<size_t>(c)] = -1;
        return false;
      }
      state[static_cast<size_t>(c)] = 1;
      const long g = rep.chosen[static_cast<size_t>(c)];
      if (g < 0) {
        memo[static_cast<size_t>(c)].inst = {{c, 0.0}};
      } else {
        const ResidualCell& cell = r.at(c, g);
        std::vector<int> inst = ResidualMatrix::instances(g, r.base, n);
        Expansion out;
        for (size_t q = 0; q < inst.size(); ++q) {
          const int i = inst[q];
          const double s = cell.shifts[static_cast<long>(q)];
          if (!expand(i)) return false;
          for (const auto& [atom, u] : memo[static_cast<size_t>(i)].inst)
            out.inst.emplace_back(atom, s + u);
        }
        std::stable_sort(
            out.inst.begin(), out.inst.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
        memo[static_cast<size_t>(c)].inst = std::move(out.inst);
      }
      state[static_cast<size_t>(c)] = 2;
      return true;
    };
    for (int c = 0; c < n && !again; ++c)
      if (!expand(c)) again = true;
  }

  rep.lambda = MatI::Zero(n, n);
  rep.residuals = VecD::Zero(n);
  rep.shifts.assign(static_cast<size_t>(n), VecD());
  for (int c = 0; c < n; ++c) {
    const long g = rep.chosen[static_cast<size_t>(c)];
    if (g < 0) {
      rep.lambda(c, c) = 1;
      rep.sources.push_back(c);
      continue;
    }
    const Expansion& e = memo[static_cast<size_t>(c)];
    VecD sh(static_cast<long>(e.inst.size()));
    for (size_t q = 0; q < e.inst.size(); ++q) {
      rep.lambda(e.inst[q].first, c) += 1;
      sh[static_cast<long>(q)] = e.inst[q].second;
    }
    rep.shifts[static_cast<size_t>(c)] = std::move(sh);
    rep.residuals[c] = r.at(c, g).value;
  }
  return rep;
}

VecC reconstruct_column(const Representation& rep, const CentroidSet& c, int col) {
  const int n = rep.num_atoms();
  if (static_cast<int>(c.atoms.size()) != n)
    throw std::invalid_argument("atom count mismatch");
  if (col < 0 || col >= n) throw std::invalid_argument("column out of range");
  if (rep.is_irreducible(col)) return c.atoms[static_cast<size_t>(col)].spectrum;
  VecC acc = VecC::Zero(c.window);
  long q = 0;
  for (int i = 0; i < n; ++i)
    for (int m = 0; m < rep.lambda(i, col); ++m)
      acc += time_shift(c.atoms[static_cast<size_t>(i)].spectrum,
                        rep.shifts[static_cast<size_t>(col)][q++]);
  return acc;
}

MatI recover_activations(const Representation& rep, const LabelMatrix& labels) {
  labels.validate();
  const int n = rep.num_atoms();
  if (labels.num_labels != n)
    throw std::invalid_argument("label count must match atom count");
  const int t = labels.frames();
  const int s = rep.num_sources();
  MatI out = MatI::Zero(s, t);
  for (int f = 0; f < t; ++f) {
    const int c = labels.assign[static_cast<size_t>(f)];
    if (c < 0) continue;
    for (int q = 0; q < s; ++q) {
      const int v = rep.lambda(rep.sources[static_cast<size_t>(q)], c);
      out(q, f) = rep.base == 2 ? std::min(v, 1) : v;
    }
  }
  return out;
}

SourceCatalog merge_configurations(const Representation& rep, const CentroidSet& c,
                                   const MultistartOptions& opt) {
  const int n = rep.num_atoms();
  if (static_cast<int>(c.atoms.size()) != n)
    throw std::invalid_argument("atom count mismatch");
  const std::vector<int>& src = rep.sources;
  const int s = static_cast<int>(src.size());

  auto residual_between = [&](int target, int cand) {
    ResyncProblem p;
    p.target = target;
    p.candidates = {cand};
    MultistartOutcome m = multistart(c, p, opt);
    return m.best.failed ? std::numeric_limits<double>::infinity()
                         : m.best.residual;
  };

  std::vector<int> parent(static_cast<size_t>(s));
  std::iota(parent.begin(), parent.end(), 0);
  for (int a = 0; a < s; ++a)
    for (int b = a + 1; b < s; ++b) {
      const double r = std::min(residual_between(src[a], src[b]),
                                residual_between(src[b], src[a]));
      if (r <= rep.tau) {
        const int ra = find_root(parent, a);
        const int rb = find_root(parent, b);
        if (ra != rb) parent[static_cast<size_t>(std::max(ra, rb))] = std::min(ra, rb);
      }
    }

  SourceCatalog cat;
  cat.group_of.assign(static_cast<size_t>(n), -1);
  std::vector<int> root_to_group(static_cast<size_t>(s), -1);
  for (int a = 0; a < s; ++a) {
    const int root = find_root(parent, a);
    if (root_to_group[static_cast<size_t>(root)] < 0) {
      root_to_group[static_cast<size_t>(root)] =
          static_cast<int>(cat.groups.size());
      cat.groups.emplace_back();
    }
    const int gi = root_to_group[static_cast<size_t>(root)];
    cat.groups[static_cast<size_t>(gi)].push_back(src[a]);
    cat.group_of[static_cast<size_t>(src[a])] = gi;
  }
  cat.source_map = MatI::Zero(cat.num_sources(), n);
  for (int col = 0; col < n; ++col)
    for (int a = 0; a < s; ++a)
      cat.source_map(cat.group_of[static_cast<size_t>(src[a])], col) +=
          rep.lambda(src[a], col);
  return cat;
}

}  // namespace actrec
