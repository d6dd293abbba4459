#include "actrec/decompose.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <numeric>
#include <random>

#include "actrec/spectral.hpp"
#include "doctest.h"
#include "scenario_fixtures.hpp"

using namespace actrec;

namespace {

CentroidSet make_set(long window, const std::vector<VecC>& spectra) {
  CentroidSet c;
  c.window = window;
  for (const VecC& s : spectra) {
    Atom a;
    a.spectrum = s;
    a.energy = s.squaredNorm();
    a.frame_count = 1;
    c.atoms.push_back(a);
  }
  return c;
}

VecC harmonic_atom(long w, const std::vector<long>& bins,
                   const std::vector<double>& amps,
                   const std::vector<double>& phases) {
  VecC s = VecC::Zero(w);
  for (size_t i = 0; i < bins.size(); ++i) {
    s[bins[i]] = std::polar(amps[i], phases[i]);
    s[w - bins[i]] = std::conj(s[bins[i]]);
  }
  return s;
}

const CentroidSet& canon_atoms() {
  static CentroidSet c = fixtures::canonical_kept_atoms();
  return c;
}

const ResidualMatrix& canon_matrix() {
  static ResidualMatrix r =
      build_residual_matrix(canon_atoms(), 2, fixtures::kCanonicalTau);
  return r;
}

void check_certificate(const Representation& rep, const CentroidSet& c) {
  for (int col = 0; col < rep.num_atoms(); ++col) {
    if (rep.is_irreducible(col)) continue;
    double recon = (c.atoms[static_cast<size_t>(col)].spectrum -
                    reconstruct_column(rep, c, col))
                       .squaredNorm();
    double scale = std::max(rep.residuals[col],
                            c.atoms[static_cast<size_t>(col)].spectrum.squaredNorm());
    CHECK(std::abs(recon - rep.residuals[col]) <= 1e-10 * scale);
  }
}

// constituents of an accepted pick never carry more energy than the column
void check_energy_ordering(const Representation& rep, const ResidualMatrix& r) {
  for (int col = 0; col < rep.num_atoms(); ++col) {
    if (rep.is_irreducible(col)) continue;
    std::vector<int> digits =
        ResidualMatrix::to_digits(rep.chosen[static_cast<size_t>(col)], r.base, r.atoms);
    for (int i = 0; i < r.atoms; ++i)
      if (digits[static_cast<size_t>(i)] > 0)
        CHECK(r.at(i, 0).value <= r.at(col, 0).value);
  }
}

Representation identity_rep(int n, double tau, int base = 2) {
  Representation rep;
  rep.base = base;
  rep.tau = tau;
  rep.lambda = MatI::Identity(n, n);
  rep.residuals = VecD::Zero(n);
  rep.shifts.assign(static_cast<size_t>(n), VecD());
  rep.chosen.assign(static_cast<size_t>(n), -1);
  for (int i = 0; i < n; ++i) rep.sources.push_back(i);
  return rep;
}

}  // namespace

TEST_CASE("non-positive tolerance is rejected") {
  ResidualMatrix r;
  r.atoms = 1;
  CHECK_THROWS_AS(greedy_select(r, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(greedy_select(r, -1.0), std::invalid_argument);
  r.atoms = 0;
  CHECK_THROWS_AS(greedy_select(r, 1.0), std::invalid_argument);
  r.atoms = 2;
  r.cells.resize(3);  // should be 2 * 4
  CHECK_THROWS_AS(greedy_select(r, 1.0), std::invalid_argument);
}

TEST_CASE("a single operation is its own source") {
  ResidualMatrix r;
  r.atoms = 1;
  Representation rep = greedy_select(r, 1.0);
  CHECK(rep.num_sources() == 1);
  CHECK(rep.lambda(0, 0) == 1);
  CHECK(rep.is_irreducible(0));
}

TEST_CASE("mutual explanation collapses to one source") {
  // bit-identical twins explain each other; the cycle guard keeps the first
  const long w = 16;
  VecC x = harmonic_atom(w, {1, 3}, {1.0, 0.4}, {0.3, -0.8});
  CentroidSet c = make_set(w, {x, x});
  ResidualMatrix r = build_residual_matrix(c, 2, 1e-6);
  REQUIRE(r.at(0, 2).status == CellStatus::computed);
  REQUIRE(r.at(1, 1).status == CellStatus::computed);

  Representation rep = greedy_select(r, 1e-6);
  CHECK(rep.sources == std::vector<int>{0});
  CHECK(rep.is_irreducible(0));
  CHECK(!rep.is_irreducible(1));
  CHECK(rep.lambda(0, 1) == 1);
  CHECK(rep.lambda(1, 1) == 0);
  CHECK(rep.residuals[1] <= 1e-6);
  check_certificate(rep, c);
}

TEST_CASE("chained picks expand down to sources") {
  const long w = 32;
  VecC p = harmonic_atom(w, {2}, {1.0}, {0.4});
  VecC q = harmonic_atom(w, {5}, {0.8}, {-0.2});
  VecC wv = harmonic_atom(w, {9}, {0.6}, {1.1});
  VecC r_ = time_shift(p, 1.0) + time_shift(q, 2.0);
  VecC u = time_shift(r_, 0.5) + time_shift(wv, 1.5);
  CentroidSet c = make_set(w, {p, q, wv, r_, u});
  ResidualMatrix r = build_residual_matrix(c, 2, 1e-6);
  Representation rep = greedy_select(r, 1e-6);

  CHECK(rep.sources == std::vector<int>{0, 1, 2});
  // the top column picked the two-piece split, then unrolled to three sources
  CHECK(rep.chosen[4] == 12);  // atoms 2 and 3
  MatI expect_r = MatI::Zero(5, 1);
  expect_r(0, 0) = 1;
  expect_r(1, 0) = 1;
  CHECK(rep.lambda.col(3) == expect_r.col(0));
  MatI expect_u = expect_r;
  expect_u(2, 0) = 1;
  CHECK(rep.lambda.col(4) == expect_u.col(0));
  CHECK(rep.shifts[4].size() == 3);
  CHECK(rep.residuals[3] <= 1e-6);
  CHECK(rep.residuals[4] <= 1e-6);
  check_certificate(rep, c);
  check_energy_ordering(rep, r);
}

TEST_CASE("nothing admissible leaves the identity") {
  const long w = 16;
  CentroidSet c = make_set(w, {harmonic_atom(w, {1}, {2.0}, {0.1}),
                               harmonic_atom(w, {3}, {1.0}, {0.5}),
                               harmonic_atom(w, {5}, {0.5}, {-0.3})});
  ResidualMatrix r = build_residual_matrix(c, 2, 1e-3);
  Representation rep = greedy_select(r, 1e-3);
  CHECK(rep.num_sources() == 3);
  CHECK(rep.lambda == MatI::Identity(3, 3));
  for (int i = 0; i < 3; ++i) {
    CHECK(rep.is_irreducible(i));
    CHECK(rep.shifts[static_cast<size_t>(i)].size() == 0);
  }
}

TEST_CASE("canonical scene resolves to three sources") {
  const ResidualMatrix& r = canon_matrix();
  Representation rep = greedy_select(r, fixtures::kCanonicalTau);

  CHECK(rep.sources == std::vector<int>{0, 1, 2});
  auto expect = [&](int col, std::initializer_list<int> on) {
    MatI e = MatI::Zero(7, 1);
    for (int i : on) e(i, 0) = 1;
    CHECK(rep.lambda.col(col) == e.col(0));
  };
  expect(0, {0});
  expect(1, {1});
  expect(2, {2});
  expect(3, {0, 1});
  expect(4, {0, 2});
  expect(5, {1, 2});
  expect(6, {0, 1, 2});
  for (int col = 3; col < 7; ++col) {
    CHECK(rep.residuals[col] <= fixtures::kCanonicalTau);
    CHECK(rep.residuals[col] < 1e-8);
  }
  // the full combination rides on a previously resolved pair
  std::vector<int> digits = ResidualMatrix::to_digits(rep.chosen[6], 2, 7);
  CHECK(std::accumulate(digits.begin(), digits.end(), 0) == 2);
  check_certificate(rep, canon_atoms());
  check_energy_ordering(rep, r);
}

TEST_CASE("raising the tolerance never adds sources") {
  const ResidualMatrix& r = canon_matrix();
  int prev = 8;
  for (double tau : {1e-16, 1e-8, 1.0, 800.0, 1e6, 1e9}) {
    Representation rep = greedy_select(r, tau);
    CHECK(rep.num_sources() <= prev);
    prev = rep.num_sources();
  }
  CHECK(greedy_select(r, 1e-16).num_sources() == 7);
  CHECK(greedy_select(r, 800.0).num_sources() == 3);
}

TEST_CASE("greedy matches the exhaustive pick on small instances") {
  const long w = 32;
  const std::vector<long> bin_pool = {2, 3, 5, 7, 9, 11, 13};
  int agreements = 0;
  for (int trial = 0; trial < 50; ++trial) {
    std::mt19937_64 rng(1000 + static_cast<std::uint64_t>(trial));
    auto u = [&]() { return ((rng() >> 11) + 1.0) * 0x1.0p-53; };
    const int nb = 2 + static_cast<int>(rng() % 2);
    const int total = std::min(4, nb + 1 + static_cast<int>(rng() % 2));

    std::vector<VecC> spectra;
    for (int i = 0; i < nb; ++i)
      spectra.push_back(harmonic_atom(w, {bin_pool[static_cast<size_t>(i)]},
                                      {0.6 + 1.2 * u()}, {(u() - 0.5) * 6.0}));
    for (int j = nb; j < total; ++j) {
      unsigned mask = 0;
      while (std::popcount(mask) < 2)
        mask = static_cast<unsigned>(rng() % (1u << nb));
      VecC s = VecC::Zero(w);
      for (int i = 0; i < nb; ++i)
        if (mask & (1u << i)) s += time_shift(spectra[static_cast<size_t>(i)], (u() - 0.5) * 8.0);
      spectra.push_back(s);
    }
    CentroidSet c = make_set(w, spectra);
    const int n = total;
    const double tau = 1e-6;
    ResidualMatrix r = build_residual_matrix(c, 2, tau);
    Representation rep = greedy_select(r, tau);

    // exhaustive reference: every self-free combination, own residual solves
    struct Ref {
      long g = -1;
      double res = 0.0;
      int mult = 0;
    };
    std::vector<Ref> pick(static_cast<size_t>(n));
    VecD norms(n);
    for (int i = 0; i < n; ++i) norms[i] = spectra[static_cast<size_t>(i)].norm();
    for (int op = 0; op < n; ++op) {
      for (long g = 1; g < (1L << n); ++g) {
        std::vector<int> digits = ResidualMatrix::to_digits(g, 2, n);
        if (digits[static_cast<size_t>(op)] > 0) continue;
        // out-of-reach combinations are off the table for both searches
        double norm_sum = 0.0;
        double max_energy = 0.0;
        for (int i = 0; i < n; ++i) {
          if (digits[static_cast<size_t>(i)] == 0) continue;
          norm_sum += digits[static_cast<size_t>(i)] * norms[i];
          max_energy = std::max(max_energy, norms[i] * norms[i]);
        }
        if (norms[op] > norm_sum || norms[op] * norms[op] < max_energy) continue;
        ResyncProblem p;
        p.target = op;
        p.candidates = ResidualMatrix::instances(g, 2, n);
        MultistartOutcome m = multistart(c, p);
        if (m.best.failed || !(m.best.residual <= tau)) continue;
        int mult = std::accumulate(digits.begin(), digits.end(), 0);
        Ref& b = pick[static_cast<size_t>(op)];
        if (b.g < 0 || mult < b.mult || (mult == b.mult && m.best.residual < b.res))
          b = {g, m.best.residual, mult};
      }
    }
    // same fixed-point semantics as the implementation: a dependency cycle
    // demotes the re-entered operation to a source and restarts
    std::vector<long> sel(static_cast<size_t>(n));
    for (int op = 0; op < n; ++op) sel[static_cast<size_t>(op)] = pick[static_cast<size_t>(op)].g;
    std::vector<std::vector<int>> cols(static_cast<size_t>(n));
    bool again = true;
    while (again) {
      again = false;
      std::vector<int> state(static_cast<size_t>(n), 0);
      for (auto& col : cols) col.clear();
      std::function<bool(int)> ex = [&](int op) -> bool {
        if (state[static_cast<size_t>(op)] == 2) return true;
        if (state[static_cast<size_t>(op)] == 1) {
          sel[static_cast<size_t>(op)] = -1;
          return false;
        }
        state[static_cast<size_t>(op)] = 1;
        std::vector<int> counts(static_cast<size_t>(n), 0);
        if (sel[static_cast<size_t>(op)] < 0) {
          counts[static_cast<size_t>(op)] = 1;
        } else {
          std::vector<int> digits =
              ResidualMatrix::to_digits(sel[static_cast<size_t>(op)], 2, n);
          for (int i = 0; i < n; ++i) {
            if (digits[static_cast<size_t>(i)] == 0) continue;
            if (!ex(i)) return false;
            for (int j = 0; j < n; ++j)
              counts[static_cast<size_t>(j)] +=
                  digits[static_cast<size_t>(i)] * cols[static_cast<size_t>(i)][static_cast<size_t>(j)];
          }
        }
        cols[static_cast<size_t>(op)] = std::move(counts);
        state[static_cast<size_t>(op)] = 2;
        return true;
      };
      for (int op = 0; op < n && !again; ++op)
        if (!ex(op)) again = true;
    }
    MatI expect = MatI::Zero(n, n);
    for (int op = 0; op < n; ++op)
      for (int i = 0; i < n; ++i) expect(i, op) = cols[static_cast<size_t>(op)][static_cast<size_t>(i)];

    bool same = rep.lambda == expect;
    for (int op = 0; op < n; ++op) {
      if (rep.is_irreducible(op) != (sel[static_cast<size_t>(op)] < 0)) same = false;
      if (!rep.is_irreducible(op) &&
          rep.residuals[op] != doctest::Approx(pick[static_cast<size_t>(op)].res).epsilon(1e-9))
        same = false;
    }
    CHECK(same);
    agreements += same ? 1 : 0;
  }
  CHECK(agreements == 50);
}

TEST_CASE("identity representation passes labels through") {
  Representation rep = identity_rep(3, 1.0);
  LabelMatrix lab;
  lab.num_labels = 3;
  lab.assign = {0, 1, 2, -1, 1};
  MatI out = recover_activations(rep, lab);
  CHECK(out == lab.onehot());
}

TEST_CASE("activation recovery clips only in base 2") {
  Representation rep = identity_rep(3, 1.0);
  rep.chosen[2] = 1;
  rep.lambda.col(2) << 2, 1, 0;
  rep.sources = {0, 1};
  rep.shifts[2] = VecD::Zero(3);

  LabelMatrix lab;
  lab.num_labels = 3;
  lab.assign = {2, -1, 0};
  MatI out = recover_activations(rep, lab);
  REQUIRE(out.rows() == 2);
  CHECK(out(0, 0) == 1);  // clipped from 2
  CHECK(out(1, 0) == 1);
  CHECK(out.col(1).isZero());
  CHECK(out(0, 2) == 1);
  CHECK(out(1, 2) == 0);

  rep.base = 3;
  MatI multi = recover_activations(rep, lab);
  CHECK(multi(0, 0) == 2);

  lab.num_labels = 4;
  CHECK_THROWS_AS(recover_activations(rep, lab), std::invalid_argument);
}

TEST_CASE("canonical activations reproduce the schedule") {
  Representation rep = greedy_select(canon_matrix(), fixtures::kCanonicalTau);
  LabelMatrix lab;
  lab.num_labels = 7;
  for (int g : fixtures::canonical_frame_groups())
    lab.assign.push_back(g < fixtures::kCanonicalOps ? g : -1);

  MatI out = recover_activations(rep, lab);
  REQUIRE(out.rows() == 3);
  REQUIRE(out.cols() == fixtures::kCanonicalFrames);

  MatI expected = MatI::Zero(3, fixtures::kCanonicalFrames);
  std::vector<int> groups = fixtures::canonical_frame_groups();
  std::vector<std::vector<int>> combos = fixtures::canonical_combos();
  for (int t = 0; t < fixtures::kCanonicalFrames; ++t)
    if (groups[static_cast<size_t>(t)] < fixtures::kCanonicalOps)
      for (int s : combos[static_cast<size_t>(groups[static_cast<size_t>(t)])])
        expected(s, t) = 1;
  CHECK(out == expected);
}

TEST_CASE("time-shifted twins merge into one catalog source") {
  const long w = 32;
  VecC x = harmonic_atom(w, {2, 4}, {1.0, 0.5}, {0.3, -0.6});
  VecC y = time_shift(x, 2.0);
  VecC z = harmonic_atom(w, {7}, {1.3}, {0.9});
  CentroidSet c = make_set(w, {x, y, z});
  Representation rep = identity_rep(3, 1e-6);

  SourceCatalog cat = merge_configurations(rep, c);
  REQUIRE(cat.num_sources() == 2);
  CHECK(cat.groups[0] == std::vector<int>{0, 1});
  CHECK(cat.groups[1] == std::vector<int>{2});
  CHECK(cat.group_of == std::vector<int>{0, 0, 1});
  MatI expect(2, 3);
  expect << 1, 1, 0, 0, 0, 1;
  CHECK(cat.source_map == expect);
}

TEST_CASE("distinct sources stay separate in the catalog") {
  Representation rep = greedy_select(canon_matrix(), fixtures::kCanonicalTau);
  SourceCatalog cat = merge_configurations(rep, canon_atoms());
  REQUIRE(cat.num_sources() == 3);
  for (int i = 0; i < 3; ++i) CHECK(cat.groups[static_cast<size_t>(i)] == std::vector<int>{i});
  // catalog columns restate the recovered combination structure
  MatI expect(3, 7);
  expect << 1, 0, 0, 1, 1, 0, 1,
            0, 1, 0, 1, 0, 1, 1,
            0, 0, 1, 0, 1, 1, 1;
  CHECK(cat.source_map == expect);
}
