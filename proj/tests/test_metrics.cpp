#include "actrec/metrics.hpp"

#include <algorithm>
#include <json.hpp>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

#include "actrec/synth.hpp"
#include "doctest.h"
#include "scenario_fixtures.hpp"

using namespace actrec;

namespace {

StftConfig frame_cfg(int window, int hop) {
  StftConfig cfg;
  cfg.window = window;
  cfg.hop = hop;
  cfg.window_fn = WindowFn::rectangular;
  return cfg;
}

// Best achievable assignment total by full enumeration.
double brute_force_total(const MatD& value) {
  const int nr = static_cast<int>(value.rows());
  const int nc = static_cast<int>(value.cols());
  std::vector<int> cols(static_cast<size_t>(nc));
  std::iota(cols.begin(), cols.end(), 0);
  double best = -1.0;
  std::sort(cols.begin(), cols.end());
  do {
    double total = 0.0;
    for (int i = 0; i < std::min(nr, nc); ++i) total += value(i, cols[static_cast<size_t>(i)]);
    best = std::max(best, total);
  } while (std::next_permutation(cols.begin(), cols.end()));
  if (nr > nc) {
    // leftover recovered rows carry no value; permuting rows over the columns
    // covers every injective pairing
    std::vector<int> rows(static_cast<size_t>(nr));
    std::iota(rows.begin(), rows.end(), 0);
    best = -1.0;
    do {
      double total = 0.0;
      for (int j = 0; j < nc; ++j) total += value(rows[static_cast<size_t>(j)], j);
      best = std::max(best, total);
    } while (std::next_permutation(rows.begin(), rows.end()));
  }
  return best;
}

double assignment_total(const MatD& value, const std::vector<int>& assign) {
  double total = 0.0;
  for (size_t i = 0; i < assign.size(); ++i)
    if (assign[i] >= 0) total += value(static_cast<long>(i), assign[i]);
  return total;
}

}  // namespace

TEST_CASE("constant truth aligns to constant frames with no transitions") {
  MatI truth = MatI::Ones(2, 64);
  truth.row(1).setZero();
  FrameTruth ft = align_frames(truth, frame_cfg(16, 8));
  REQUIRE(ft.truth.cols() == 7);
  CHECK(ft.truth.row(0).sum() == 7);
  CHECK(ft.truth.row(1).sum() == 0);
  CHECK(ft.masked() == 0);
}

TEST_CASE("a boundary inside a window masks exactly the straddling frames") {
  MatI truth = MatI::Zero(1, 8);
  for (int p = 5; p < 8; ++p) truth(0, p) = 1;

  // windows [0,4) [2,6) [4,8): the change at sample 5 lies in the last two
  FrameTruth ft = align_frames(truth, frame_cfg(4, 2));
  REQUIRE(ft.truth.cols() == 3);
  CHECK(ft.mask == std::vector<char>({0, 1, 1}));
  CHECK(ft.truth(0, 0) == 0);
  CHECK(ft.truth(0, 2) == 1);  // 3 of 4 samples on

  SUBCASE("a boundary on the frame edge masks the frame that starts there") {
    FrameTruth tiled = align_frames(truth, frame_cfg(4, 4));
    REQUIRE(tiled.truth.cols() == 2);
    CHECK(tiled.mask == std::vector<char>({0, 1}));
  }
  SUBCASE("an exact half window is not a majority") {
    MatI half = MatI::Zero(1, 4);
    half(0, 2) = half(0, 3) = 1;
    FrameTruth ft2 = align_frames(half, frame_cfg(4, 4));
    CHECK(ft2.truth(0, 0) == 0);
  }
}

TEST_CASE("demo schedule masks one frame per in-stream boundary") {
  Composition comp = compose_sequence(fixtures::canonical_scenario());
  FrameTruth ft = align_frames(comp.truth, fixtures::canonical_stft());
  REQUIRE(ft.truth.cols() == fixtures::kCanonicalFrames);
  REQUIRE(ft.truth.rows() == 3);

  // 7 interval starts and 7 stops, but the last stop coincides with the end
  // of the record, so no sample pair straddles it.
  CHECK(ft.masked() == 13);

  // every boundary lands on a frame edge: the masked frame is the first one
  // of the new regime and its majority vote is already the new truth
  const auto groups = fixtures::canonical_frame_groups();
  const auto combos = fixtures::canonical_combos();
  for (int l = 0; l < fixtures::kCanonicalFrames; ++l) {
    for (int i = 0; i < 3; ++i) {
      const bool active =
          groups[static_cast<size_t>(l)] < fixtures::kCanonicalOps &&
          std::count(combos[static_cast<size_t>(groups[static_cast<size_t>(l)])].begin(),
                     combos[static_cast<size_t>(groups[static_cast<size_t>(l)])].end(), i) > 0;
      CHECK(ft.truth(i, l) == (active ? 1 : 0));
    }
  }
  for (int j = 0; j < fixtures::kCanonicalOps; ++j) {
    CHECK(ft.mask[static_cast<size_t>(3 + 11 * j)] == 1);       // interval start
    if (j < fixtures::kCanonicalOps - 1)
      CHECK(ft.mask[static_cast<size_t>(10 + 11 * j)] == 1);    // interval stop
  }
}

TEST_CASE("perfect recovery scores ones across the board") {
  std::mt19937_64 rng(5);
  MatI truth(3, 40);
  for (long j = 0; j < truth.size(); ++j) truth(j) = static_cast<int>(rng() % 2);
  EvalReport rep = score(truth, truth);
  CHECK(rep.assignment == std::vector<int>({0, 1, 2}));
  for (double a : rep.per_source) CHECK(a == doctest::Approx(1.0));
  CHECK(rep.hamming == doctest::Approx(1.0));
  CHECK(rep.exact_match == doctest::Approx(1.0));
  CHECK(rep.masked_frames == 0);

  SUBCASE("row order never matters") {
    std::vector<int> perm = {2, 0, 1};
    MatI shuffled(3, 40);
    for (int i = 0; i < 3; ++i) shuffled.row(i) = truth.row(perm[static_cast<size_t>(i)]);
    EvalReport rp = score(shuffled, truth);
    CHECK(rp.assignment == perm);
    for (double a : rp.per_source) CHECK(a == doctest::Approx(1.0));
    CHECK(rp.hamming == doctest::Approx(1.0));
    CHECK(rp.exact_match == doctest::Approx(1.0));
  }
  SUBCASE("an inverted source drops to zero, the rest stay at one") {
    // An inverted row is active wherever a mostly-silent foreign row is, so
    // against near-balanced truth rows the pairing would profitably migrate.
    // Disjoint rows with unequal duty keep the best pairing in place.
    MatI blocks = MatI::Zero(2, 40);
    blocks.row(0).segment(0, 20).setOnes();
    blocks.row(1).segment(20, 10).setOnes();
    MatI flipped = blocks;
    for (long t = 0; t < 40; ++t) flipped(1, t) = 1 - flipped(1, t);
    EvalReport rp = score(flipped, blocks);
    CHECK(rp.assignment == std::vector<int>({0, 1}));
    CHECK(rp.per_source[1] == doctest::Approx(0.0));
    CHECK(rp.per_source[0] == doctest::Approx(1.0));
    CHECK(rp.hamming == doctest::Approx(0.5));
    CHECK(rp.exact_match == doctest::Approx(0.0));
  }
}

TEST_CASE("leftover rows are held against silence") {
  MatI truth = MatI::Zero(2, 10);
  truth.row(0).segment(0, 5).setOnes();
  truth.row(1).segment(5, 5).setOnes();

  SUBCASE("extra silent recovered row is free") {
    MatI rec = MatI::Zero(3, 10);
    rec.topRows(2) = truth;
    EvalReport rep = score(rec, truth);
    CHECK(rep.assignment[2] == -1);
    CHECK(rep.hamming == doctest::Approx(1.0));
    CHECK(rep.exact_match == doctest::Approx(1.0));
  }
  SUBCASE("extra chattering recovered row costs cells and exactness") {
    MatI rec = MatI::Zero(3, 10);
    rec.topRows(2) = truth;
    rec.row(2).setOnes();
    EvalReport rep = score(rec, truth);
    CHECK(rep.assignment[2] == -1);
    CHECK(rep.hamming == doctest::Approx(20.0 / 30.0));
    CHECK(rep.exact_match == doctest::Approx(0.0));
  }
  SUBCASE("missing recovered row scores its truth row against zeros") {
    EvalReport rep = score(truth.topRows(1), truth);
    REQUIRE(rep.per_source.size() == 2);
    CHECK(rep.per_source[0] == doctest::Approx(1.0));
    CHECK(rep.per_source[1] == doctest::Approx(0.5));  // misses every active frame
    CHECK(rep.hamming == doctest::Approx(15.0 / 20.0));
    CHECK(rep.exact_match == doctest::Approx(0.5));
  }
}

TEST_CASE("pairing matches exhaustive search on random instances") {
  std::mt19937_64 rng(91);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int rep = 0; rep < 50; ++rep) {
    const int nr = 1 + static_cast<int>(rng() % 6);
    const int nc = 1 + static_cast<int>(rng() % 6);
    MatD value(nr, nc);
    for (long i = 0; i < value.size(); ++i) value(i) = unit(rng);

    std::vector<int> assign = max_assignment(value);
    REQUIRE(static_cast<int>(assign.size()) == nr);
    std::vector<char> seen(static_cast<size_t>(nc), 0);
    int matched = 0;
    for (int j : assign) {
      if (j < 0) continue;
      REQUIRE(j < nc);
      REQUIRE(!seen[static_cast<size_t>(j)]);
      seen[static_cast<size_t>(j)] = 1;
      ++matched;
    }
    CHECK(matched == std::min(nr, nc));
    CHECK(assignment_total(value, assign) ==
          doctest::Approx(brute_force_total(value)).epsilon(1e-12));
  }
}

TEST_CASE("masking transition frames only helps clean recoveries") {
  // errors planted on transition frames only: scoring them hurts, masking
  // them restores a perfect report, masking even more keeps it perfect
  MatI truth = MatI::Zero(1, 12);
  truth.row(0).segment(4, 4).setOnes();
  MatI rec = truth;
  rec(0, 4) = 0;
  rec(0, 8) = 1;

  std::vector<char> none(12, 0);
  std::vector<char> edges(12, 0);
  edges[4] = edges[8] = 1;
  std::vector<char> wider = edges;
  wider[5] = wider[9] = 1;

  EvalReport r0 = score(rec, truth, none);
  EvalReport r1 = score(rec, truth, edges);
  EvalReport r2 = score(rec, truth, wider);
  CHECK(r0.hamming < 1.0);
  CHECK(r1.hamming == doctest::Approx(1.0));
  CHECK(r2.hamming == doctest::Approx(1.0));
  CHECK(r0.exact_match < r1.exact_match);
  CHECK(r1.masked_frames == 2);
  CHECK(r2.masked_frames == 4);
  CHECK(r2.hamming >= r1.hamming);
  CHECK(r1.hamming >= r0.hamming);
}

TEST_CASE("degenerate rows and empty scoring windows stay in range") {
  SUBCASE("always-on truth row scores by hit rate alone") {
    MatI truth = MatI::Ones(1, 8);
    MatI rec = MatI::Ones(1, 8);
    rec(0, 0) = 0;
    EvalReport rp = score(rec, truth);
    CHECK(rp.per_source[0] == doctest::Approx(7.0 / 8.0));
  }
  SUBCASE("fully masked input counts as perfect") {
    MatI truth = MatI::Ones(1, 4);
    MatI rec = MatI::Zero(1, 4);
    EvalReport rp = score(rec, truth, std::vector<char>(4, 1));
    CHECK(rp.per_source[0] == doctest::Approx(1.0));
    CHECK(rp.hamming == doctest::Approx(1.0));
    CHECK(rp.exact_match == doctest::Approx(1.0));
    CHECK(rp.masked_frames == 4);
  }
  SUBCASE("shape mismatches are rejected") {
    MatI a = MatI::Zero(1, 4);
    MatI b = MatI::Zero(1, 5);
    CHECK_THROWS_AS(score(a, b), std::invalid_argument);
    CHECK_THROWS_AS(score(a, a, std::vector<char>(3, 0)), std::invalid_argument);
  }
  SUBCASE("unset analysis window is rejected") {
    CHECK_THROWS_AS(align_frames(MatI::Zero(1, 8), StftConfig{}), std::invalid_argument);
  }
}

TEST_CASE("report serializes every field") {
  MatI truth = MatI::Zero(2, 6);
  truth.row(0).segment(0, 3).setOnes();
  EvalReport rep = score(truth, truth, std::vector<char>{0, 0, 0, 0, 0, 1});
  nlohmann::json j = nlohmann::json::parse(rep.to_json_text());
  CHECK(j["assignment"].get<std::vector<int>>() == rep.assignment);
  CHECK(j["per_source_balanced_accuracy"].size() == 2);
  CHECK(j["hamming_accuracy"].get<double>() == doctest::Approx(1.0));
  CHECK(j["exact_match_ratio"].get<double>() == doctest::Approx(1.0));
  CHECK(j["masked_frames"].get<int>() == 1);
}
