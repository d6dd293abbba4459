#pragma once

#include <vector>

#include "actrec/types.hpp"

namespace actrec {

// One least-squares alignment problem: approximate the target atom by a sum
// of time-shifted candidate atoms. Candidates are listed per instance, so a
// multiplicity-2 atom appears twice and gets two independent shifts.
struct ResyncProblem {
  int target = -1;
  std::vector<int> candidates;
  VecD initial;         // starting shifts, zero if empty
  double gamma = 1e-5;  // Tikhonov weight on the shifts

  void validate(int num_atoms) const;
};

struct ResyncOptions {
  double grad_tol = 1e-9;
  int max_iter = 200;
};

struct ResyncResult {
  double residual = 0.0;  // unregularized least-squares value at the optimum
  VecD shifts;
  bool failed = false;  // non-finite objective the solver could not escape
};

// Regularized objective at the given shifts; analytic gradient on request.
double resync_objective(const CentroidSet& c, const ResyncProblem& prob,
                        const VecD& delta, VecD* grad = nullptr);

ResyncResult resync_residual(const CentroidSet& c, const ResyncProblem& prob,
                             const ResyncOptions& opt = {});

struct MultistartOptions {
  int starts_per_atom = 3;
  int max_starts = 81;
  ResyncOptions solver;
};

struct MultistartOutcome {
  ResyncResult best;
  int starts_used = 0;
  bool coarsened = false;  // grid reduced to honor max_starts
};

// Seeds the solver from a per-instance grid spanning one content period,
// always including zero; best unregularized residual wins, ties go to the
// smallest shift vector.
MultistartOutcome multistart(const CentroidSet& c, const ResyncProblem& prob,
                             const MultistartOptions& opt = {});

enum class CellStatus {
  computed,
  pruned_triangle,
  pruned_energy,
  pruned_self,
  trivial_zero,
  self_norm,
  failed,
};

const char* to_string(CellStatus s);

struct ResidualCell {
  double value = 0.0;  // +inf when pruned or failed
  CellStatus status = CellStatus::computed;
  VecD shifts;  // per instance, computed cells only
};

// Dense residual table: row = target operation, column g encodes candidate
// multiplicities as digits of g in the chosen base.
struct ResidualMatrix {
  int base = 2;
  int atoms = 0;
  double tau = 0.0;  // advisory threshold the table was built for
  std::vector<ResidualCell> cells;  // row-major, atoms x base^atoms

  long combos() const;
  const ResidualCell& at(int c, long g) const;
  ResidualCell& at(int c, long g);
  static std::vector<int> to_digits(long g, int base, int atoms);
  static long from_digits(const std::vector<int>& digits, int base);
  // instance list: atom index repeated by its multiplicity, ascending
  static std::vector<int> instances(long g, int base, int atoms);
};

struct ResidualConfig {
  double gamma = 1e-5;
  MultistartOptions search;
};

ResidualMatrix build_residual_matrix(const CentroidSet& c, int base_b,
                                     double tau,
                                     const ResidualConfig& cfg = {});

}  // namespace actrec
