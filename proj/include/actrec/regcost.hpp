#pragma once

#include <string>
#include <utility>

#include "actrec/resync.hpp"
#include "actrec/types.hpp"

namespace actrec {

struct RegParams {
  double lambda_col = 0.0225;   // column sparsity weight
  double triangle_weight = 0.1; // energy-consistency weight
  double binary_weight = 0.7;
  double tikhonov = 1e-5;
  double row_weight = 3.43;     // source-count weight on the row norm
  double norm_exponent = 0.9;   // p of the sparse norms, in (0, 1]

  void validate() const;
};

// (sum |x|^p)^(1/p)
double penalty_col(const VecD& lambda_c, double p);

// column sparse norm scaled by the inverse atom energy
double penalty_triangle(const VecD& lambda_c, double atom_energy, double p);

// (sum_i ||row_i||_2^p)^(1/p): few nonzero rows = few sources
double penalty_row(const MatD& lambda, double p);

// ||h/2 - |x - h/2|||_2 with h = 1: zero exactly on {0,1} entries
double penalty_binary(const VecD& lambda_c);

struct CostBreakdown {
  double fidelity = 0.0;
  double col = 0.0;
  double row = 0.0;
  double binary = 0.0;
  double triangle = 0.0;
  double tikhonov = 0.0;

  double total() const {
    return fidelity + col + row + binary + triangle + tikhonov;
  }
};

// Full objective at the given shifts and weights. delta(i, c) shifts atom i
// inside column c; entries where lambda is zero are ignored by the fidelity
// term but still count toward the Tikhonov term.
CostBreakdown regularized_cost(const MatD& delta, const MatD& lambda,
                               const CentroidSet& c, const RegParams& params);

struct InequalityReport {
  double mu_min = 0.0;
  double row_bound = 0.0;    // required lower bound on row_weight
  double row_margin = 0.0;   // row_weight - row_bound
  bool row_ok = false;
  double center_cost = 0.0;     // objective of the all-zero representation
  double reference_cost = 0.0;  // objective of the identity representation
  double center_margin = 0.0;   // center_cost - reference_cost
  bool center_ok = false;
  std::string note;

  bool valid() const { return row_ok && center_ok; }
};

// Checks that the row weight dominates the worst-case column penalties and
// that the empty representation costs more than the identity one.
InequalityReport check_inequalities(const RegParams& params, const CentroidSet& c);

// Two reference waves plus their shifted sum: a = triangle, b = square, and
// ab = shift(a, T/4) + shift(b, T/3), one period per window. The sum is built
// with the spectral shift operator itself, so ab is reachable exactly.
CentroidSet make_pair_sum_atoms(int window = 32);

// Two-parameter slices through the weight space, atoms ordered a, b, ab:
//   pair_blend: column ab = c1*(a + b) + c2*ab
//   self_scale: column ab = ((c1 + c2)/2)*ab
//   b_via_sum:  column b  = c1*a + c2*ab
//   a_via_sum:  column a  = c2*b + c1*ab
enum class LandscapeFamily { pair_blend, self_scale, b_via_sum, a_via_sum };

LandscapeFamily landscape_family_from_string(const std::string& s);
std::string to_string(LandscapeFamily f);

// Weight matrix of the two-parameter family at (c1, c2), atoms a, b, ab.
MatD landscape_lambda(LandscapeFamily f, double c1, double c2);

struct LandscapeResult {
  VecD c1;  // axis values, ascending
  VecD c2;
  MatD j;   // (i1, i2) -> cost at (c1[i1], c2[i2])
  int argmin_c1 = 0;
  int argmin_c2 = 0;
  double min_value = 0.0;
};

// Evaluates the objective over the (c1, c2) grid with shifts re-optimized at
// every point.
LandscapeResult landscape_grid(LandscapeFamily f, std::pair<double, double> c1_range,
                               std::pair<double, double> c2_range, const CentroidSet& c,
                               const RegParams& params, int resolution,
                               const MultistartOptions& search = {});

}  // namespace actrec
