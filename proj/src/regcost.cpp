#include "actrec/regcost.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "actrec/spectral.hpp"
#include "actrec/synth.hpp"

namespace actrec {

namespace {

void check_exponent(double p) {
  if (!(p > 0.0) || p > 1.0) {
    throw std::invalid_argument("norm exponent must lie in (0, 1]");
  }
}

// (sum v_i^p)^(1/p) for non-negative v
double power_mean_sum(const VecD& v, double p) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (v[i] != 0.0) acc += std::pow(v[i], p);
  }
  return acc == 0.0 ? 0.0 : std::pow(acc, 1.0 / p);
}

std::vector<double> spectrum_energies(const CentroidSet& c) {
  std::vector<double> e(c.atoms.size());
  for (std::size_t i = 0; i < c.atoms.size(); ++i) {
    e[i] = c.atoms[i].spectrum.squaredNorm();
  }
  return e;
}

}  // namespace

void RegParams::validate() const {
  check_exponent(norm_exponent);
  if (lambda_col < 0.0 || triangle_weight < 0.0 || binary_weight < 0.0 ||
      tikhonov < 0.0 || row_weight < 0.0) {
    throw std::invalid_argument("regularization weights must be non-negative");
  }
}

double penalty_col(const VecD& lambda_c, double p) {
  check_exponent(p);
  return power_mean_sum(lambda_c.cwiseAbs(), p);
}

double penalty_triangle(const VecD& lambda_c, double atom_energy, double p) {
  if (!(atom_energy > 0.0)) {
    throw std::invalid_argument("atom energy must be positive");
  }
  return penalty_col(lambda_c, p) / atom_energy;
}

double penalty_row(const MatD& lambda, double p) {
  check_exponent(p);
  VecD row_norms(lambda.rows());
  for (Eigen::Index i = 0; i < lambda.rows(); ++i) {
    row_norms[i] = lambda.row(i).norm();
  }
  return power_mean_sum(row_norms, p);
}

double penalty_binary(const VecD& lambda_c) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < lambda_c.size(); ++i) {
    double d = 0.5 - std::abs(lambda_c[i] - 0.5);
    acc += d * d;
  }
  return std::sqrt(acc);
}

CostBreakdown regularized_cost(const MatD& delta, const MatD& lambda,
                               const CentroidSet& c, const RegParams& params) {
  params.validate();
  const int n = c.size();
  if (n < 1) throw std::invalid_argument("centroid set is empty");
  if (lambda.rows() != n || lambda.cols() != n || delta.rows() != n ||
      delta.cols() != n) {
    throw std::invalid_argument("delta and lambda must be square, one row per atom");
  }
  const Eigen::Index bins = c.atoms[0].spectrum.size();
  for (const Atom& a : c.atoms) {
    if (a.spectrum.size() != bins || bins == 0) {
      throw std::invalid_argument("atom spectra must share a nonzero length");
    }
  }

  const std::vector<double> energy = spectrum_energies(c);
  const double p = params.norm_exponent;
  CostBreakdown out;
  for (int col = 0; col < n; ++col) {
    VecC resid = c.atoms[col].spectrum;
    for (int i = 0; i < n; ++i) {
      const double w = lambda(i, col);
      if (w == 0.0) continue;
      resid -= w * time_shift(c.atoms[i].spectrum, delta(i, col));
    }
    out.fidelity += resid.squaredNorm();
    const double col_norm = penalty_col(lambda.col(col), p);
    out.col += params.lambda_col * col_norm;
    out.triangle +=
        params.triangle_weight * penalty_triangle(lambda.col(col), energy[col], p);
    out.binary += params.binary_weight * penalty_binary(lambda.col(col));
    out.tikhonov += params.tikhonov * delta.col(col).squaredNorm();
  }
  out.row = params.row_weight * penalty_row(lambda, p);
  return out;
}

InequalityReport check_inequalities(const RegParams& params, const CentroidSet& c) {
  params.validate();
  const int n = c.size();
  if (n < 1) throw std::invalid_argument("centroid set is empty");
  const std::vector<double> energy = spectrum_energies(c);
  for (double e : energy) {
    if (!(e > 0.0)) throw std::invalid_argument("atom energy must be positive");
  }
  const double p = params.norm_exponent;

  InequalityReport rep;
  rep.mu_min = *std::min_element(energy.begin(), energy.end());
  // Heaviest admissible column: every other atom present with unit weight.
  rep.row_bound = (params.lambda_col + params.triangle_weight / rep.mu_min) * n *
                  std::pow(static_cast<double>(n - 1), 1.0 / p);
  rep.row_margin = params.row_weight - rep.row_bound;
  rep.row_ok = rep.row_margin > 0.0;

  rep.center_cost = 0.0;
  double inv_energy = 0.0;
  for (double e : energy) {
    rep.center_cost += e;
    inv_energy += 1.0 / e;
  }
  rep.reference_cost = params.lambda_col * n + params.triangle_weight * inv_energy +
                       params.row_weight * std::pow(static_cast<double>(n), 1.0 / p);
  rep.center_margin = rep.center_cost - rep.reference_cost;
  rep.center_ok = rep.center_margin > 0.0;
  rep.note =
      "center check compares the all-zero representation against the identity "
      "one; identity is always admissible, so a positive margin proves the "
      "zero point is not the global minimum";
  return rep;
}

CentroidSet make_pair_sum_atoms(int window) {
  if (window < 4) throw std::invalid_argument("window must be at least 4");
  const double fs = static_cast<double>(window);
  SourceModel tri{"a", Waveform::triangle, 1.0, 1.0, 0.0};
  SourceModel sq{"b", Waveform::square, 1.0, 1.0, 0.0};
  StftConfig cfg;
  cfg.window = window;
  cfg.hop = window;
  cfg.window_fn = WindowFn::rectangular;

  const VecC za = stft(render_waveform(tri, 1.0, fs), cfg).z.col(0);
  const VecC zb = stft(render_waveform(sq, 1.0, fs), cfg).z.col(0);
  const VecC zab = time_shift(za, window / 4.0) + time_shift(zb, window / 3.0);

  CentroidSet out;
  out.window = window;
  const VecC* spectra[3] = {&za, &zb, &zab};
  for (int i = 0; i < 3; ++i) {
    Atom a;
    a.spectrum = *spectra[i];
    a.energy = a.spectrum.squaredNorm();
    a.frame_count = 1;
    a.parent_op = i;
    a.period = static_cast<double>(window);
    out.atoms.push_back(std::move(a));
  }
  return out;
}

LandscapeFamily landscape_family_from_string(const std::string& s) {
  if (s == "pair_blend") return LandscapeFamily::pair_blend;
  if (s == "self_scale") return LandscapeFamily::self_scale;
  if (s == "b_via_sum") return LandscapeFamily::b_via_sum;
  if (s == "a_via_sum") return LandscapeFamily::a_via_sum;
  throw std::invalid_argument("unknown landscape family: " + s);
}

std::string to_string(LandscapeFamily f) {
  switch (f) {
    case LandscapeFamily::pair_blend: return "pair_blend";
    case LandscapeFamily::self_scale: return "self_scale";
    case LandscapeFamily::b_via_sum: return "b_via_sum";
    case LandscapeFamily::a_via_sum: return "a_via_sum";
  }
  throw std::invalid_argument("unknown landscape family");
}

MatD landscape_lambda(LandscapeFamily f, double c1, double c2) {
  MatD m = MatD::Identity(3, 3);
  switch (f) {
    case LandscapeFamily::pair_blend:
      m(0, 2) = c1;
      m(1, 2) = c1;
      m(2, 2) = c2;
      break;
    case LandscapeFamily::self_scale:
      m(2, 2) = 0.5 * (c1 + c2);
      break;
    case LandscapeFamily::b_via_sum:
      m(0, 1) = c1;
      m(1, 1) = 0.0;
      m(2, 1) = c2;
      break;
    case LandscapeFamily::a_via_sum:
      m(0, 0) = 0.0;
      m(1, 0) = c2;
      m(2, 0) = c1;
      break;
  }
  return m;
}

namespace {

bool is_identity_column(const MatD& lambda, int col) {
  for (Eigen::Index i = 0; i < lambda.rows(); ++i) {
    const double want = i == col ? 1.0 : 0.0;
    if (lambda(i, col) != want) return false;
  }
  return true;
}

// Best shifts for reproducing column `col` from the weighted atoms. The
// weights fold into temporary atoms, so the stock solver applies unchanged.
void solve_column_shifts(const CentroidSet& c, const MatD& lambda, int col,
                         const RegParams& params, const MultistartOptions& search,
                         MatD* delta) {
  std::vector<int> support;
  for (int i = 0; i < c.size(); ++i) {
    if (lambda(i, col) != 0.0) support.push_back(i);
  }
  if (support.empty()) return;

  CentroidSet local;
  local.window = c.window;
  local.atoms.push_back(c.atoms[col]);
  for (int i : support) {
    Atom scaled = c.atoms[i];
    scaled.spectrum *= lambda(i, col);
    scaled.energy = scaled.spectrum.squaredNorm();
    local.atoms.push_back(std::move(scaled));
  }

  ResyncProblem prob;
  prob.target = 0;
  prob.candidates.resize(support.size());
  for (std::size_t q = 0; q < support.size(); ++q) {
    prob.candidates[q] = static_cast<int>(q) + 1;
  }
  prob.gamma = params.tikhonov;

  const MultistartOutcome out = multistart(local, prob, search);
  if (out.best.failed) return;
  for (std::size_t q = 0; q < support.size(); ++q) {
    (*delta)(support[q], col) = out.best.shifts[static_cast<Eigen::Index>(q)];
  }
}

}  // namespace

LandscapeResult landscape_grid(LandscapeFamily f, std::pair<double, double> c1_range,
                               std::pair<double, double> c2_range, const CentroidSet& c,
                               const RegParams& params, int resolution,
                               const MultistartOptions& search) {
  params.validate();
  if (c.size() != 3) {
    throw std::invalid_argument("landscape families are defined over three atoms");
  }
  if (resolution < 2) throw std::invalid_argument("resolution must be at least 2");
  if (!(c1_range.first <= c1_range.second) ||
      !(c2_range.first <= c2_range.second)) {
    throw std::invalid_argument("grid ranges must be ordered");
  }

  LandscapeResult res;
  res.c1.resize(resolution);
  res.c2.resize(resolution);
  for (int i = 0; i < resolution; ++i) {
    const double t = static_cast<double>(i) / (resolution - 1);
    res.c1[i] = c1_range.first + t * (c1_range.second - c1_range.first);
    res.c2[i] = c2_range.first + t * (c2_range.second - c2_range.first);
  }

  res.j.resize(resolution, resolution);
  res.min_value = std::numeric_limits<double>::infinity();
  for (int i1 = 0; i1 < resolution; ++i1) {
    for (int i2 = 0; i2 < resolution; ++i2) {
      const MatD lambda = landscape_lambda(f, res.c1[i1], res.c2[i2]);
      MatD delta = MatD::Zero(3, 3);
      for (int col = 0; col < 3; ++col) {
        if (is_identity_column(lambda, col)) continue;
        solve_column_shifts(c, lambda, col, params, search, &delta);
      }
      const double value = regularized_cost(delta, lambda, c, params).total();
      res.j(i1, i2) = value;
      if (value < res.min_value) {
        res.min_value = value;
        res.argmin_c1 = i1;
        res.argmin_c2 = i2;
      }
    }
  }
  return res;
}

}  // namespace actrec
