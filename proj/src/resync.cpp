#include "actrec/resync.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "actrec/spectral.hpp"

namespace actrec {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// solver core shared by the public entry point and multistart
ResyncResult solve_from(const CentroidSet& c, const ResyncProblem& prob,
                        const VecD& start, const ResyncOptions& opt) {
  const int m = static_cast<int>(prob.candidates.size());
  VecD x = start;
  VecD g(m);
  double f = resync_objective(c, prob, x, &g);
  MatD h = MatD::Identity(m, m);

  ResyncResult out;
  if (!std::isfinite(f) || !g.allFinite()) {
    out.failed = true;
    return out;
  }

  // Two consecutive accepted steps below this relative improvement mean the
  // value has converged to double precision even when the gradient tolerance
  // is still out of reach, which happens off the noise floor where f stays
  // large. Cutting there changes the result at the 1e-13 level only.
  constexpr double kStallTol = 1e-13;
  int stalled = 0;

  bool scaled = false;
  for (int it = 0; it < opt.max_iter; ++it) {
    if (g.cwiseAbs().maxCoeff() <= opt.grad_tol) break;

    VecD d = -(h * g);
    double slope = d.dot(g);
    if (!(slope < 0.0)) {
      d = -g;  // curvature estimate went bad, fall back to steepest descent
      h.setIdentity();
      scaled = false;
      slope = d.dot(g);
      if (!(slope < 0.0)) break;
    }

    // before curvature information arrives, keep the first move at sample scale
    double t = scaled ? 1.0 : std::min(1.0, 1.0 / std::max(1.0, d.norm()));
    double fn = 0.0;
    VecD xn;
    bool stepped = false;
    while (t >= 1e-14) {
      xn = x + t * d;
      fn = resync_objective(c, prob, xn, nullptr);
      if (std::isfinite(fn) && fn <= f + 1e-4 * t * slope) {
        stepped = true;
        break;
      }
      t *= 0.5;
    }
    if (!stepped) break;

    VecD gn(m);
    fn = resync_objective(c, prob, xn, &gn);
    if (!std::isfinite(fn) || !gn.allFinite()) {
      out.failed = true;
      return out;
    }

    if (f - fn <= kStallTol * std::max(1.0, std::abs(fn))) {
      if (++stalled >= 2) {
        x = xn;
        f = fn;
        g = gn;
        break;
      }
    } else {
      stalled = 0;
    }

    VecD s = xn - x;
    VecD y = gn - g;
    double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (!scaled) {
        h = MatD::Identity(m, m) * (sy / y.squaredNorm());
        scaled = true;
      }
      MatD left = MatD::Identity(m, m) - (s * y.transpose()) / sy;
      h = left * h * left.transpose() + (s * s.transpose()) / sy;
    }
    x = xn;
    f = fn;
    g = gn;
  }

  out.shifts = x;
  out.residual = f - prob.gamma * x.squaredNorm();
  if (out.residual < 0.0) out.residual = 0.0;
  return out;
}

double content_period(const CentroidSet& c, int atom) {
  double p = c.atoms[static_cast<size_t>(atom)].period;
  return p > 0.0 ? p : static_cast<double>(c.window);
}

long strongest_bin(const VecC& spectrum, long w) {
  long arg = -1;
  double best = 0.0;
  for (long k = 1; k <= w / 2; ++k) {
    double mag = std::abs(spectrum[k]);
    if (mag > best) {
      best = mag;
      arg = k;
    }
  }
  return arg;
}

// Matched-phase seeding. Each candidate is estimated at the half-spectrum bin
// where it stands out most against the other candidates, which for atoms
// sharing a fundamental falls back to an overtone. An overtone at bin k only
// pins the shift modulo W/k, so every branch of that lattice within the
// content period becomes its own seed.
std::vector<VecD> phase_seeds(const CentroidSet& c, const ResyncProblem& prob) {
  const int m = static_cast<int>(prob.candidates.size());
  const long w = c.window;
  const double two_pi = 2.0 * std::numbers::pi;

  std::vector<const VecC*> atom(static_cast<size_t>(m));
  for (int i = 0; i < m; ++i)
    atom[static_cast<size_t>(i)] = &c.atoms[static_cast<size_t>(prob.candidates[static_cast<size_t>(i)])].spectrum;

  // estimation bin per candidate: maximize magnitude margin over the rest
  std::vector<long> bin(static_cast<size_t>(m), -1);
  for (int i = 0; i < m; ++i) {
    double best_margin = -std::numeric_limits<double>::infinity();
    for (long k = 1; k <= w / 2; ++k) {
      double mine = std::abs((*atom[static_cast<size_t>(i)])[k]);
      if (mine == 0.0) continue;
      double others = 0.0;
      for (int j = 0; j < m; ++j)
        if (j != i) others += std::abs((*atom[static_cast<size_t>(j)])[k]);
      double margin = mine - others;
      if (margin > best_margin) {
        best_margin = margin;
        bin[static_cast<size_t>(i)] = k;
      }
    }
  }

  std::vector<int> order(static_cast<size_t>(m));
  for (int i = 0; i < m; ++i) order[static_cast<size_t>(i)] = i;
  std::sort(order.begin(), order.end(), [&](int lhs, int rhs) {
    double el = atom[static_cast<size_t>(lhs)]->squaredNorm();
    double er = atom[static_cast<size_t>(rhs)]->squaredNorm();
    if (el != er) return el > er;
    return lhs < rhs;
  });

  // cyclic peel-and-re-estimate; branch continuity keeps each shift in the
  // lattice class of its current value
  auto refine = [&](VecD seed, int passes) {
    std::vector<VecC> placed(static_cast<size_t>(m));
    VecC remainder = c.atoms[static_cast<size_t>(prob.target)].spectrum;
    for (int i = 0; i < m; ++i) {
      placed[static_cast<size_t>(i)] = time_shift(*atom[static_cast<size_t>(i)], seed[i]);
      remainder -= placed[static_cast<size_t>(i)];
    }
    for (int pass = 0; pass < passes; ++pass) {
      for (int idx : order) {
        long k = bin[static_cast<size_t>(idx)];
        if (k < 0) continue;
        remainder += placed[static_cast<size_t>(idx)];
        cplx num = remainder[k];
        cplx den = (*atom[static_cast<size_t>(idx)])[k];
        if (std::abs(num) > 0.0 && std::abs(den) > 0.0) {
          double omega = two_pi * static_cast<double>(k) / static_cast<double>(w);
          // S_delta multiplies by exp(-j omega delta); solve the bin phase
          double principal = -std::arg(num / den) / omega;
          double lattice = static_cast<double>(w) / static_cast<double>(k);
          seed[idx] = principal +
                      lattice * std::round((seed[idx] - principal) / lattice);
        }
        placed[static_cast<size_t>(idx)] = time_shift(*atom[static_cast<size_t>(idx)], seed[idx]);
        remainder -= placed[static_cast<size_t>(idx)];
      }
    }
    return seed;
  };

  VecD base = refine(VecD::Zero(m), 4);

  // lattice branch counts within each candidate's content period
  std::vector<int> count(static_cast<size_t>(m), 1);
  long total = 1;
  for (int i = 0; i < m; ++i) {
    if (bin[static_cast<size_t>(i)] > 0) {
      double period = content_period(c, prob.candidates[static_cast<size_t>(i)]);
      int n = static_cast<int>(std::lround(period * static_cast<double>(bin[static_cast<size_t>(i)]) /
                                           static_cast<double>(w)));
      count[static_cast<size_t>(i)] = std::max(1, n);
    }
    total *= count[static_cast<size_t>(i)];
    if (total > 27) {
      count[static_cast<size_t>(i)] = 1;  // cap combinatorics, keep base branch
      total = 27;
    }
  }

  std::vector<VecD> seeds;
  std::vector<int> digit(static_cast<size_t>(m), 0);
  while (true) {
    VecD seed = base;
    for (int i = 0; i < m; ++i) {
      if (digit[static_cast<size_t>(i)] > 0) {
        double lattice = static_cast<double>(w) / static_cast<double>(bin[static_cast<size_t>(i)]);
        double period = content_period(c, prob.candidates[static_cast<size_t>(i)]);
        double v = seed[i] + lattice * digit[static_cast<size_t>(i)];
        // wrap into [-period/2, period/2)
        v -= period * std::floor(v / period + 0.5);
        seed[i] = v;
      }
    }
    seeds.push_back(refine(seed, 4));
    int pos = 0;
    while (pos < m && ++digit[static_cast<size_t>(pos)] == count[static_cast<size_t>(pos)]) {
      digit[static_cast<size_t>(pos)] = 0;
      ++pos;
    }
    if (pos == m) break;
  }
  return seeds;
}

// Global minimum of a one-dimensional periodic slice. The scan spacing
// resolves every basin the harmonics can carve, but a narrow basin's bottom
// sits far below its nearest scan point, so the deepest scan dips get a
// bracketed golden-section refinement before they compete.
template <typename F>
std::pair<double, double> line_minimum(F&& eval, double period) {
  const int scan_points = 128;
  const double golden = (std::sqrt(5.0) - 1.0) / 2.0;
  std::vector<double> val(static_cast<size_t>(scan_points));
  for (int t = 0; t < scan_points; ++t) {
    val[static_cast<size_t>(t)] =
        eval(period * (static_cast<double>(t) / scan_points - 0.5));
  }
  std::vector<int> dips;
  for (int t = 0; t < scan_points; ++t) {
    double prev = val[static_cast<size_t>((t + scan_points - 1) % scan_points)];
    double next = val[static_cast<size_t>((t + 1) % scan_points)];
    if (val[static_cast<size_t>(t)] <= prev && val[static_cast<size_t>(t)] <= next)
      dips.push_back(t);
  }
  std::sort(dips.begin(), dips.end(), [&](int a, int b) {
    return val[static_cast<size_t>(a)] < val[static_cast<size_t>(b)];
  });
  if (dips.size() > 4) dips.resize(4);

  double best_x = period * (static_cast<double>(dips.front()) / scan_points - 0.5);
  double best_f = val[static_cast<size_t>(dips.front())];
  for (int t : dips) {
    double lo = period * (static_cast<double>(t - 1) / scan_points - 0.5);
    double hi = period * (static_cast<double>(t + 1) / scan_points - 0.5);
    double x1 = hi - golden * (hi - lo);
    double x2 = lo + golden * (hi - lo);
    double f1 = eval(x1);
    double f2 = eval(x2);
    for (int it = 0; it < 48; ++it) {
      if (f1 <= f2) {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - golden * (hi - lo);
        f1 = eval(x1);
      } else {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + golden * (hi - lo);
        f2 = eval(x2);
      }
    }
    double fb = f1 <= f2 ? f1 : f2;
    double xb = f1 <= f2 ? x1 : x2;
    if (fb < best_f) {
      best_f = fb;
      best_x = xb;
    }
  }
  return {best_x, best_f};
}

// Sequential alignment seed: align the strongest candidate to the running
// remainder with a global line search, subtract it, continue with the next.
// Finds solutions whose joint basin is too narrow for the start grids, e.g.
// when several candidates must land on exact fractions of a shared period.
VecD pursuit_seed(const CentroidSet& c, const ResyncProblem& prob) {
  const int m = static_cast<int>(prob.candidates.size());
  const long w = c.window;
  const double two_pi = 2.0 * std::numbers::pi;

  std::vector<int> order(static_cast<size_t>(m));
  for (int i = 0; i < m; ++i) order[static_cast<size_t>(i)] = i;
  std::sort(order.begin(), order.end(), [&](int lhs, int rhs) {
    double el = c.atoms[static_cast<size_t>(prob.candidates[static_cast<size_t>(lhs)])].spectrum.squaredNorm();
    double er = c.atoms[static_cast<size_t>(prob.candidates[static_cast<size_t>(rhs)])].spectrum.squaredNorm();
    if (el != er) return el > er;
    return lhs < rhs;
  });

  VecC remainder = c.atoms[static_cast<size_t>(prob.target)].spectrum;
  VecD seed = VecD::Zero(m);
  for (int idx : order) {
    const VecC& s = c.atoms[static_cast<size_t>(prob.candidates[static_cast<size_t>(idx)])].spectrum;
    auto eval = [&](double x) {
      const cplx step = std::polar(1.0, -two_pi * x / static_cast<double>(w));
      cplx fac(1.0, 0.0);
      double acc = 0.0;
      for (long k = 0; k < w; ++k) {
        if ((k & 15) == 0) {
          fac = std::polar(1.0, -two_pi * static_cast<double>(k) * x /
                                    static_cast<double>(w));
        }
        acc += std::norm(remainder[k] - fac * s[k]);
        fac *= step;
      }
      return acc;
    };
    auto [x, f] = line_minimum(eval, content_period(c, prob.candidates[static_cast<size_t>(idx)]));
    (void)f;
    seed[idx] = x;
    remainder -= time_shift(s, x);
  }
  return seed;
}

// Independent-alignment seeds: align every candidate to the raw target on
// its own, then branch each shift by half a content period. Negative or
// over-unit weights make greedy remainders misleading, yet the exact joint
// solutions still sit on the half-period flip lattice of the individual
// optima whenever odd harmonics dominate the content.
std::vector<VecD> alignment_seeds(const CentroidSet& c, const ResyncProblem& prob) {
  const int m = static_cast<int>(prob.candidates.size());
  const long w = c.window;
  const double two_pi = 2.0 * std::numbers::pi;
  const VecC& target = c.atoms[static_cast<size_t>(prob.target)].spectrum;

  VecD base = VecD::Zero(m);
  VecD half(m);
  for (int i = 0; i < m; ++i) {
    const VecC& s = c.atoms[static_cast<size_t>(prob.candidates[static_cast<size_t>(i)])].spectrum;
    auto eval = [&](double x) {
      const cplx step = std::polar(1.0, -two_pi * x / static_cast<double>(w));
      cplx fac(1.0, 0.0);
      double acc = 0.0;
      for (long k = 0; k < w; ++k) {
        if ((k & 15) == 0) {
          fac = std::polar(1.0, -two_pi * static_cast<double>(k) * x /
                                    static_cast<double>(w));
        }
        acc += std::norm(target[k] - fac * s[k]);
        fac *= step;
      }
      return acc;
    };
    const double period = content_period(c, prob.candidates[static_cast<size_t>(i)]);
    base[i] = line_minimum(eval, period).first;
    half[i] = period / 2.0;
  }

  std::vector<VecD> seeds;
  if (m <= 4) {
    for (int mask = 0; mask < (1 << m); ++mask) {
      VecD seed = base;
      for (int i = 0; i < m; ++i)
        if (mask & (1 << i)) seed[i] += half[i];
      seeds.push_back(seed);
    }
  } else {
    seeds.push_back(base);
    for (int i = 0; i < m; ++i) {
      VecD seed = base;
      seed[i] += half[i];
      seeds.push_back(seed);
    }
  }
  return seeds;
}

}  // namespace

void ResyncProblem::validate(int num_atoms) const {
  if (target < 0 || target >= num_atoms)
    throw std::invalid_argument("resync: target out of range");
  if (candidates.empty()) throw std::invalid_argument("resync: empty candidate set");
  for (int i : candidates) {
    if (i < 0 || i >= num_atoms)
      throw std::invalid_argument("resync: candidate out of range");
    if (i == target)
      throw std::invalid_argument("resync: target cannot be its own candidate");
  }
  if (gamma < 0.0) throw std::invalid_argument("resync: negative Tikhonov weight");
  if (initial.size() != 0 &&
      initial.size() != static_cast<long>(candidates.size()))
    throw std::invalid_argument("resync: initial shift count mismatch");
}

double resync_objective(const CentroidSet& c, const ResyncProblem& prob,
                        const VecD& delta, VecD* grad) {
  const int m = static_cast<int>(prob.candidates.size());
  if (delta.size() != m)
    throw std::invalid_argument("resync: shift count mismatch");
  const long w = c.window;
  const double two_pi = 2.0 * std::numbers::pi;

  // The solver hammers this function, so the per-bin phase factors advance by
  // one complex rotation per bin instead of a fresh sincos, re-anchored on an
  // exact value every 16 bins so rounding cannot accumulate with w.
  std::vector<const cplx*> spec(static_cast<size_t>(m));
  std::vector<cplx> step(static_cast<size_t>(m));
  std::vector<cplx> fac(static_cast<size_t>(m));
  std::vector<cplx> term(static_cast<size_t>(m));
  for (int i = 0; i < m; ++i) {
    spec[static_cast<size_t>(i)] =
        c.atoms[static_cast<size_t>(prob.candidates[static_cast<size_t>(i)])].spectrum.data();
    step[static_cast<size_t>(i)] =
        std::polar(1.0, -two_pi * delta[i] / static_cast<double>(w));
  }
  const cplx* target = c.atoms[static_cast<size_t>(prob.target)].spectrum.data();

  double f = 0.0;
  if (grad) grad->setZero(m);
  for (long k = 0; k < w; ++k) {
    cplx sum_k(0.0, 0.0);
    for (int i = 0; i < m; ++i) {
      cplx& fk = fac[static_cast<size_t>(i)];
      if ((k & 15) == 0) {
        fk = std::polar(1.0, -two_pi * static_cast<double>(k) * delta[i] /
                                 static_cast<double>(w));
      }
      const cplx s = fk * spec[static_cast<size_t>(i)][k];
      term[static_cast<size_t>(i)] = s;
      sum_k += s;
      fk *= step[static_cast<size_t>(i)];
    }
    const cplx r = target[k] - sum_k;
    f += std::norm(r);
    if (grad) {
      const double omega = two_pi * static_cast<double>(k) / static_cast<double>(w);
      for (int i = 0; i < m; ++i) {
        // d r_k / d delta_i = +j omega_k (S_delta C_i)_k
        (*grad)[i] += std::real(std::conj(r) *
                                (cplx(0.0, omega) * term[static_cast<size_t>(i)]));
      }
    }
  }
  f += prob.gamma * delta.squaredNorm();
  if (grad) {
    for (int i = 0; i < m; ++i) {
      (*grad)[i] = 2.0 * (*grad)[i] + 2.0 * prob.gamma * delta[i];
    }
  }
  return f;
}

ResyncResult resync_residual(const CentroidSet& c, const ResyncProblem& prob,
                             const ResyncOptions& opt) {
  prob.validate(static_cast<int>(c.size()));
  VecD start = prob.initial.size() ? prob.initial
                                   : VecD::Zero(static_cast<long>(prob.candidates.size()));
  return solve_from(c, prob, start, opt);
}

MultistartOutcome multistart(const CentroidSet& c, const ResyncProblem& prob,
                             const MultistartOptions& opt) {
  prob.validate(static_cast<int>(c.size()));
  if (opt.starts_per_atom < 1)
    throw std::invalid_argument("multistart: starts_per_atom < 1");
  if (opt.max_starts < 1) throw std::invalid_argument("multistart: max_starts < 1");

  const int m = static_cast<int>(prob.candidates.size());
  int n = opt.starts_per_atom;
  double total = std::pow(static_cast<double>(n), m);
  MultistartOutcome out;
  while (total > static_cast<double>(opt.max_starts) && n > 1) {
    --n;
    total = std::pow(static_cast<double>(n), m);
    out.coarsened = true;
  }

  // per-instance grid over [-period/2, period/2), zero always a member
  std::vector<VecD> grids(static_cast<size_t>(m));
  for (int i = 0; i < m; ++i) {
    const double period = content_period(c, prob.candidates[static_cast<size_t>(i)]);
    VecD pts(n);
    for (int j = 0; j < n; ++j)
      pts[j] = period * static_cast<double>(j - n / 2) / static_cast<double>(n);
    grids[static_cast<size_t>(i)] = pts;
  }

  bool have = false;
  bool any_ok = false;
  auto try_start = [&](const VecD& start) {
    ResyncResult r = solve_from(c, prob, start, opt.solver);
    ++out.starts_used;
    if (r.failed) return;
    any_ok = true;
    bool better = false;
    if (!have) {
      better = true;
    } else {
      double tol = 1e-9 * std::max(1.0, out.best.residual);
      if (r.residual < out.best.residual - tol)
        better = true;
      else if (std::abs(r.residual - out.best.residual) <= tol &&
               r.shifts.norm() < out.best.shifts.norm())
        better = true;
    }
    if (better) {
      out.best = r;
      have = true;
    }
  };

  std::vector<int> digit(static_cast<size_t>(m), 0);
  while (true) {
    VecD start(m);
    for (int i = 0; i < m; ++i) start[i] = grids[static_cast<size_t>(i)][digit[static_cast<size_t>(i)]];
    try_start(start);
    int pos = 0;
    while (pos < m && ++digit[static_cast<size_t>(pos)] == n) {
      digit[static_cast<size_t>(pos)] = 0;
      ++pos;
    }
    if (pos == m) break;
  }
  for (const VecD& seed : phase_seeds(c, prob)) try_start(seed);
  try_start(pursuit_seed(c, prob));
  for (const VecD& seed : alignment_seeds(c, prob)) try_start(seed);
  if (!any_ok) {
    out.best.failed = true;
    return out;
  }

  // Periodic coordinate sweeps escape the sub-sample micro-minima the local
  // solver can fall into when high harmonics make the landscape rough: scan
  // each shift over one full content period, then re-polish jointly.
  for (int round = 0; round < 5; ++round) {
    VecD shifts = out.best.shifts;
    double cur = resync_objective(c, prob, shifts, nullptr);
    bool improved = false;
    for (int i = 0; i < m; ++i) {
      const double period = content_period(c, prob.candidates[static_cast<size_t>(i)]);
      VecD probe = shifts;
      auto eval_at = [&](double x) {
        probe[i] = x;
        return resync_objective(c, prob, probe, nullptr);
      };
      auto [x, f] = line_minimum(eval_at, period);
      if (f < cur - 1e-12 * std::max(1.0, cur)) {
        shifts[i] = x;
        cur = f;
        improved = true;
      }
    }
    if (!improved) break;
    ResyncResult refined = solve_from(c, prob, shifts, opt.solver);
    if (!refined.failed && refined.residual < out.best.residual) out.best = refined;
  }
  return out;
}

const char* to_string(CellStatus s) {
  switch (s) {
    case CellStatus::computed: return "computed";
    case CellStatus::pruned_triangle: return "pruned_triangle";
    case CellStatus::pruned_energy: return "pruned_energy";
    case CellStatus::pruned_self: return "pruned_self";
    case CellStatus::trivial_zero: return "trivial_zero";
    case CellStatus::self_norm: return "self_norm";
    case CellStatus::failed: return "failed";
  }
  return "unknown";
}

long ResidualMatrix::combos() const {
  long n = 1;
  for (int i = 0; i < atoms; ++i) n *= base;
  return n;
}

const ResidualCell& ResidualMatrix::at(int c, long g) const {
  return cells[static_cast<size_t>(c) * static_cast<size_t>(combos()) + static_cast<size_t>(g)];
}

ResidualCell& ResidualMatrix::at(int c, long g) {
  return cells[static_cast<size_t>(c) * static_cast<size_t>(combos()) + static_cast<size_t>(g)];
}

std::vector<int> ResidualMatrix::to_digits(long g, int base, int atoms) {
  std::vector<int> d(static_cast<size_t>(atoms), 0);
  for (int i = 0; i < atoms; ++i) {
    d[static_cast<size_t>(i)] = static_cast<int>(g % base);
    g /= base;
  }
  return d;
}

long ResidualMatrix::from_digits(const std::vector<int>& digits, int base) {
  long g = 0;
  for (size_t i = digits.size(); i-- > 0;) g = g * base + digits[i];
  return g;
}

std::vector<int> ResidualMatrix::instances(long g, int base, int atoms) {
  std::vector<int> out;
  std::vector<int> d = to_digits(g, base, atoms);
  for (int i = 0; i < atoms; ++i)
    for (int r = 0; r < d[static_cast<size_t>(i)]; ++r) out.push_back(i);
  return out;
}

ResidualMatrix build_residual_matrix(const CentroidSet& c, int base_b,
                                     double tau, const ResidualConfig& cfg) {
  const int n = static_cast<int>(c.size());
  if (n < 2) throw std::invalid_argument("residual matrix: needs at least two atoms");
  if (base_b < 2) throw std::invalid_argument("residual matrix: base < 2");

  ResidualMatrix out;
  out.base = base_b;
  out.atoms = n;
  out.tau = tau;
  const long combos = out.combos();
  out.cells.assign(static_cast<size_t>(n) * static_cast<size_t>(combos), {});

  VecD norm(n);
  for (int i = 0; i < n; ++i) norm[i] = c.atoms[static_cast<size_t>(i)].spectrum.norm();

  for (int row = 0; row < n; ++row) {
    const double target_norm = norm[row];
    for (long g = 0; g < combos; ++g) {
      ResidualCell& cell = out.at(row, g);
      if (g == 0) {
        cell.status = CellStatus::self_norm;
        cell.value = target_norm * target_norm;
        continue;
      }
      std::vector<int> mult = ResidualMatrix::to_digits(g, base_b, n);
      const int self_count = mult[static_cast<size_t>(row)];
      int total = 0;
      for (int v : mult) total += v;
      if (self_count > 0) {
        if (self_count == 1 && total == 1) {
          cell.status = CellStatus::trivial_zero;
          cell.value = 0.0;
        } else {
          cell.status = CellStatus::pruned_self;
          cell.value = kInf;
        }
        continue;
      }

      double norm_sum = 0.0;
      double max_energy = 0.0;
      for (int i = 0; i < n; ++i) {
        if (mult[static_cast<size_t>(i)] == 0) continue;
        norm_sum += mult[static_cast<size_t>(i)] * norm[i];
        max_energy = std::max(max_energy, norm[i] * norm[i]);
      }
      if (target_norm > norm_sum) {
        cell.status = CellStatus::pruned_triangle;
        cell.value = kInf;
        continue;
      }
      if (target_norm * target_norm < max_energy) {
        cell.status = CellStatus::pruned_energy;
        cell.value = kInf;
        continue;
      }

      ResyncProblem prob;
      prob.target = row;
      prob.candidates = ResidualMatrix::instances(g, base_b, n);
      prob.gamma = cfg.gamma;
      MultistartOutcome m = multistart(c, prob, cfg.search);
      if (m.best.failed) {
        cell.status = CellStatus::failed;
        cell.value = kInf;
      } else {
        cell.status = CellStatus::computed;
        cell.value = m.best.residual;
        cell.shifts = m.best.shifts;
      }
    }
  }
  return out;
}

}  // namespace actrec
