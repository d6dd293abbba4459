#include "actrec/spectral.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace actrec {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Strongest bin in 1..W/2, ties to the lowest index.
int peak_bin(const VecC& v) {
  const int w = static_cast<int>(v.size());
  const int half = w / 2;
  int best = -1;
  double best_mag = 0.0;
  for (int k = 1; k <= half; ++k) {
    const double m = std::abs(v[k]);
    if (m > best_mag) {
      best_mag = m;
      best = k;
    }
  }
  if (best < 0 || best_mag == 0.0) return -1;
  return best;
}

}  // namespace

WindowFn window_fn_from_string(const std::string& s) {
  if (s == "hann") return WindowFn::hann;
  if (s == "rectangular") return WindowFn::rectangular;
  if (s == "hamming") return WindowFn::hamming;
  throw std::invalid_argument("stft: unknown window function '" + s + "'");
}

std::string to_string(WindowFn w) {
  switch (w) {
    case WindowFn::hann: return "hann";
    case WindowFn::rectangular: return "rectangular";
    case WindowFn::hamming: return "hamming";
  }
  return "?";
}

ShiftStrategy shift_strategy_from_string(const std::string& s) {
  if (s == "max_amplitude") return ShiftStrategy::max_amplitude;
  if (s == "dominant_ls") return ShiftStrategy::dominant_ls;
  throw std::invalid_argument("shift: unknown strategy '" + s + "'");
}

std::string to_string(ShiftStrategy s) {
  return s == ShiftStrategy::max_amplitude ? "max_amplitude" : "dominant_ls";
}

void StftConfig::validate() const {
  if (window < 4) throw std::invalid_argument("stft: window must be at least 4 samples");
  if (hop <= 0 || hop > window)
    throw std::invalid_argument("stft: hop must satisfy 0 < hop <= window");
}

MatI LabelMatrix::onehot() const {
  MatI m = MatI::Zero(num_labels, frames());
  for (int t = 0; t < frames(); ++t) {
    if (assign[t] >= 0) m(assign[t], t) = 1;
  }
  return m;
}

void LabelMatrix::validate() const {
  for (int a : assign) {
    if (a >= num_labels || a < -1)
      throw std::invalid_argument("labels: assignment outside [-1, num_labels)");
  }
}

MatC CentroidSet::matrix() const {
  MatC m(window, size());
  for (int i = 0; i < size(); ++i) m.col(i) = atoms[i].spectrum;
  return m;
}

std::vector<double> CentroidSet::energies() const {
  std::vector<double> e;
  e.reserve(atoms.size());
  for (const auto& a : atoms) e.push_back(a.energy);
  return e;
}

VecD make_window(WindowFn fn, int w) {
  VecD win(w);
  for (int n = 0; n < w; ++n) {
    const double c = std::cos(kTwoPi * n / w);
    switch (fn) {
      case WindowFn::hann: win[n] = 0.5 - 0.5 * c; break;
      case WindowFn::hamming: win[n] = 0.54 - 0.46 * c; break;
      case WindowFn::rectangular: win[n] = 1.0; break;
    }
  }
  return win;
}

SpectralFrames stft(const VecD& x, const StftConfig& cfg) {
  cfg.validate();
  const int w = cfg.window;
  const int h = cfg.hop;
  const long n = x.size();
  if (n < w) throw std::invalid_argument("stft: signal shorter than one window");

  const int t = static_cast<int>((n - w) / h) + 1;
  const VecD win = make_window(cfg.window_fn, w);

  // Fourier matrix once, then one product for all frames.
  MatC fourier(w, w);
  for (int k = 0; k < w; ++k) {
    for (int s = 0; s < w; ++s) {
      const double ang = -kTwoPi * k * s / w;
      fourier(k, s) = cplx(std::cos(ang), std::sin(ang));
    }
  }

  MatD segs(w, t);
  SpectralFrames out;
  out.start.resize(t);
  for (int m = 0; m < t; ++m) {
    const long s0 = static_cast<long>(m) * h;
    out.start[m] = s0;
    segs.col(m) = x.segment(s0, w).cwiseProduct(win);
  }
  out.z = fourier * segs.cast<cplx>();
  return out;
}

VecC time_shift(const VecC& z, double delta) {
  const int w = static_cast<int>(z.size());
  if (w == 0) throw std::invalid_argument("time_shift: empty spectrum");
  VecC out(w);
  for (int k = 0; k < w; ++k) {
    const double ang = -kTwoPi * k * delta / w;
    out[k] = z[k] * cplx(std::cos(ang), std::sin(ang));
  }
  return out;
}

double estimate_window_shift(const VecC& frame, const ShiftConfig& cfg) {
  const int w = static_cast<int>(frame.size());
  if (w < 4) throw std::invalid_argument("estimate_window_shift: frame shorter than 4 bins");
  const int peak = peak_bin(frame);
  if (peak < 0)
    throw std::domain_error("estimate_window_shift: no energy outside DC, shift undefined");

  if (cfg.strategy == ShiftStrategy::max_amplitude) {
    const double omega = kTwoPi * peak / w;
    return std::arg(frame[peak]) / omega;
  }

  // Joint fit over strong bins, delta = sum(w_k phi_k) / sum(w_k^2), with the
  // integer wrap count pinned at zero for every bin.
  const double floor_mag = cfg.ls_fraction * std::abs(frame[peak]);
  double num = 0.0;
  double den = 0.0;
  for (int k = 1; k <= w / 2; ++k) {
    if (std::abs(frame[k]) < floor_mag) continue;
    const double omega = kTwoPi * k / w;
    num += omega * std::arg(frame[k]);
    den += omega * omega;
  }
  if (den == 0.0)
    throw std::domain_error("estimate_window_shift: no bins above the ls threshold");
  return num / den;
}

Lifted lift_contiguous(const LabelMatrix& labels, int min_run) {
  labels.validate();
  if (min_run < 1) throw std::invalid_argument("lift_contiguous: min_run must be >= 1");
  const int t = labels.frames();

  Lifted out;
  out.labels.assign.assign(t, -1);

  int pos = 0;
  while (pos < t) {
    const int id = labels.assign[pos];
    int end = pos;
    while (end < t && labels.assign[end] == id) ++end;
    if (id >= 0 && end - pos >= min_run) {
      const int sub = static_cast<int>(out.parent.size());
      out.parent.push_back(id);
      for (int i = pos; i < end; ++i) out.labels.assign[i] = sub;
    }
    pos = end;
  }
  out.labels.num_labels = static_cast<int>(out.parent.size());
  return out;
}

DeltaStft delta_stft(const VecD& x, const LabelMatrix& labels, const StftConfig& cfg,
                     int min_run, const ShiftConfig& shift_cfg) {
  DeltaStft out;
  out.dz = stft(x, cfg);
  const int t = out.dz.frames();
  const int w = out.dz.window();
  if (labels.frames() != t)
    throw std::invalid_argument("delta_stft: label count does not match frame count");

  out.shift.assign(t, 0.0);
  std::vector<char> usable(t, 0);
  for (int m = 0; m < t; ++m) {
    try {
      out.shift[m] = estimate_window_shift(out.dz.z.col(m), shift_cfg);
      usable[m] = 1;
    } catch (const std::domain_error&) {
      out.shift[m] = 0.0;  // leave the frame as measured
    }
    if (usable[m]) out.dz.z.col(m) = time_shift(out.dz.z.col(m), out.shift[m]);
  }

  out.lifted = lift_contiguous(labels, min_run);
  const int subs = out.lifted.labels.num_labels;
  out.centroids.window = w;
  out.centroids.atoms.resize(subs);
  std::vector<int> count(subs, 0);
  std::vector<int> with_shift(subs, 0);
  for (auto& atom : out.centroids.atoms) atom.spectrum = VecC::Zero(w);

  for (int m = 0; m < t; ++m) {
    const int sub = out.lifted.labels.assign[m];
    if (sub < 0) continue;
    out.centroids.atoms[sub].spectrum += out.dz.z.col(m);
    ++count[sub];
    if (usable[m]) ++with_shift[sub];
  }
  for (int s = 0; s < subs; ++s) {
    Atom& atom = out.centroids.atoms[s];
    atom.spectrum /= static_cast<double>(count[s]);
    atom.energy = atom.spectrum.squaredNorm();
    atom.frame_count = count[s];
    atom.parent_op = out.lifted.parent[s];
    atom.shift_undefined = with_shift[s] == 0;
    try {
      atom.period = estimate_fundamental(atom.spectrum).period;
    } catch (const std::domain_error&) {
      atom.period = w;
    }
  }
  return out;
}

StandbyRemoval remove_standby(const CentroidSet& c, double ratio) {
  if (ratio <= 0.0) throw std::invalid_argument("remove_standby: ratio must be positive");
  StandbyRemoval out;
  out.kept = c;
  if (c.size() < 2) return out;

  const int w = c.window;
  int min_idx = 0;
  double min_rms = std::sqrt(c.atoms[0].energy / w);
  for (int i = 1; i < c.size(); ++i) {
    const double rms = std::sqrt(c.atoms[i].energy / w);
    if (rms < min_rms) {
      min_rms = rms;
      min_idx = i;
    }
  }
  const int group = c.atoms[min_idx].parent_op;

  // Reference level: quietest atom belonging to any other parent operation.
  double other_min = -1.0;
  for (int i = 0; i < c.size(); ++i) {
    if (c.atoms[i].parent_op == group) continue;
    const double rms = std::sqrt(c.atoms[i].energy / w);
    if (other_min < 0.0 || rms < other_min) other_min = rms;
  }
  if (other_min < 0.0) return out;  // single parent, nothing to compare against
  if (min_rms >= ratio * other_min) return out;

  out.kept.atoms.clear();
  for (int i = 0; i < c.size(); ++i) {
    if (c.atoms[i].parent_op == group) {
      out.removed.push_back(i);
    } else {
      out.kept.atoms.push_back(c.atoms[i]);
    }
  }
  out.removed_parent = group;
  return out;
}

FundamentalEstimate estimate_fundamental(const VecC& atom) {
  const int peak = peak_bin(atom);
  if (peak < 0)
    throw std::domain_error("estimate_fundamental: no energy outside DC");
  FundamentalEstimate out;
  out.bin = peak;
  out.period = static_cast<double>(atom.size()) / peak;
  return out;
}

}  // namespace actrec
