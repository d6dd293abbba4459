#pragma once

#include <string>
#include <vector>

#include "actrec/types.hpp"

namespace actrec {

enum class ShiftStrategy { max_amplitude, dominant_ls };

ShiftStrategy shift_strategy_from_string(const std::string& s);
std::string to_string(ShiftStrategy s);

struct ShiftConfig {
  ShiftStrategy strategy = ShiftStrategy::max_amplitude;
  // dominant_ls uses every bin whose magnitude exceeds this fraction of the peak.
  double ls_fraction = 0.1;
};

VecD make_window(WindowFn fn, int w);

/// Sliding DFT, frame m bin k = sum_n x[m*H + n] w[n] exp(-2i pi k n / W).
/// Frames advance by the hop until the window no longer fits.
SpectralFrames stft(const VecD& x, const StftConfig& cfg);

/// Applies the diagonal time-shift operator: bin k is multiplied by
/// exp(-2i pi k delta / W), k = 0..W-1 literally. W-periodic in delta;
/// exact for integer shifts of W-periodic content.
VecC time_shift(const VecC& z, double delta);

/// Per-frame shift from the phase of the strongest bin in 1..W/2 (ties to the
/// lowest bin): delta = arg(z[K]) / (2 pi K / W). dominant_ls fits all strong
/// bins jointly in the least-squares sense, phase-wrap count fixed at zero.
/// Throws std::domain_error when no bin outside DC carries energy.
double estimate_window_shift(const VecC& frame, const ShiftConfig& cfg = {});

struct Lifted {
  LabelMatrix labels;        // one row per sub-operation
  std::vector<int> parent;   // sub-operation -> original label id
};

/// Splits each maximal run of one label into its own sub-operation id, in
/// order of first appearance. Runs shorter than min_run become unlabeled.
Lifted lift_contiguous(const LabelMatrix& labels, int min_run = 2);

struct DeltaStft {
  SpectralFrames dz;          // shift-aligned frames
  std::vector<double> shift;  // applied per-frame shift, samples
  Lifted lifted;
  CentroidSet centroids;      // one atom per sub-operation, frame average of dz
};

/// Full alignment pass: STFT, per-frame shift estimate, shift application,
/// label lift, per-sub-operation centroid averaging. Frames with no usable
/// phase stay unshifted; a sub-operation made only of such frames keeps its
/// flag set so the caller can treat it as stand-by.
DeltaStft delta_stft(const VecD& x, const LabelMatrix& labels, const StftConfig& cfg,
                     int min_run = 2, const ShiftConfig& shift_cfg = {});

struct StandbyRemoval {
  CentroidSet kept;
  std::vector<int> removed;  // atom indices in the input set, empty if none
  int removed_parent = -1;
};

/// Drops the stand-by group: the minimal-RMS atom and every atom sharing its
/// parent operation, gated on min RMS < ratio x smallest RMS among atoms of
/// other parents. Sets with one atom or one parent are returned untouched.
StandbyRemoval remove_standby(const CentroidSet& c, double ratio = 0.5);

struct FundamentalEstimate {
  int bin = 0;        // strongest bin in 1..W/2
  double period = 0;  // W / bin, samples
};

/// Fundamental period from the strongest magnitude bin. Throws
/// std::domain_error for an atom with no energy outside DC.
FundamentalEstimate estimate_fundamental(const VecC& atom);

}  // namespace actrec
