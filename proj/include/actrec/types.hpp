#pragma once

#include <Eigen/Dense>
#include <complex>
#include <string>
#include <vector>

namespace actrec {

using VecD = Eigen::VectorXd;
using VecC = Eigen::VectorXcd;
using MatD = Eigen::MatrixXd;
using MatC = Eigen::MatrixXcd;
using MatI = Eigen::MatrixXi;
using cplx = std::complex<double>;

enum class WindowFn { hann, rectangular, hamming };

WindowFn window_fn_from_string(const std::string& s);
std::string to_string(WindowFn w);

/// Analysis configuration. Window length and hop have no defaults; a zero
/// value means "unset" and is rejected by validate().
struct StftConfig {
  int window = 0;
  int hop = 0;
  WindowFn window_fn = WindowFn::hann;

  void validate() const;
};

/// Complex frames, one column per window position. `start[t]` is the sample
/// index of frame t's first sample.
struct SpectralFrames {
  MatC z;                    // window x frames
  std::vector<long> start;   // frame start sample

  int window() const { return static_cast<int>(z.rows()); }
  int frames() const { return static_cast<int>(z.cols()); }
};

/// Per-frame hard assignment. -1 marks an unlabeled frame.
struct LabelMatrix {
  int num_labels = 0;
  std::vector<int> assign;

  int frames() const { return static_cast<int>(assign.size()); }
  /// One-hot matrix, num_labels x frames; unlabeled frames give zero columns.
  MatI onehot() const;
  void validate() const;
};

/// One averaged sub-operation spectrum plus its bookkeeping.
struct Atom {
  VecC spectrum;
  double energy = 0.0;        // squared l2 norm of spectrum
  int frame_count = 0;
  int parent_op = -1;         // cluster id the sub-operation came from
  double period = 0.0;        // estimated fundamental period, samples
  bool shift_undefined = false;  // every frame of the sub-operation had no usable phase
};

struct CentroidSet {
  std::vector<Atom> atoms;
  int window = 0;

  int size() const { return static_cast<int>(atoms.size()); }
  /// window x atoms matrix of spectra.
  MatC matrix() const;
  std::vector<double> energies() const;
};

}  // namespace actrec
