#pragma once

#include <string>
#include <vector>

#include "actrec/types.hpp"

namespace actrec {

/// Ground truth resampled onto analysis frames. Each frame carries the
/// majority vote of every source over its window; a frame whose window
/// covers an activation boundary instant is flagged as a transition so the
/// scorer can leave it out.
struct FrameTruth {
  MatI truth;              // sources x frames
  std::vector<char> mask;  // 1 marks a transition frame

  int masked() const;
};

FrameTruth align_frames(const MatI& truth_samples, const StftConfig& cfg);

struct EvalReport {
  std::vector<int> assignment;     // recovered row -> truth row, -1 unmatched
  std::vector<double> per_source;  // balanced accuracy per truth row
  double hamming = 0.0;            // cell agreement ratio over unmasked frames
  double exact_match = 0.0;        // unmasked frames with every row correct
  int masked_frames = 0;

  std::string to_json_text() const;
};

/// Scores recovered activations against frame-aligned truth. Rows are paired
/// one-to-one so the summed balanced accuracy is maximal; rows left over on
/// either side are held against the all-zero sequence. Frames with a nonzero
/// mask entry are skipped everywhere. An empty mask skips nothing.
EvalReport score(const MatI& recovered, const MatI& truth,
                 const std::vector<char>& mask = {});

/// Maximum-total-value one-to-one pairing of rows with columns, row -> column
/// with -1 for rows left out when columns run short.
std::vector<int> max_assignment(const MatD& value);

}  // namespace actrec
