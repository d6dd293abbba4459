#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "actrec/clustering.hpp"
#include "actrec/decompose.hpp"
#include "actrec/metrics.hpp"
#include "actrec/regcost.hpp"
#include "actrec/resync.hpp"
#include "actrec/spectral.hpp"
#include "actrec/types.hpp"

namespace actrec {

struct ClusterSelection {
  int k = 0;  // 0 sweeps [k_lo, k_hi] and keeps the best silhouette
  int k_lo = 2;
  int k_hi = 12;
  std::uint64_t seed = 1;
};

struct PipelineConfig {
  std::string input_path;
  std::string input_format = "auto";
  int channel = -1;          // wav channel; -1 demands mono
  double fs_override = 0.0;  // 0 keeps the ingested rate
  std::string truth_path;    // per-sample activation truth; empty skips scoring

  StftConfig stft = {128, 128, WindowFn::rectangular};
  ClusterSelection cluster;
  ShiftConfig shift;
  int min_run = 2;
  ResidualConfig resync;
  double tau = 800.0;  // decomposition threshold, calibrated for the demo scene
  int base = 2;
  RegParams reg;
  std::string output_dir = ".";

  /// Field sanity plus existence of the referenced input files.
  void validate() const;
  static PipelineConfig from_json_text(const std::string& text);
  std::string to_json_text() const;
};

enum class PipelineStage {
  config,
  ingest,
  spectral,
  clustering,
  alignment,
  standby,
  residual,
  selection,
  activation,
  scoring,
  artifacts,
};

const char* to_string(PipelineStage s);

/// Distinct nonzero process exit code per failed stage.
int exit_code(PipelineStage s);

class PipelineError : public std::runtime_error {
 public:
  PipelineError(PipelineStage s, const std::string& msg);
  PipelineStage stage;
};

struct RunReport {
  PipelineConfig config;  // effective values, defaults expanded

  double fs = 0.0;
  long samples = 0;
  int frames = 0;

  OperationCountEstimate k_estimate;
  bool k_swept = false;
  int empty_clusters = 0;

  int sub_operations = 0;
  int unlabeled_frames = 0;

  std::vector<int> removed_atoms;
  int removed_parent = -1;
  int kept_atoms = 0;

  long combos = 0;
  long computed_cells = 0;

  Representation rep;
  SourceCatalog catalog;
  MatI activations;  // one row per merged source group

  bool ineq_valid = false;
  InequalityReport ineq;
  std::string ineq_error;

  bool scored = false;
  EvalReport eval;

  bool partial = false;
  std::string failed_stage;
  std::string error;

  std::string to_json_text() const;
};

/// Full recovery chain over one recording; artifacts land in
/// config.output_dir (labels.csv, lambda.csv, residual.csv, activations.csv,
/// report.json). A stage failure writes a report flagged partial and throws
/// PipelineError naming the stage.
RunReport run_pipeline(const PipelineConfig& config);

struct TauSweepRow {
  double tau = 0.0;
  int sources = 0;
  double mean_residual = 0.0;
};

/// Greedy selection replayed per threshold on one residual table built at
/// the largest requested threshold; sources counted after merging.
std::vector<TauSweepRow> sweep_tau(const CentroidSet& kept, int base,
                                   const std::vector<double>& taus,
                                   const ResidualConfig& cfg = {});

void write_truth_csv(const std::string& path, const MatI& truth, double fs,
                     const std::vector<std::string>& names);
MatI read_truth_csv(const std::string& path);

void write_activations_csv(const std::string& path, const MatI& activations);
MatI read_activations_csv(const std::string& path);

}  // namespace actrec
