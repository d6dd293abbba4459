#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <iostream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "actrec/clustering.hpp"
#include "actrec/io.hpp"
#include "actrec/metrics.hpp"
#include "actrec/pipeline.hpp"
#include "actrec/regcost.hpp"
#include "actrec/spectral.hpp"
#include "actrec/synth.hpp"

namespace {

using namespace actrec;

// Every pipeline field as a flag. A config file replaces the defaults first,
// then any flag the user actually passed wins over the file.
struct PipelineFlags {
  std::string config_path;
  std::string input, format = "auto", truth, window_fn, strategy, out_dir;
  int channel = -1, window = 0, hop = 0, k = 0, k_lo = 0, k_hi = 0;
  int min_run = 0, starts = 0, max_starts = 0, max_iter = 0, base = 0;
  double fs = 0, ls_fraction = 0, gamma = 0, grad_tol = 0, tau = 0;
  double lambda_col = 0, triangle_weight = 0, binary_weight = 0;
  double tikhonov = 0, row_weight = 0, norm_exponent = 0;
  std::uint64_t seed = 0;
  std::map<std::string, CLI::Option*> opt;

  void add(CLI::App* sub) {
    auto reg = [&](const char* name, CLI::Option* o) { opt[name] = o; };
    reg("--config", sub->add_option("--config", config_path,
                                    "pipeline settings as json; flags override"));
    reg("--input", sub->add_option("--input", input, "recording to analyze"));
    reg("--format", sub->add_option("--format", format, "csv, wav or auto"));
    reg("--channel", sub->add_option("--channel", channel,
                                     "channel index for multi-channel files"));
    reg("--fs", sub->add_option("--fs", fs, "override the inferred sample rate"));
    reg("--truth", sub->add_option("--truth", truth,
                                   "per-sample activation truth, enables scoring"));
    reg("--window", sub->add_option("--window", window, "analysis window, samples"));
    reg("--hop", sub->add_option("--hop", hop, "window advance, samples"));
    reg("--window-fn", sub->add_option("--window-fn", window_fn,
                                       "rectangular or hann"));
    reg("--k", sub->add_option("--k", k, "fixed cluster count, 0 sweeps a range"));
    reg("--k-lo", sub->add_option("--k-lo", k_lo, "cluster sweep lower bound"));
    reg("--k-hi", sub->add_option("--k-hi", k_hi, "cluster sweep upper bound"));
    reg("--seed", sub->add_option("--seed", seed, "clustering rng seed"));
    reg("--strategy", sub->add_option("--strategy", strategy,
                                      "shift estimate: max_amplitude or dominant_ls"));
    reg("--ls-fraction", sub->add_option("--ls-fraction", ls_fraction,
                                         "bin magnitude cutoff for dominant_ls"));
    reg("--min-run", sub->add_option("--min-run", min_run,
                                     "shortest label run kept as a sub-operation"));
    reg("--gamma", sub->add_option("--gamma", gamma, "shift regularization weight"));
    reg("--starts-per-atom",
        sub->add_option("--starts-per-atom", starts, "multistart density"));
    reg("--max-starts", sub->add_option("--max-starts", max_starts,
                                        "hard cap on multistart solves"));
    reg("--grad-tol", sub->add_option("--grad-tol", grad_tol,
                                      "solver gradient tolerance"));
    reg("--max-iter", sub->add_option("--max-iter", max_iter,
                                      "solver iteration cap"));
    reg("--tau", sub->add_option("--tau", tau, "decomposition threshold"));
    reg("--base", sub->add_option("--base", base, "multiplicity base"));
    reg("--lambda-col", sub->add_option("--lambda-col", lambda_col,
                                        "column sparsity weight"));
    reg("--triangle-weight", sub->add_option("--triangle-weight", triangle_weight,
                                             "energy consistency weight"));
    reg("--binary-weight", sub->add_option("--binary-weight", binary_weight,
                                           "binary attraction weight"));
    reg("--tikhonov", sub->add_option("--tikhonov", tikhonov, "tikhonov weight"));
    reg("--row-weight", sub->add_option("--row-weight", row_weight,
                                        "source count weight"));
    reg("--norm-exponent", sub->add_option("--norm-exponent", norm_exponent,
                                           "sparse norm exponent in (0, 1]"));
    reg("--out-dir", sub->add_option("--out-dir", out_dir, "artifact directory"));
  }

  PipelineConfig build() const {
    PipelineConfig c;
    if (opt.at("--config")->count())
      c = PipelineConfig::from_json_text(read_text_file(config_path));
    auto on = [&](const char* name) { return opt.at(name)->count() > 0; };
    if (on("--input")) c.input_path = input;
    if (on("--format")) c.input_format = format;
    if (on("--channel")) c.channel = channel;
    if (on("--fs")) c.fs_override = fs;
    if (on("--truth")) c.truth_path = truth;
    if (on("--window")) c.stft.window = window;
    if (on("--hop")) c.stft.hop = hop;
    if (on("--window-fn")) c.stft.window_fn = window_fn_from_string(window_fn);
    if (on("--k")) c.cluster.k = k;
    if (on("--k-lo")) c.cluster.k_lo = k_lo;
    if (on("--k-hi")) c.cluster.k_hi = k_hi;
    if (on("--seed")) c.cluster.seed = seed;
    if (on("--strategy")) c.shift.strategy = shift_strategy_from_string(strategy);
    if (on("--ls-fraction")) c.shift.ls_fraction = ls_fraction;
    if (on("--min-run")) c.min_run = min_run;
    if (on("--gamma")) c.resync.gamma = gamma;
    if (on("--starts-per-atom")) c.resync.search.starts_per_atom = starts;
    if (on("--max-starts")) c.resync.search.max_starts = max_starts;
    if (on("--grad-tol")) c.resync.search.solver.grad_tol = grad_tol;
    if (on("--max-iter")) c.resync.search.solver.max_iter = max_iter;
    if (on("--tau")) c.tau = tau;
    if (on("--base")) c.base = base;
    if (on("--lambda-col")) c.reg.lambda_col = lambda_col;
    if (on("--triangle-weight")) c.reg.triangle_weight = triangle_weight;
    if (on("--binary-weight")) c.reg.binary_weight = binary_weight;
    if (on("--tikhonov")) c.reg.tikhonov = tikhonov;
    if (on("--row-weight")) c.reg.row_weight = row_weight;
    if (on("--norm-exponent")) c.reg.norm_exponent = norm_exponent;
    if (on("--out-dir")) c.output_dir = out_dir;
    return c;
  }
};

void emit_rows(const std::vector<std::vector<std::string>>& rows,
               const std::string& path) {
  if (!path.empty()) {
    write_csv(path, rows);
    return;
  }
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i)
      std::cout << (i ? "," : "") << row[i];
    std::cout << "\n";
  }
}

int do_synth(const std::string& scenario_path, const std::string& out,
             const std::string& truth_out) {
  Scenario sc = Scenario::from_json_text(read_text_file(scenario_path));
  sc.validate();
  Composition comp = compose_sequence(sc);
  TimeSeries ts;
  ts.samples = comp.signal;
  ts.fs = sc.fs;
  write_timeseries_csv(out, ts);
  if (!truth_out.empty()) {
    std::vector<std::string> names;
    for (const SourceModel& s : sc.sources) names.push_back(s.name);
    write_truth_csv(truth_out, comp.truth, sc.fs, names);
  }
  std::cout << "wrote " << ts.samples.size() << " samples at " << format_double(ts.fs)
            << " Hz to " << out << "\n";
  return 0;
}

int do_run(const PipelineFlags& flags) {
  PipelineConfig cfg = flags.build();
  RunReport r = run_pipeline(cfg);
  std::cout << "frames: " << r.frames << "\n";
  std::cout << "kept atoms: " << r.kept_atoms << "\n";
  std::cout << "sources: " << r.catalog.num_sources() << "\n";
  if (r.scored) {
    std::cout << "balanced accuracy:";
    for (double v : r.eval.per_source) std::cout << " " << format_double(v);
    std::cout << "\n";
  }
  std::cout << "report: " << cfg.output_dir << "/report.json\n";
  return 0;
}

int do_sweep(const PipelineFlags& flags, double tau_lo, double tau_hi, int points,
             const std::string& out) {
  if (!(tau_lo > 0.0) || tau_hi < tau_lo)
    throw CLI::ValidationError("sweep-tau", "need 0 < tau-lo <= tau-hi");
  if (points < 1) throw CLI::ValidationError("sweep-tau", "need at least one point");

  PipelineConfig cfg = flags.build();
  cfg.validate();
  TimeSeries ts = ingest(cfg.input_path, cfg.input_format, cfg.channel);
  if (cfg.fs_override > 0.0) ts.fs = cfg.fs_override;
  SpectralFrames z = stft(ts.samples, cfg.stft);
  FeatureMatrix f = extract_features(z);
  const int k = cfg.cluster.k > 0
                    ? cfg.cluster.k
                    : estimate_num_operations(f, cfg.cluster.k_lo, cfg.cluster.k_hi,
                                              cfg.cluster.seed)
                          .k;
  ClusterResult cr = kmeans(f, k, cfg.cluster.seed);
  DeltaStft d = delta_stft(ts.samples, cr.labels, cfg.stft, cfg.min_run, cfg.shift);
  CentroidSet kept = remove_standby(d.centroids).kept;
  if (kept.size() < 2)
    throw std::runtime_error("sweep-tau: only " + std::to_string(kept.size()) +
                             " atom survives stand-by removal, nothing to sweep");

  std::vector<double> taus;
  for (int i = 0; i < points; ++i) {
    double t = points == 1 ? tau_lo
                           : tau_lo * std::pow(tau_hi / tau_lo,
                                               static_cast<double>(i) /
                                                   static_cast<double>(points - 1));
    taus.push_back(t);
  }
  std::vector<TauSweepRow> rows = sweep_tau(kept, cfg.base, taus, cfg.resync);

  std::vector<std::vector<std::string>> table = {{"tau", "sources", "mean_residual"}};
  for (const TauSweepRow& row : rows)
    table.push_back({format_double(row.tau), std::to_string(row.sources),
                     format_double(row.mean_residual)});
  emit_rows(table, out);
  if (!out.empty()) std::cout << "wrote " << rows.size() << " rows to " << out << "\n";
  return 0;
}

int do_landscape(const std::string& family_name, int resolution,
                 std::pair<double, double> c1_range,
                 std::pair<double, double> c2_range, int window,
                 const RegParams& params, const std::string& out) {
  LandscapeFamily family = landscape_family_from_string(family_name);
  CentroidSet atoms = make_pair_sum_atoms(window);
  LandscapeResult grid =
      landscape_grid(family, c1_range, c2_range, atoms, params, resolution);

  std::vector<std::vector<std::string>> table = {{"c1", "c2", "cost"}};
  for (int i = 0; i < grid.c1.size(); ++i)
    for (int j = 0; j < grid.c2.size(); ++j)
      table.push_back({format_double(grid.c1[i]), format_double(grid.c2[j]),
                       format_double(grid.j(i, j))});
  emit_rows(table, out);
  std::cout << "min " << format_double(grid.min_value) << " at c1="
            << format_double(grid.c1[grid.argmin_c1]) << " c2="
            << format_double(grid.c2[grid.argmin_c2]) << "\n";
  return 0;
}

int do_score(const std::string& recovered_path, const std::string& truth_path,
             int window, int hop, const std::string& out) {
  MatI recovered = read_activations_csv(recovered_path);
  MatI truth = read_truth_csv(truth_path);
  StftConfig cfg;
  cfg.window = window;
  cfg.hop = hop;
  cfg.window_fn = WindowFn::rectangular;
  FrameTruth ft = align_frames(truth, cfg);
  if (ft.truth.cols() != recovered.cols())
    throw std::runtime_error("score: truth covers " + std::to_string(ft.truth.cols()) +
                             " frames, recovered table has " +
                             std::to_string(recovered.cols()));
  EvalReport report = score(recovered, ft.truth, ft.mask);
  if (out.empty()) {
    std::cout << report.to_json_text() << "\n";
  } else {
    write_text_file(out, report.to_json_text());
    std::cout << "balanced accuracy:";
    for (double v : report.per_source) std::cout << " " << format_double(v);
    std::cout << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"activation recovery from a single mixed periodic recording"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth", "render a scenario file to csv");
  std::string scenario_path, synth_out, synth_truth;
  synth->add_option("--scenario", scenario_path, "scenario description, json")
      ->required();
  synth->add_option("--out", synth_out, "signal csv destination")->required();
  synth->add_option("--truth-out", synth_truth, "activation truth csv destination");

  auto* run = app.add_subcommand("run", "full recovery pipeline");
  PipelineFlags run_flags;
  run_flags.add(run);

  auto* sweep = app.add_subcommand("sweep-tau",
                                   "source count across a log grid of thresholds");
  PipelineFlags sweep_flags;
  sweep_flags.add(sweep);
  double tau_lo = 0, tau_hi = 0;
  int sweep_points = 9;
  std::string sweep_out;
  sweep->add_option("--tau-lo", tau_lo, "smallest threshold")->required();
  sweep->add_option("--tau-hi", tau_hi, "largest threshold")->required();
  sweep->add_option("--points", sweep_points, "grid size, log spaced");
  sweep->add_option("--out", sweep_out, "csv destination, stdout when omitted");

  auto* land = app.add_subcommand("landscape",
                                  "objective over a two-parameter weight slice");
  std::string family = "pair_blend", land_out;
  int land_res = 41, land_window = 32;
  double c1_lo = -0.5, c1_hi = 1.5, c2_lo = -0.5, c2_hi = 1.5;
  RegParams land_params;
  land->add_option("--family", family,
                   "pair_blend, self_scale, b_via_sum or a_via_sum");
  land->add_option("--resolution", land_res, "points per axis");
  land->add_option("--c1-lo", c1_lo, "first axis start");
  land->add_option("--c1-hi", c1_hi, "first axis end");
  land->add_option("--c2-lo", c2_lo, "second axis start");
  land->add_option("--c2-hi", c2_hi, "second axis end");
  land->add_option("--window", land_window, "atom window length");
  land->add_option("--lambda-col", land_params.lambda_col, "column sparsity weight");
  land->add_option("--triangle-weight", land_params.triangle_weight,
                   "energy consistency weight");
  land->add_option("--binary-weight", land_params.binary_weight,
                   "binary attraction weight");
  land->add_option("--tikhonov", land_params.tikhonov, "tikhonov weight");
  land->add_option("--row-weight", land_params.row_weight, "source count weight");
  land->add_option("--norm-exponent", land_params.norm_exponent,
                   "sparse norm exponent in (0, 1]");
  land->add_option("--out", land_out, "csv destination, stdout when omitted");

  auto* score_cmd = app.add_subcommand("score",
                                       "compare recovered activations with truth");
  std::string score_rec, score_truth, score_out;
  int score_window = 0, score_hop = 0;
  score_cmd->add_option("--recovered", score_rec, "activations csv")->required();
  score_cmd->add_option("--truth", score_truth, "per-sample truth csv")->required();
  score_cmd->add_option("--window", score_window, "analysis window, samples")
      ->required();
  score_cmd->add_option("--hop", score_hop, "window advance, samples")->required();
  score_cmd->add_option("--out", score_out, "report destination, stdout when omitted");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return do_synth(scenario_path, synth_out, synth_truth);
    if (run->parsed()) return do_run(run_flags);
    if (sweep->parsed())
      return do_sweep(sweep_flags, tau_lo, tau_hi, sweep_points, sweep_out);
    if (land->parsed())
      return do_landscape(family, land_res, {c1_lo, c1_hi}, {c2_lo, c2_hi},
                          land_window, land_params, land_out);
    if (score_cmd->parsed())
      return do_score(score_rec, score_truth, score_window, score_hop, score_out);
  } catch (const actrec::PipelineError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return actrec::exit_code(e.stage);
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
