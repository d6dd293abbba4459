#include "actrec/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <initializer_list>
#include <json.hpp>
#include <limits>
#include <string>
#include <vector>

#include "actrec/io.hpp"

namespace actrec {

namespace {

using nlohmann::json;

void expect_keys(const json& j, const char* section,
                 std::initializer_list<const char*> keys) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : keys) known = known || it.key() == k;
    if (!known)
      throw std::invalid_argument("config: unknown key \"" + it.key() + "\" in " +
                                  section);
  }
}

}  // namespace

void PipelineConfig::validate() const {
  if (input_path.empty()) throw std::invalid_argument("config: input path not set");
  if (!std::filesystem::exists(input_path))
    throw std::invalid_argument("config: input not found: " + input_path);
  if (!truth_path.empty() && !std::filesystem::exists(truth_path))
    throw std::invalid_argument("config: truth not found: " + truth_path);
  if (channel < -1) throw std::invalid_argument("config: bad channel index");
  if (fs_override < 0.0) throw std::invalid_argument("config: negative sample rate");
  stft.validate();
  if (cluster.k < 0) throw std::invalid_argument("config: negative cluster count");
  if (cluster.k == 0 && (cluster.k_lo < 1 || cluster.k_lo > cluster.k_hi))
    throw std::invalid_argument("config: bad cluster range");
  if (min_run < 1) throw std::invalid_argument("config: min_run < 1");
  if (resync.gamma < 0.0) throw std::invalid_argument("config: negative gamma");
  if (resync.search.starts_per_atom < 1 || resync.search.max_starts < 1)
    throw std::invalid_argument("config: bad multistart limits");
  if (!(resync.search.solver.grad_tol > 0.0) || resync.search.solver.max_iter < 1)
    throw std::invalid_argument("config: bad solver limits");
  if (!(tau > 0.0)) throw std::invalid_argument("config: tau must be positive");
  if (base < 2) throw std::invalid_argument("config: base must be at least 2");
  reg.validate();
  if (output_dir.empty()) throw std::invalid_argument("config: output dir not set");
}

PipelineConfig PipelineConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  try {
    PipelineConfig c;
    expect_keys(j, "config",
                {"input", "stft", "clustering", "alignment", "resync",
                 "decomposition", "regularization", "output_dir"});
    if (j.contains("input")) {
      const json& s = j["input"];
      expect_keys(s, "input", {"path", "format", "channel", "fs_override", "truth_path"});
      c.input_path = s.value("path", c.input_path);
      c.input_format = s.value("format", c.input_format);
      c.channel = s.value("channel", c.channel);
      c.fs_override = s.value("fs_override", c.fs_override);
      c.truth_path = s.value("truth_path", c.truth_path);
    }
    if (j.contains("stft")) {
      const json& s = j["stft"];
      expect_keys(s, "stft", {"window", "hop", "window_fn"});
      c.stft.window = s.value("window", c.stft.window);
      c.stft.hop = s.value("hop", c.stft.hop);
      if (s.contains("window_fn"))
        c.stft.window_fn = window_fn_from_string(s["window_fn"].get<std::string>());
    }
    if (j.contains("clustering")) {
      const json& s = j["clustering"];
      expect_keys(s, "clustering", {"k", "k_lo", "k_hi", "seed"});
      c.cluster.k = s.value("k", c.cluster.k);
      c.cluster.k_lo = s.value("k_lo", c.cluster.k_lo);
      c.cluster.k_hi = s.value("k_hi", c.cluster.k_hi);
      c.cluster.seed = s.value("seed", c.cluster.seed);
    }
    if (j.contains("alignment")) {
      const json& s = j["alignment"];
      expect_keys(s, "alignment", {"strategy", "ls_fraction", "min_run"});
      if (s.contains("strategy"))
        c.shift.strategy = shift_strategy_from_string(s["strategy"].get<std::string>());
      c.shift.ls_fraction = s.value("ls_fraction", c.shift.ls_fraction);
      c.min_run = s.value("min_run", c.min_run);
    }
    if (j.contains("resync")) {
      const json& s = j["resync"];
      expect_keys(s, "resync",
                  {"gamma", "starts_per_atom", "max_starts", "grad_tol", "max_iter"});
      c.resync.gamma = s.value("gamma", c.resync.gamma);
      c.resync.search.starts_per_atom =
          s.value("starts_per_atom", c.resync.search.starts_per_atom);
      c.resync.search.max_starts = s.value("max_starts", c.resync.search.max_starts);
      c.resync.search.solver.grad_tol =
          s.value("grad_tol", c.resync.search.solver.grad_tol);
      c.resync.search.solver.max_iter =
          s.value("max_iter", c.resync.search.solver.max_iter);
    }
    if (j.contains("decomposition")) {
      const json& s = j["decomposition"];
      expect_keys(s, "decomposition", {"tau", "base"});
      c.tau = s.value("tau", c.tau);
      c.base = s.value("base", c.base);
    }
    if (j.contains("regularization")) {
      const json& s = j["regularization"];
      expect_keys(s, "regularization",
                  {"lambda_col", "triangle_weight", "binary_weight", "tikhonov",
                   "row_weight", "norm_exponent"});
      c.reg.lambda_col = s.value("lambda_col", c.reg.lambda_col);
      c.reg.triangle_weight = s.value("triangle_weight", c.reg.triangle_weight);
      c.reg.binary_weight = s.value("binary_weight", c.reg.binary_weight);
      c.reg.tikhonov = s.value("tikhonov", c.reg.tikhonov);
      c.reg.row_weight = s.value("row_weight", c.reg.row_weight);
      c.reg.norm_exponent = s.value("norm_exponent", c.reg.norm_exponent);
    }
    c.output_dir = j.value("output_dir", c.output_dir);
    return c;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
}

std::string PipelineConfig::to_json_text() const {
  json j;
  j["input"] = {{"path", input_path},
                {"format", input_format},
                {"channel", channel},
                {"fs_override", fs_override},
                {"truth_path", truth_path}};
  j["stft"] = {{"window", stft.window},
               {"hop", stft.hop},
               {"window_fn", to_string(stft.window_fn)}};
  j["clustering"] = {{"k", cluster.k},
                     {"k_lo", cluster.k_lo},
                     {"k_hi", cluster.k_hi},
                     {"seed", cluster.seed}};
  j["alignment"] = {{"strategy", to_string(shift.strategy)},
                    {"ls_fraction", shift.ls_fraction},
                    {"min_run", min_run}};
  j["resync"] = {{"gamma", resync.gamma},
                 {"starts_per_atom", resync.search.starts_per_atom},
                 {"max_starts", resync.search.max_starts},
                 {"grad_tol", resync.search.solver.grad_tol},
                 {"max_iter", resync.search.solver.max_iter}};
  j["decomposition"] = {{"tau", tau}, {"base", base}};
  j["regularization"] = {{"lambda_col", reg.lambda_col},
                         {"triangle_weight", reg.triangle_weight},
                         {"binary_weight", reg.binary_weight},
                         {"tikhonov", reg.tikhonov},
                         {"row_weight", reg.row_weight},
                         {"norm_exponent", reg.norm_exponent}};
  j["output_dir"] = output_dir;
  return j.dump(2);
}

const char* to_string(PipelineStage s) {
  switch (s) {
    case PipelineStage::config: return "config";
    case PipelineStage::ingest: return "ingest";
    case PipelineStage::spectral: return "spectral";
    case PipelineStage::clustering: return "clustering";
    case PipelineStage::alignment: return "alignment";
    case PipelineStage::standby: return "standby";
    case PipelineStage::residual: return "residual";
    case PipelineStage::selection: return "selection";
    case PipelineStage::activation: return "activation";
    case PipelineStage::scoring: return "scoring";
    case PipelineStage::artifacts: return "artifacts";
  }
  return "unknown";
}

int exit_code(PipelineStage s) { return 2 + static_cast<int>(s); }

PipelineError::PipelineError(PipelineStage s, const std::string& msg)
    : std::runtime_error(std::string(to_string(s)) + ": " + msg), stage(s) {}

void write_truth_csv(const std::string& path, const MatI& truth, double fs,
                     const std::vector<std::string>& names) {
  if (!(fs > 0.0)) throw std::invalid_argument("write_truth_csv: fs <= 0");
  if (static_cast<long>(names.size()) != truth.rows())
    throw std::invalid_argument("write_truth_csv: name count mismatch");
  std::vector<std::vector<std::string>> rows;
  rows.reserve(static_cast<size_t>(truth.cols()) + 1);
  std::vector<std::string> header = {"time"};
  header.insert(header.end(), names.begin(), names.end());
  rows.push_back(header);
  for (long t = 0; t < truth.cols(); ++t) {
    std::vector<std::string> row = {format_double(static_cast<double>(t) / fs)};
    for (long i = 0; i < truth.rows(); ++i) row.push_back(std::to_string(truth(i, t)));
    rows.push_back(row);
  }
  write_csv(path, rows);
}

namespace {

// Shared shape for truth and activation tables: one leading index column,
// one column per row of the result, values integral.
MatI read_wide_csv(const std::string& path) {
  std::string text = read_text_file(path);
  std::vector<std::vector<int>> data;
  size_t pos = 0;
  long rowno = 0;
  bool header_allowed = true;
  size_t width = 0;
  while (pos < text.size()) {
    size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++rowno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;

    std::vector<int> vals;
    bool numeric = true;
    size_t p = 0;
    while (true) {
      size_t comma = line.find(',', p);
      std::string cell = line.substr(p, comma == std::string::npos ? std::string::npos
                                                                   : comma - p);
      size_t a = cell.find_first_not_of(" \t");
      size_t b = cell.find_last_not_of(" \t");
      cell = a == std::string::npos ? "" : cell.substr(a, b - a + 1);
      try {
        size_t used = 0;
        double v = std::stod(cell, &used);
        if (used != cell.size()) numeric = false;
        vals.push_back(v != 0.0 ? static_cast<int>(std::lround(v)) : 0);
      } catch (...) {
        numeric = false;
      }
      if (comma == std::string::npos) break;
      p = comma + 1;
    }
    if (!numeric) {
      if (header_allowed) {
        header_allowed = false;
        continue;
      }
      throw std::runtime_error(path + ": row " + std::to_string(rowno) +
                               " is not numeric");
    }
    header_allowed = false;
    if (vals.size() < 2)
      throw std::runtime_error(path + ": row " + std::to_string(rowno) +
                               " needs an index column plus data");
    if (width == 0) width = vals.size();
    if (vals.size() != width)
      throw std::runtime_error(path + ": row " + std::to_string(rowno) +
                               " has a different column count");
    vals.erase(vals.begin());
    data.push_back(std::move(vals));
  }
  if (data.empty()) throw std::runtime_error(path + ": no data rows");
  MatI out(static_cast<long>(data.front().size()), static_cast<long>(data.size()));
  for (size_t t = 0; t < data.size(); ++t)
    for (size_t i = 0; i < data[t].size(); ++i)
      out(static_cast<long>(i), static_cast<long>(t)) = data[t][i];
  return out;
}

}  // namespace

MatI read_truth_csv(const std::string& path) { return read_wide_csv(path); }

void write_activations_csv(const std::string& path, const MatI& activations) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(static_cast<size_t>(activations.cols()) + 1);
  std::vector<std::string> header = {"frame"};
  for (long g = 0; g < activations.rows(); ++g)
    header.push_back("source_" + std::to_string(g));
  rows.push_back(header);
  for (long t = 0; t < activations.cols(); ++t) {
    std::vector<std::string> row = {std::to_string(t)};
    for (long g = 0; g < activations.rows(); ++g)
      row.push_back(std::to_string(activations(g, t)));
    rows.push_back(row);
  }
  write_csv(path, rows);
}

MatI read_activations_csv(const std::string& path) { return read_wide_csv(path); }

std::string RunReport::to_json_text() const {
  json j;
  j["config"] = json::parse(config.to_json_text());
  j["ingest"] = {{"fs", fs}, {"samples", samples}};
  j["spectral"] = {{"frames", frames}};
  json jc = {{"k", k_estimate.k},
             {"swept", k_swept},
             {"empty_clusters", empty_clusters}};
  if (k_swept) {
    jc["candidates"] = k_estimate.candidates;
    jc["scores"] = k_estimate.scores;
    jc["degenerate"] = k_estimate.degenerate;
  }
  j["clustering"] = jc;
  j["alignment"] = {{"sub_operations", sub_operations},
                    {"unlabeled_frames", unlabeled_frames}};
  j["standby"] = {{"removed_atoms", removed_atoms},
                  {"removed_parent", removed_parent},
                  {"kept_atoms", kept_atoms}};
  j["residual_matrix"] = {{"combos_per_operation", combos},
                          {"computed_cells", computed_cells}};
  if (rep.num_atoms() > 0) {
    j["selection"] = {
        {"sources", rep.num_sources()},
        {"source_atoms", rep.sources},
        {"chosen_combination", rep.chosen},
        {"residuals", std::vector<double>(rep.residuals.data(),
                                          rep.residuals.data() + rep.residuals.size())}};
    json groups = json::array();
    for (const auto& g : catalog.groups) groups.push_back(g);
    j["merge"] = {{"groups", groups}, {"sources", catalog.num_sources()}};
  }
  if (ineq_valid) {
    j["inequalities"] = {{"mu_min", ineq.mu_min},
                         {"row_bound", ineq.row_bound},
                         {"row_margin", ineq.row_margin},
                         {"row_ok", ineq.row_ok},
                         {"center_cost", ineq.center_cost},
                         {"reference_cost", ineq.reference_cost},
                         {"center_margin", ineq.center_margin},
                         {"center_ok", ineq.center_ok},
                         {"passed", ineq.valid()},
                         {"note", ineq.note}};
  } else if (!ineq_error.empty()) {
    j["inequalities"] = {{"error", ineq_error}};
  }
  if (scored) j["scoring"] = json::parse(eval.to_json_text());
  j["partial"] = partial;
  if (partial) {
    j["failed_stage"] = failed_stage;
    j["error"] = error;
  }
  return j.dump(2);
}

namespace {

[[noreturn]] void fail_stage(RunReport& rep, const std::string& outdir,
                             PipelineStage s, const std::string& msg) {
  rep.partial = true;
  rep.failed_stage = to_string(s);
  rep.error = msg;
  if (!outdir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(outdir, ec);
    if (!ec) {
      try {
        write_text_file(outdir + "/report.json", rep.to_json_text());
      } catch (...) {
      }
    }
  }
  throw PipelineError(s, msg);
}

template <typename Fn>
auto stage(RunReport& rep, const std::string& outdir, PipelineStage s, Fn&& fn)
    -> decltype(fn()) {
  try {
    return fn();
  } catch (const PipelineError&) {
    throw;
  } catch (const std::exception& e) {
    fail_stage(rep, outdir, s, e.what());
  }
}

}  // namespace

RunReport run_pipeline(const PipelineConfig& config) {
  RunReport out;
  out.config = config;
  const std::string dir = config.output_dir;

  stage(out, dir, PipelineStage::config, [&] { config.validate(); });

  TimeSeries ts = stage(out, dir, PipelineStage::ingest, [&] {
    TimeSeries t = ingest(config.input_path, config.input_format, config.channel);
    if (config.fs_override > 0.0) t.fs = config.fs_override;
    if (t.samples.size() == 0) throw std::runtime_error("no samples in input");
    if (!(t.fs > 0.0)) throw std::runtime_error("sample rate not positive");
    return t;
  });
  out.fs = ts.fs;
  out.samples = ts.samples.size();

  SpectralFrames z = stage(out, dir, PipelineStage::spectral,
                           [&] { return stft(ts.samples, config.stft); });
  out.frames = z.frames();

  ClusterResult cr = stage(out, dir, PipelineStage::clustering, [&] {
    FeatureMatrix f = extract_features(z);
    if (config.cluster.k > 0) {
      out.k_estimate = OperationCountEstimate{};
      out.k_estimate.k = config.cluster.k;
      out.k_swept = false;
      return kmeans(f, config.cluster.k, config.cluster.seed);
    }
    out.k_estimate = estimate_num_operations(f, config.cluster.k_lo,
                                             config.cluster.k_hi, config.cluster.seed);
    out.k_swept = true;
    return kmeans(f, out.k_estimate.k, config.cluster.seed);
  });
  out.empty_clusters = cr.empty_clusters;

  DeltaStft d = stage(out, dir, PipelineStage::alignment, [&] {
    return delta_stft(ts.samples, cr.labels, config.stft, config.min_run,
                      config.shift);
  });
  out.sub_operations = d.centroids.size();
  out.unlabeled_frames = static_cast<int>(
      std::count(d.lifted.labels.assign.begin(), d.lifted.labels.assign.end(), -1));

  StandbyRemoval sr = stage(out, dir, PipelineStage::standby, [&] {
    StandbyRemoval r = remove_standby(d.centroids);
    if (r.kept.size() == 0)
      throw std::runtime_error("no atoms survive stand-by removal");
    return r;
  });
  out.removed_atoms = sr.removed;
  out.removed_parent = sr.removed_parent;
  out.kept_atoms = sr.kept.size();

  // sub-operation id -> kept atom index; frames of removed groups go unlabeled
  LabelMatrix kept_labels;
  {
    std::vector<int> remap(static_cast<size_t>(d.centroids.size()), -1);
    std::vector<char> gone(static_cast<size_t>(d.centroids.size()), 0);
    for (int r : sr.removed) gone[static_cast<size_t>(r)] = 1;
    int next = 0;
    for (size_t i = 0; i < remap.size(); ++i)
      if (!gone[i]) remap[i] = next++;
    kept_labels.num_labels = sr.kept.size();
    kept_labels.assign.reserve(d.lifted.labels.assign.size());
    for (int sub : d.lifted.labels.assign)
      kept_labels.assign.push_back(sub < 0 ? -1 : remap[static_cast<size_t>(sub)]);
  }

  // A lone atom has nothing to decompose into; the table needs two.
  const bool have_matrix = sr.kept.size() >= 2;
  ResidualMatrix rm;
  if (have_matrix) {
    rm = stage(out, dir, PipelineStage::residual, [&] {
      return build_residual_matrix(sr.kept, config.base, config.tau, config.resync);
    });
    out.combos = rm.combos();
    out.computed_cells = static_cast<long>(
        std::count_if(rm.cells.begin(), rm.cells.end(), [](const ResidualCell& c) {
          return c.status == CellStatus::computed;
        }));
  }

  out.rep = stage(out, dir, PipelineStage::selection, [&] {
    if (have_matrix) return greedy_select(rm, config.tau);
    Representation rep;
    rep.base = config.base;
    rep.tau = config.tau;
    rep.lambda = MatI::Zero(1, 1);
    rep.lambda(0, 0) = 1;
    rep.residuals = VecD::Zero(1);
    rep.shifts.resize(1);
    rep.chosen = {-1};
    rep.sources = {0};
    return rep;
  });

  stage(out, dir, PipelineStage::activation, [&] {
    MatI per_source = recover_activations(out.rep, kept_labels);
    out.catalog = merge_configurations(out.rep, sr.kept, config.resync.search);
    out.activations = MatI::Zero(out.catalog.num_sources(), out.frames);
    for (int q = 0; q < out.rep.num_sources(); ++q) {
      const int atom = out.rep.sources[static_cast<size_t>(q)];
      const int g = out.catalog.group_of[static_cast<size_t>(atom)];
      for (int t = 0; t < out.frames; ++t)
        out.activations(g, t) = std::max(out.activations(g, t), per_source(q, t));
    }
  });

  if (!config.truth_path.empty()) {
    stage(out, dir, PipelineStage::scoring, [&] {
      MatI truth = read_truth_csv(config.truth_path);
      if (truth.cols() != out.samples)
        throw std::runtime_error("truth has " + std::to_string(truth.cols()) +
                                 " samples, recording has " +
                                 std::to_string(out.samples));
      FrameTruth ft = align_frames(truth, config.stft);
      out.eval = score(out.activations, ft.truth, ft.mask);
      out.scored = true;
    });
  }

  // Advisory weight check on the final dictionary; failure to evaluate is
  // reported, not fatal.
  try {
    out.ineq = check_inequalities(config.reg, sr.kept);
    out.ineq_valid = true;
  } catch (const std::exception& e) {
    out.ineq_error = e.what();
  }

  stage(out, dir, PipelineStage::artifacts, [&] {
    std::filesystem::create_directories(dir);

    std::vector<std::vector<std::string>> labels;
    labels.reserve(static_cast<size_t>(out.frames) + 1);
    labels.push_back({"frame", "cluster", "sub_operation", "atom"});
    for (int t = 0; t < out.frames; ++t) {
      labels.push_back({std::to_string(t),
                        std::to_string(cr.labels.assign[static_cast<size_t>(t)]),
                        std::to_string(d.lifted.labels.assign[static_cast<size_t>(t)]),
                        std::to_string(kept_labels.assign[static_cast<size_t>(t)])});
    }
    write_csv(dir + "/labels.csv", labels);

    const int n = out.rep.num_atoms();
    std::vector<std::vector<std::string>> lam;
    lam.reserve(static_cast<size_t>(n) + 1);
    std::vector<std::string> head = {"atom"};
    for (int c = 0; c < n; ++c) head.push_back("op_" + std::to_string(c));
    lam.push_back(head);
    for (int i = 0; i < n; ++i) {
      std::vector<std::string> row = {std::to_string(i)};
      for (int c = 0; c < n; ++c) row.push_back(std::to_string(out.rep.lambda(i, c)));
      lam.push_back(row);
    }
    write_csv(dir + "/lambda.csv", lam);

    std::vector<std::vector<std::string>> res;
    res.push_back({"operation", "combination", "value", "status"});
    for (int c = 0; c < rm.atoms; ++c) {
      for (long g = 0; g < rm.combos(); ++g) {
        const ResidualCell& cell = rm.at(c, g);
        res.push_back({std::to_string(c), std::to_string(g),
                       format_double(cell.value), to_string(cell.status)});
      }
    }
    write_csv(dir + "/residual.csv", res);

    write_activations_csv(dir + "/activations.csv", out.activations);
    write_text_file(dir + "/report.json", out.to_json_text());
  });

  return out;
}

std::vector<TauSweepRow> sweep_tau(const CentroidSet& kept, int base,
                                   const std::vector<double>& taus,
                                   const ResidualConfig& cfg) {
  if (taus.empty()) return {};
  for (double t : taus)
    if (!(t > 0.0)) throw std::invalid_argument("sweep_tau: thresholds must be positive");
  const double t_build = *std::max_element(taus.begin(), taus.end());
  ResidualMatrix rm = build_residual_matrix(kept, base, t_build, cfg);

  std::vector<TauSweepRow> rows;
  rows.reserve(taus.size());
  for (double t : taus) {
    Representation rep = greedy_select(rm, t);
    SourceCatalog cat = merge_configurations(rep, kept, cfg.search);
    TauSweepRow row;
    row.tau = t;
    row.sources = cat.num_sources();
    row.mean_residual =
        rep.residuals.size() ? rep.residuals.sum() /
                                   static_cast<double>(rep.residuals.size())
                             : 0.0;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace actrec
