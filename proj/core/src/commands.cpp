#include "countlab/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>

#include "countlab/analysis.hpp"
#include "countlab/checkpoint.hpp"
#include "countlab/dataset_io.hpp"
#include "countlab/errors.hpp"
#include "countlab/evaluation.hpp"
#include "countlab/file_util.hpp"
#include "countlab/parallel.hpp"
#include "countlab/random.hpp"

namespace countlab::commands {

namespace fs = std::filesystem;
using cells::CellKind;
using cells::ParamSet;
using dyck::SplitName;

namespace {

std::string file_stem(SplitName name) {
  auto s = dyck::to_string(name);
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return s;
}

fs::path split_path(const ExperimentConfig& c, SplitName name) {
  return c.data_dir() / (file_stem(name) + ".txt");
}

// Minimal CSV table: header plus rows of string cells (no quoting needed for
// the values this tool writes).
struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t col(const std::string& name) const {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError("CSV is missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  }
};

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

Csv read_csv(const fs::path& path) {
  if (!fs::exists(path)) throw DataError("missing report file " + path.string());
  std::istringstream in(read_file(path));
  Csv csv;
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty CSV " + path.string());
  csv.header = split_line(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto row = split_line(line);
    if (row.size() != csv.header.size()) throw DataError("ragged row in " + path.string());
    csv.rows.push_back(std::move(row));
  }
  return csv;
}

class CsvWriter {
 public:
  explicit CsvWriter(std::initializer_list<std::string_view> header) {
    bool first = true;
    for (auto h : header) {
      if (!first) out_ << ',';
      out_ << h;
      first = false;
    }
    out_ << '\n';
  }
  template <typename... Ts>
  void row(const Ts&... cells) {
    bool first = true;
    ((write_cell(cells, first)), ...);
    out_ << '\n';
  }
  std::string str() const { return out_.str(); }

 private:
  template <typename T>
  void write_cell(const T& v, bool& first) {
    if (!first) out_ << ',';
    first = false;
    if constexpr (std::is_floating_point_v<T>) {
      out_ << format_double(v);
    } else {
      out_ << v;
    }
  }
  std::ostringstream out_;
};

fs::path summary_path(const ExperimentConfig& c, CellKind kind) {
  return c.runs_dir(kind) / "summary.csv";
}

std::vector<std::string> selected_runs(const ExperimentConfig& c, CellKind kind) {
  const auto path = summary_path(c, kind);
  if (!fs::exists(path)) {
    throw DataError("no trained runs for " + cells::to_string(kind) + "; expected " +
                    path.string() + " (run `countlab train` first)");
  }
  const auto csv = read_csv(path);
  const auto id_col = csv.col("runId");
  const auto sel_col = csv.col("selected");
  std::vector<std::pair<int, std::string>> ranked;
  for (const auto& r : csv.rows) {
    const int rank = std::stoi(r[sel_col]);
    if (rank > 0) ranked.emplace_back(rank, r[id_col]);
  }
  std::sort(ranked.begin(), ranked.end());
  std::vector<std::string> out;
  for (auto& [rank, id] : ranked) out.push_back(id);
  if (out.empty()) throw DataError("no usable runs listed in " + path.string());
  return out;
}

struct Model {
  std::string kind_label;
  std::string run_id;
  int epoch = 0;
  bool is_best = false;
  bool at_checkpoint = false;  // epoch is one of the pooled checkpoint epochs
  ParamSet params;
};

std::vector<Model> load_models(const ExperimentConfig& c, CellKind kind, bool include_best) {
  const auto epochs = c.campaign(kind).train.effective_checkpoint_epochs();
  std::vector<Model> models;
  std::vector<std::string> missing;
  for (const auto& id : selected_runs(c, kind)) {
    const auto dir = c.runs_dir(kind) / id;
    for (int e : epochs) {
      const auto p = training::epoch_checkpoint_path(dir, e);
      if (!fs::exists(p)) {
        missing.push_back(p.string());
        continue;
      }
      models.push_back({cells::to_string(kind), id, e, false, true, training::load_checkpoint(p).params});
    }
    if (!include_best) continue;
    const auto bp = training::best_checkpoint_path(dir);
    if (!fs::exists(bp)) {
      missing.push_back(bp.string());
      continue;
    }
    auto best = training::load_checkpoint(bp);
    auto it = std::find_if(models.begin(), models.end(), [&](const Model& m) {
      return m.run_id == id && m.epoch == best.epoch;
    });
    if (it != models.end()) {
      it->is_best = true;
    } else {
      models.push_back({cells::to_string(kind), id, best.epoch, true, false, std::move(best.params)});
    }
  }
  if (!missing.empty()) {
    std::string msg = "missing checkpoints:";
    for (const auto& m : missing) msg += "\n  " + m;
    throw DataError(msg);
  }
  return models;
}

Model oracle_model() {
  return {"oracle", "oracle", 0, true, true, cells::make_relu_counter({1.0, 0.0})};
}

std::string fpf_cell(const evaluation::FpfRecord& r) {
  return r.fpf ? std::to_string(*r.fpf) : std::string("none");
}

}  // namespace

dyck::DatasetSplit load_generated(const ExperimentConfig& config, SplitName name) {
  const auto path = split_path(config, name);
  if (!fs::exists(path))
    throw DataError("missing dataset " + path.string() + " (run `countlab generate` first)");
  try {
    return dyck::load_split(path, name);
  } catch (const ParseError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void cmd_generate(const ExperimentConfig& c, std::ostream& log) {
  c.validate();
  std::vector<dyck::DatasetSplit> splits;
  dyck::WordSet seen;
  for (auto name : {SplitName::Train, SplitName::Validation, SplitName::Long, SplitName::VeryLong}) {
    const auto spec = c.split_spec(name);
    auto split = dyck::generate_split(name, spec, seen);
    for (const auto& w : split.words) seen.insert(w.str());
    dyck::SplitManifest m{dyck::to_string(name), spec.count, spec.min_len, spec.max_len,
                          spec.pcfg_p, spec.pcfg_q, spec.seed, file_stem(name) + ".txt"};
    dyck::save_split(split_path(c, name), split);
    write_file_atomic(c.data_dir() / (file_stem(name) + ".manifest.json"), dyck::manifest_to_json(m));
    log << "generated " << std::setw(10) << std::left << dyck::to_string(name) << ' '
        << split.words.size() << " words, lengths " << spec.min_len << ".." << spec.max_len << '\n';
  }
  const auto zz = dyck::zigzag_split(c.zigzag_js, c.zigzag_len);
  dyck::SplitManifest m{"ZIGZAG", zz.words.size(), c.zigzag_len, c.zigzag_len, 0.0, 0.0, 0, "zigzag.txt"};
  dyck::save_split(split_path(c, SplitName::Zigzag), zz);
  write_file_atomic(c.data_dir() / "zigzag.manifest.json", dyck::manifest_to_json(m));
  log << "generated ZIGZAG     " << zz.words.size() << " words, length " << c.zigzag_len << '\n';
}

std::vector<CampaignResult> cmd_train(const ExperimentConfig& c, std::ostream& log) {
  c.validate();
  const auto train = load_generated(c, SplitName::Train);
  const auto val = load_generated(c, SplitName::Validation);
  std::vector<CampaignResult> results;
  std::mutex log_mu;

  for (CellKind kind : c.kinds) {
    const auto& camp = c.campaign(kind);
    CampaignResult res{kind, std::vector<training::RunRecord>(camp.runs), {}};
    parallel_for(camp.runs, c.jobs, [&](std::size_t r) {
      auto cfg = camp.train;
      cfg.seed = c.run_seed(kind, r);
      training::RunOptions opts;
      opts.run_id = experiment::run_id(kind, r);
      opts.run_dir = c.runs_dir(kind) / opts.run_id;
      opts.resume = true;
      res.runs[r] = training::train_run(cfg, train, val, opts);
      std::lock_guard lock(log_mu);
      const auto& rec = res.runs[r];
      log << "trained " << rec.run_id;
      if (rec.failed) {
        log << "  FAILED: " << rec.failure << '\n';
      } else {
        log << "  best epoch " << rec.best_epoch << "  val loss " << rec.best_val_loss << '\n';
      }
    });

    const auto best = training::select_best_runs(res.runs, camp.select);
    for (const auto& b : best) res.selected.push_back(b.run_id);

    CsvWriter csv({"runId", "seed", "bestEpoch", "bestValLoss", "failed", "selected"});
    for (const auto& rec : res.runs) {
      auto it = std::find(res.selected.begin(), res.selected.end(), rec.run_id);
      const int rank = it == res.selected.end() ? 0 : static_cast<int>(it - res.selected.begin()) + 1;
      csv.row(rec.run_id, rec.seed, rec.best_epoch, rec.best_val_loss, rec.failed ? 1 : 0, rank);
    }
    write_file_atomic(summary_path(c, kind), csv.str());

    log << "\n" << cells::to_string(kind) << ": selected " << res.selected.size() << " of "
        << camp.runs << " runs\n";
    log << "  rank  runId      bestEpoch  bestValLoss\n";
    for (std::size_t i = 0; i < best.size(); ++i) {
      log << "  " << std::setw(4) << i + 1 << "  " << std::setw(9) << std::left << best[i].run_id
          << std::right << "  " << std::setw(9) << best[i].best_epoch << "  "
          << std::setprecision(6) << best[i].best_val_loss << '\n';
    }
    const auto failed = std::count_if(res.runs.begin(), res.runs.end(),
                                      [](const auto& r) { return r.failed; });
    if (failed > 0) log << "  " << failed << " run(s) failed with non-finite values\n";
    log << '\n';
    results.push_back(std::move(res));
  }
  return results;
}

void cmd_eval(const ExperimentConfig& c, std::ostream& log, bool oracle) {
  c.validate();
  const SplitName split_names[] = {SplitName::Train, SplitName::Validation, SplitName::Long,
                                   SplitName::VeryLong};
  std::vector<dyck::DatasetSplit> splits;
  for (auto n : split_names) splits.push_back(load_generated(c, n));
  const auto& very_long = splits[3];

  std::vector<Model> models;
  if (oracle) {
    models.push_back(oracle_model());
  } else {
    for (CellKind kind : c.kinds) {
      auto m = load_models(c, kind, true);
      std::move(m.begin(), m.end(), std::back_inserter(models));
    }
  }

  struct Result {
    std::vector<evaluation::EvalReport> reports;
    std::vector<evaluation::FpfRecord> fpf;
    std::vector<evaluation::GateSaturation> saturation;
  };
  std::vector<Result> results(models.size());
  parallel_for(models.size(), c.jobs, [&](std::size_t i) {
    auto& r = results[i];
    for (const auto& s : splits) r.reports.push_back(evaluation::evaluate_split(models[i].params, s));
    r.fpf = evaluation::fpf_records(models[i].params, very_long);
    if (models[i].is_best)
      r.saturation = evaluation::saturation_report(models[i].params, splits[1], c.saturation_delta);
  });

  CsvWriter eval_csv({"runId", "kind", "epoch", "split", "meanLoss", "seqAccuracy"});
  CsvWriter fpf_csv({"runId", "kind", "epoch", "sequenceId", "length", "fpf", "censored"});
  CsvWriter sat_csv({"runId", "gate", "min", "mean", "max", "fracSaturated"});
  for (std::size_t i = 0; i < models.size(); ++i) {
    const auto& m = models[i];
    for (const auto& rep : results[i].reports)
      eval_csv.row(m.run_id, m.kind_label, m.epoch, dyck::to_string(rep.split), rep.mean_loss,
                   rep.sequence_accuracy);
    for (const auto& f : results[i].fpf)
      fpf_csv.row(m.run_id, m.kind_label, m.epoch, f.sequence_id, f.length, fpf_cell(f),
                  f.censored() ? 1 : 0);
    for (const auto& g : results[i].saturation)
      sat_csv.row(m.run_id, g.gate, g.min, g.mean, g.max, g.frac_saturated);
  }

  // Overview: best checkpoint of each selected run.
  CsvWriter table({"kind", "column", "mean", "min", "max", "none"});
  log << std::fixed << std::setprecision(1);
  log << std::left << std::setw(8) << "model";
  for (const char* h : {"Training", "Validation", "Long"}) log << std::setw(24) << h;
  log << "Very Long (FPF)\n" << std::right;
  std::vector<std::string> labels;
  for (const auto& m : models)
    if (std::find(labels.begin(), labels.end(), m.kind_label) == labels.end()) labels.push_back(m.kind_label);
  for (const auto& label : labels) {
    std::vector<std::vector<double>> acc(3);
    std::vector<std::vector<evaluation::FpfRecord>> fpfs;
    for (std::size_t i = 0; i < models.size(); ++i) {
      if (models[i].kind_label != label || !models[i].is_best) continue;
      for (int s = 0; s < 3; ++s) acc[s].push_back(results[i].reports[s].sequence_accuracy);
      fpfs.push_back(results[i].fpf);
    }
    log << std::setw(8) << std::left << label << std::right;
    const char* cols[] = {"TRAIN", "VALIDATION", "LONG"};
    for (int s = 0; s < 3; ++s) {
      const auto sm = evaluation::summarize(acc[s]);
      table.row(label, cols[s], sm.mean, sm.min, sm.max, 0);
      std::ostringstream cell;
      cell << std::fixed << std::setprecision(1) << sm.mean << " (" << sm.min << " / " << sm.max << ")";
      log << std::setw(24) << std::left << cell.str() << std::right;
    }
    const auto agg = evaluation::fpf_aggregate(fpfs);
    table.row(label, "VERYLONG_FPF", agg.summary.mean, agg.summary.min, agg.summary.max,
              agg.any_none ? 1 : 0);
    log << agg.summary.mean << " (" << agg.summary.min << " / ";
    if (agg.any_none) {
      log << "none";
    } else {
      log << agg.summary.max;
    }
    log << ")\n";
  }
  log << std::defaultfloat;

  write_file_atomic(c.reports_dir() / "eval.csv", eval_csv.str());
  write_file_atomic(c.reports_dir() / "fpf.csv", fpf_csv.str());
  write_file_atomic(c.reports_dir() / "saturation.csv", sat_csv.str());
  write_file_atomic(c.reports_dir() / "overview.csv", table.str());
}

void cmd_zigzag(const ExperimentConfig& c, std::ostream& log, bool oracle) {
  c.validate();
  const auto zz = load_generated(c, SplitName::Zigzag);
  if (zz.words.size() != c.zigzag_js.size())
    throw DataError("zigzag.txt does not match the configured js; rerun `countlab generate`");

  std::vector<Model> models;
  if (oracle) {
    models.push_back(oracle_model());
  } else {
    for (CellKind kind : c.kinds) {
      auto m = load_models(c, kind, true);
      std::move(m.begin(), m.end(), std::back_inserter(models));
    }
  }

  std::vector<std::vector<evaluation::FpfRecord>> fpf(models.size());
  parallel_for(models.size(), c.jobs,
               [&](std::size_t i) { fpf[i] = evaluation::fpf_records(models[i].params, zz); });

  CsvWriter fpf_csv({"runId", "kind", "epoch", "j", "length", "fpf", "censored"});
  for (std::size_t i = 0; i < models.size(); ++i) {
    if (!models[i].at_checkpoint) continue;
    for (const auto& f : fpf[i])
      fpf_csv.row(models[i].run_id, models[i].kind_label, models[i].epoch,
                  c.zigzag_js[f.sequence_id], f.length, fpf_cell(f), f.censored() ? 1 : 0);
  }

  CsvWriter hist_csv({"kind", "j", "binStart", "binEnd", "count", "censoredCount"});
  CsvWriter delta_csv({"runId", "token", "bucket", "count", "meanDelta", "stdDelta"});
  const std::size_t delta_index =
      std::find(c.zigzag_js.begin(), c.zigzag_js.end(), c.delta_j) - c.zigzag_js.begin();
  std::vector<std::string> labels;
  for (const auto& m : models)
    if (std::find(labels.begin(), labels.end(), m.kind_label) == labels.end()) labels.push_back(m.kind_label);

  for (const auto& label : labels) {
    for (std::size_t wi = 0; wi < c.zigzag_js.size(); ++wi) {
      std::vector<evaluation::FpfRecord> recs;
      for (std::size_t i = 0; i < models.size(); ++i)
        if (models[i].kind_label == label && models[i].at_checkpoint) recs.push_back(fpf[i][wi]);
      const auto h = analysis::fpf_histogram(recs, {c.histogram_bin_width, 0, c.zigzag_len + c.histogram_bin_width});
      for (const auto& b : h.bins)
        hist_csv.row(label, c.zigzag_js[wi], b.start, b.end, b.count, h.censored);
      if (c.zigzag_js[wi] == c.delta_j) {
        std::vector<double> fails;
        for (const auto& r : recs)
          if (r.fpf) fails.push_back(static_cast<double>(*r.fpf));
        log << label << " zigzag j=" << c.delta_j << ": " << recs.size() << " models, "
            << h.censored << " never fail";
        if (!fails.empty()) {
          std::sort(fails.begin(), fails.end());
          log << ", median FPF " << fails[fails.size() / 2];
        }
        log << '\n';
      }
    }
    // Best model of the kind: the first selected run's best checkpoint.
    for (const auto& m : models) {
      if (m.kind_label != label || !m.is_best) continue;
      for (const auto& d : evaluation::delta_profile(m.params, zz.words[delta_index], c.delta_bucket_width))
        delta_csv.row(m.run_id, d.token == dyck::Token::Open ? "OPEN" : "CLOSE", d.bucket, d.count,
                      d.mean, d.stddev);
      break;
    }
  }

  write_file_atomic(c.reports_dir() / "zigzag_fpf.csv", fpf_csv.str());
  write_file_atomic(c.reports_dir() / "histogram.csv", hist_csv.str());
  write_file_atomic(c.reports_dir() / "deltas.csv", delta_csv.str());
}

void cmd_regress(const ExperimentConfig& c, std::ostream& log) {
  c.validate();
  const auto eval = read_csv(c.reports_dir() / "eval.csv");
  const auto fpf = read_csv(c.reports_dir() / "fpf.csv");

  // (kind, runId, epoch) -> mean FPF over the very long split
  std::map<std::tuple<std::string, std::string, int>, std::pair<double, std::size_t>> fpf_means;
  {
    const auto k = fpf.col("kind"), r = fpf.col("runId"), e = fpf.col("epoch");
    const auto len = fpf.col("length"), v = fpf.col("fpf");
    for (const auto& row : fpf.rows) {
      const double value = row[v] == "none" ? std::stod(row[len]) : std::stod(row[v]);
      auto& acc = fpf_means[{row[k], row[r], std::stoi(row[e])}];
      acc.first += value;
      ++acc.second;
    }
  }

  CsvWriter reg_csv({"kind", "splitUsedForLoss", "n", "slope", "intercept", "r2", "p"});
  CsvWriter scatter_csv({"kind", "runId", "epoch", "negLogLoss", "meanFpf"});
  const auto k = eval.col("kind"), r = eval.col("runId"), e = eval.col("epoch");
  const auto s = eval.col("split"), l = eval.col("meanLoss");

  log << "kind  split       n    slope        r2      p\n";
  for (CellKind kind : c.kinds) {
    const auto name = cells::to_string(kind);
    const auto epochs = c.campaign(kind).train.effective_checkpoint_epochs();
    for (const std::string split : {"TRAIN", "VALIDATION", "LONG"}) {
      std::vector<double> xs, ys;
      for (const auto& row : eval.rows) {
        if (row[k] != name || row[s] != split) continue;
        const int epoch = std::stoi(row[e]);
        if (!std::binary_search(epochs.begin(), epochs.end(), epoch)) continue;
        auto it = fpf_means.find({row[k], row[r], epoch});
        if (it == fpf_means.end()) continue;
        xs.push_back(analysis::neg_log_loss(std::stod(row[l])));
        ys.push_back(it->second.first / static_cast<double>(it->second.second));
        if (split == "VALIDATION") scatter_csv.row(name, row[r], epoch, xs.back(), ys.back());
      }
      if (xs.size() < 3) {
        throw DataError("insufficient data for " + name + "/" + split + " regression: " +
                        std::to_string(xs.size()) + " checkpoint(s), need at least 3");
      }
      const auto res = analysis::ols(xs, ys);
      reg_csv.row(name, split, res.n, res.slope, res.intercept, res.r2, res.p);
      log << std::setw(4) << std::left << name << "  " << std::setw(10) << split << std::right
          << std::setw(3) << res.n << "  " << std::setw(10) << std::setprecision(4) << res.slope
          << "  " << std::setw(6) << std::setprecision(3) << res.r2 << "  " << std::setprecision(3)
          << res.p << '\n';
    }
  }
  write_file_atomic(c.reports_dir() / "regress.csv", reg_csv.str());
  write_file_atomic(c.reports_dir() / "scatter.csv", scatter_csv.str());
}

bool GradcheckReport::passed() const {
  return std::all_of(entries.begin(), entries.end(),
                     [&](const GradcheckEntry& e) { return e.max_rel_error <= tolerance; });
}

double GradcheckReport::worst(CellKind kind) const {
  double w = 0.0;
  for (const auto& e : entries)
    if (e.kind == kind) w = std::max(w, e.max_rel_error);
  return w;
}

GradcheckReport cmd_gradcheck(std::ostream& log, const training::GradFn& grad,
                              std::size_t instances_per_kind) {
  GradcheckReport report;
  constexpr double kStep = 1e-5;
  for (CellKind kind : {CellKind::Lstm, CellKind::Gru, CellKind::Relu}) {
    for (std::size_t i = 0; i < instances_per_kind; ++i) {
      Rng rng(derive_seed(0xC0FFEE, static_cast<std::uint64_t>(kind) * 1000 + i));
      const int hidden = 1 + static_cast<int>(i % 2);
      const auto act = (kind == CellKind::Lstm && i % 4 >= 2) ? cells::OutputActivation::Identity
                                                              : cells::OutputActivation::Tanh;
      ParamSet params(kind, hidden, act);
      for (double& v : params.values()) v = rng.uniform(-1.0, 1.0);
      const auto word = dyck::generate_word({1, 2, 12, 0.5, 0.25, 0}, rng);
      const auto targets = dyck::next_targets(word);
      const double err = training::fd_check(params, word.tokens(), targets, kStep,
                                            training::LossKind::Mse, grad);
      report.entries.push_back({kind, hidden, word.size(), err});
    }
  }
  log << "kind  instances  max rel. error  (tolerance " << report.tolerance << ")\n";
  for (CellKind kind : {CellKind::Lstm, CellKind::Gru, CellKind::Relu}) {
    log << std::setw(4) << std::left << cells::to_string(kind) << std::right << "  "
        << std::setw(9) << instances_per_kind << "  " << std::setw(14) << std::scientific
        << std::setprecision(3) << report.worst(kind) << std::defaultfloat << "  "
        << (report.worst(kind) <= report.tolerance ? "ok" : "FAIL") << '\n';
  }
  for (int H : {1, 2}) {
    double w = 0.0;
    for (const auto& e : report.entries)
      if (e.hidden == H) w = std::max(w, e.max_rel_error);
    log << "H=" << H << " worst " << std::scientific << std::setprecision(3) << w
        << std::defaultfloat << '\n';
  }
  return report;
}

}  // namespace countlab::commands
