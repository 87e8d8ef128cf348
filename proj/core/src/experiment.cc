//
// Copyright 2026 The dpfl-lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#include "dpfl/experiment.h"

#ifdef __GLIBC__
#include <malloc.h>
#endif

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "dpfl/checkpoint.h"
#include "dpfl/rng.h"
#include "parallel.h"

namespace dpfl {
namespace {

namespace fs = std::filesystem;

constexpr char kMetricsSchema[] = "# dpfl-metrics v1";
constexpr char kAttackRoundsSchema[] = "# dpfl-attack-rounds v1";
constexpr char kAttackSummarySchema[] = "# dpfl-attack-summary v1";
constexpr char kSummarySchema[] = "# dpfl-summary v1";
constexpr char kTrendsSchema[] = "# dpfl-trends v1";
constexpr char kProjectionSchema[] = "# dpfl-projection v1";
constexpr char kGapsSchema[] = "# dpfl-gaps v1";
constexpr char kPartitionSchema[] = "# dpfl-partition v1";

std::string Fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string Fmt(const std::optional<double>& x) { return x ? Fmt(*x) : std::string(); }

void WriteText(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw FormatError("cannot write '" + path.string() + "'");
    out << content;
    if (!out) throw FormatError("write failed for '" + path.string() + "'");
  }
  fs::rename(tmp, path);
}

std::string ReadText(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read '" + path.string() + "'");
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

std::string CheckpointName(int round) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "theta_%05d.ckpt", round);
  return buf;
}

std::string AttackRoundsCsv(const AttackReport& report) {
  std::ostringstream out;
  out << kAttackRoundsSchema << "\nround,auc,asr\n";
  for (std::size_t r = 0; r < report.per_round_auc.size(); ++r) {
    out << r + 1 << ',' << Fmt(report.per_round_auc[r]) << ',' << Fmt(report.per_round_asr[r])
        << '\n';
  }
  return out.str();
}

std::string AttackSummaryCsv(const AttackReport& report) {
  std::ostringstream out;
  out << kAttackSummarySchema << "\nbest_auc,best_auc_round,best_asr,best_asr_round\n"
      << Fmt(report.best_auc) << ',' << report.best_auc_round << ',' << Fmt(report.best_asr)
      << ',' << report.best_asr_round << '\n';
  return out.str();
}

// Data rows of a versioned CSV: skips the schema line and the header.
std::vector<std::vector<std::string>> CsvRows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(std::move(cells));
  }
  return rows;
}

AttackSplit MakeAttackSplit(const ExperimentConfig& config, const PreparedData& data) {
  return BuildAttackSplit(data.partition, config.attack.per_client, data.test,
                          config.attack.non_member_count,
                          DeriveSeed(config.federation.master_seed, "attack"));
}

std::string Unquote(const std::string& literal) {
  if (literal.size() >= 2 && literal.front() == '"' && literal.back() == '"') {
    return literal.substr(1, literal.size() - 2);
  }
  return literal;
}

std::string SanitizeName(std::string name) {
  for (char& c : name) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_' && c != '.') c = '_';
  }
  return name.empty() ? "dataset" : name;
}

std::string ProjectionCsv(const Matrix& projection) {
  std::ostringstream out;
  out << kProjectionSchema << "\nx0,x1\n";
  for (Index i = 0; i < projection.rows(); ++i) {
    out << Fmt(projection(i, 0)) << ',' << Fmt(projection(i, 1)) << '\n';
  }
  return out.str();
}

}  // namespace

void ConfigureAllocator() {
#ifdef __GLIBC__
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 512 << 20);
#endif
}

int ExitCodeFor(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ParameterError*>(&e)) {
    return kExitConfigError;
  }
  if (dynamic_cast<const TrainingError*>(&e)) return kExitTrainingFailure;
  if (dynamic_cast<const AuditError*>(&e)) return kExitAuditFailure;
  if (dynamic_cast<const FormatError*>(&e) || dynamic_cast<const fs::filesystem_error*>(&e)) {
    return kExitIoError;
  }
  return kExitUsage;
}

PreparedData PrepareData(const ExperimentConfig& config) {
  config.Validate();
  const auto& d = config.dataset;
  const std::uint64_t seed = config.federation.master_seed;

  std::optional<LabeledDataset> train_base, test_base;
  if (d.source == "mixture") {
    const LabeledDataset base = GenerateMixture(d.num_classes, d.dim, d.samples_per_class,
                                                d.separation, DeriveSeed(seed, "data"));
    auto [train, test] = TrainTestSplit(base, d.test_fraction, DeriveSeed(seed, "split"));
    train_base.emplace(std::move(train));
    test_base.emplace(std::move(test));
  } else {
    const LabeledDataset base = LoadIdx(d.images, d.labels);
    if (!d.test_images.empty()) {
      train_base.emplace(base);
      test_base.emplace(LoadIdx(d.test_images, d.test_labels));
    } else {
      auto [train, test] = TrainTestSplit(base, d.test_fraction, DeriveSeed(seed, "split"));
      train_base.emplace(std::move(train));
      test_base.emplace(std::move(test));
    }
  }

  const std::uint64_t shift_seed = DeriveSeed(seed, "shift");
  TransferPair pair = MakeTransferPair(*train_base, d.shift_kind, d.shift_magnitude, shift_seed);
  LabeledDataset test =
      MakeTransferPair(*test_base, d.shift_kind, d.shift_magnitude, shift_seed).target;

  ModelSpec spec;
  spec.kind = config.model.kind;
  spec.input_dim = static_cast<int>(pair.target.dim());
  spec.hidden_dims = config.model.hidden_dims;
  spec.num_classes = pair.target.num_classes();
  spec.Validate();

  ClientPartition partition =
      DirichletPartition(pair.target, config.federation.num_clients, config.federation.alpha,
                         DeriveSeed(seed, "partition"));
  return PreparedData{std::move(pair), std::move(test), std::move(partition), std::move(spec)};
}

fs::path OutputRoot() {
  const char* env = std::getenv("DPFL_OUTPUT_ROOT");
  return env != nullptr && *env != '\0' ? fs::path(env) : fs::path("runs");
}

fs::path ResolveExperimentDir(const ExperimentConfig& config) {
  if (config.output.directory.empty()) return OutputRoot() / ConfigHash(config);
  const fs::path dir(config.output.directory);
  return dir.is_absolute() ? dir : OutputRoot() / dir;
}

std::string MetricsCsv(const TrainingTrace& trace) {
  std::ostringstream out;
  out << kMetricsSchema << "\nround,acc,loss,kappa,cosine,sigma,lr\n";
  for (const auto& m : trace.metrics) {
    out << m.round << ',' << Fmt(m.test_accuracy) << ',' << Fmt(m.mean_loss) << ','
        << Fmt(m.kappa) << ',' << Fmt(m.update_cosine) << ',' << Fmt(m.sigma) << ','
        << Fmt(m.lr) << '\n';
  }
  return out.str();
}

RunResult CmdRun(const ExperimentConfig& config, const fs::path& directory) {
  config.Validate();
  if (fs::exists(directory / "DONE")) {
    throw ConfigError("experiment directory '" + directory.string() +
                      "' is already complete; choose another output.directory");
  }
  fs::create_directories(directory / "checkpoints");
  fs::remove(directory / "FAILED");
  WriteText(directory / "config.json", SerializeConfig(config));

  const PreparedData data = PrepareData(config);
  FederationConfig federation = config.federation;
  federation.retain_reports = config.attack.enabled || config.output.retain_gradients;

  RunResult result{Run(data.spec, data.pair, data.test, data.partition, federation,
                       config.privacy),
                   std::nullopt, directory};
  const TrainingTrace& trace = result.trace;

  WriteText(directory / "metrics.csv", MetricsCsv(trace));
  const int last = static_cast<int>(trace.snapshots.size()) - 1;
  for (int r = 0; r <= last; ++r) {
    const int every = config.output.checkpoint_interval;
    if (r == 0 || r == last || (every > 0 && r % every == 0)) {
      WriteCheckpoint(directory / "checkpoints" / CheckpointName(r), data.spec,
                      trace.snapshots[static_cast<std::size_t>(r)]);
    }
  }
  if (config.output.retain_gradients && !trace.reports.empty()) {
    WriteReportLog(directory / "reports.bin", trace);
  }
  if (trace.failure) {
    WriteText(directory / "FAILED", trace.failure->kind + " failure in round " +
                                        std::to_string(trace.failure->round) + ": " +
                                        trace.failure->message + "\n");
    throw TrainingError(trace.failure->message);
  }

  if (config.attack.enabled) {
    try {
      const AttackSplit split = MakeAttackSplit(config, data);
      AuditOptions options;
      options.workers = config.federation.workers;
      result.attack = Audit(trace, split, data.pair.target, data.test, options);
    } catch (const Error& e) {
      WriteText(directory / "FAILED", std::string("audit failure: ") + e.what() + "\n");
      throw AuditError(e.what());
    }
    WriteText(directory / "attack_rounds.csv", AttackRoundsCsv(*result.attack));
    WriteText(directory / "attack_summary.csv", AttackSummaryCsv(*result.attack));
  }
  WriteText(directory / "DONE", "");
  return result;
}

std::vector<SweepCell> ExpandSweep(const SweepSpec& spec) {
  std::vector<SweepCell> cells;
  std::vector<std::size_t> idx(spec.axes.size(), 0);
  for (;;) {
    for (std::uint64_t seed : spec.seeds) {
      std::string text = spec.base_json;
      SweepCell cell{spec.base, {}, {}};
      for (std::size_t a = 0; a < spec.axes.size(); ++a) {
        const std::string& value = spec.axes[a].values[idx[a]];
        text = ApplyOverride(text, spec.axes[a].path, value);
        cell.axes[spec.axes[a].path] = Unquote(value);
      }
      text = ApplyOverride(text, "federation.master_seed", std::to_string(seed));
      cell.axes["seed"] = std::to_string(seed);
      cell.config = ParseConfig(text);
      cell.hash = ConfigHash(cell.config);
      cells.push_back(std::move(cell));
    }
    std::size_t a = 0;
    for (; a < idx.size(); ++a) {
      if (++idx[a] < spec.axes[a].values.size()) break;
      idx[a] = 0;
    }
    if (a == idx.size()) break;
  }
  if (cells.size() > static_cast<std::size_t>(spec.max_cells)) {
    throw ConfigError("sweep expands to " + std::to_string(cells.size()) +
                      " cells, above max_cells");
  }
  return cells;
}

SweepResult CmdSweep(const SweepSpec& spec, const fs::path& directory) {
  SweepResult result;
  result.cells = ExpandSweep(spec);
  const std::size_t n = result.cells.size();
  result.ran.assign(n, false);
  result.failed.assign(n, false);
  fs::create_directories(directory / "cells");

  std::vector<char> ran(n, 0), failed(n, 0);
  internal::ParallelFor(n, spec.workers, [&](std::size_t i) {
    SweepCell& cell = result.cells[i];
    const fs::path cell_dir = directory / "cells" / cell.hash;
    if (fs::exists(cell_dir / "DONE")) return;
    if (fs::exists(cell_dir)) fs::remove_all(cell_dir);
    cell.config.output.directory = cell_dir.string();
    ran[i] = 1;
    try {
      CmdRun(cell.config, cell_dir);
    } catch (const std::exception&) {
      failed[i] = 1;
      if (!fs::exists(cell_dir / "FAILED")) {
        fs::create_directories(cell_dir);
        WriteText(cell_dir / "FAILED", "failed before training\n");
      }
    }
  });

  std::string strategy_path = "federation.strategy";
  std::vector<SummaryEntry> entries;
  for (std::size_t i = 0; i < n; ++i) {
    const SweepCell& cell = result.cells[i];
    const fs::path cell_dir = directory / "cells" / cell.hash;
    result.ran[i] = ran[i] != 0;
    result.failed[i] = !fs::exists(cell_dir / "DONE");
    SummaryEntry e{};
    e.axes = cell.axes;
    e.axes.erase(strategy_path);
    e.strategy = cell.config.federation.strategy;
    e.failed = result.failed[i];
    if (!e.failed) {
      for (const auto& row : CsvRows(ReadText(cell_dir / "metrics.csv"))) {
        e.best_accuracy = std::max(e.best_accuracy, std::stod(row.at(1)));
      }
      if (fs::exists(cell_dir / "attack_summary.csv")) {
        const auto rows = CsvRows(ReadText(cell_dir / "attack_summary.csv"));
        if (!rows.empty()) {
          e.best_auc = std::stod(rows[0].at(0));
          e.best_asr = std::stod(rows[0].at(2));
        }
      }
    }
    entries.push_back(std::move(e));
  }
  result.summary = Summarize(entries);

  // summary.csv
  std::vector<std::string> axis_names;
  if (!result.summary.empty()) {
    for (const auto& [name, value] : result.summary.front().axes) axis_names.push_back(name);
  }
  const std::vector<std::string> strategies = {"ST", "FT", "HT"};
  {
    std::ostringstream out;
    out << kSummarySchema << '\n';
    for (const auto& name : axis_names) out << name << ',';
    for (const auto& s : strategies) out << "best_acc_" << s << ',';
    out << "delta_ht_ft,rel_increase_ft,rel_increase_ht,ordering";
    for (const auto& s : strategies) out << ",best_auc_" << s << ",best_asr_" << s;
    out << ",failed\n";
    for (const auto& row : result.summary) {
      for (const auto& name : axis_names) out << row.axes.at(name) << ',';
      std::string failed_list;
      for (const auto& s : strategies) {
        auto it = row.by_strategy.find(s);
        if (it != row.by_strategy.end() && !it->second.failed) out << Fmt(it->second.best_accuracy);
        if (it != row.by_strategy.end() && it->second.failed) failed_list += failed_list.empty() ? s : ";" + s;
        out << ',';
      }
      out << Fmt(row.delta_ht_ft) << ',' << Fmt(row.rel_increase_ft) << ','
          << Fmt(row.rel_increase_ht) << ',' << row.ordering;
      for (const auto& s : strategies) {
        auto it = row.by_strategy.find(s);
        const bool have = it != row.by_strategy.end() && !it->second.failed;
        out << ',' << (have ? Fmt(it->second.best_auc) : "") << ','
            << (have ? Fmt(it->second.best_asr) : "");
      }
      out << ',' << failed_list << '\n';
    }
    WriteText(directory / "summary.csv", out.str());
  }

  // trends.csv: seed-averaged best accuracy along every numeric axis.
  {
    std::ostringstream out;
    out << kTrendsSchema << "\naxis,group,strategy,axis_values,mean_best_acc,trend\n";
    for (const auto& axis : spec.axes) {
      if (axis.path == strategy_path) continue;
      bool numeric = true;
      for (const auto& v : axis.values) {
        char* end = nullptr;
        std::strtod(v.c_str(), &end);
        numeric = numeric && end != v.c_str() && *end == '\0';
      }
      if (!numeric) continue;
      // group key -> strategy -> axis value -> (sum, count)
      std::map<std::string, std::map<std::string, std::map<double, std::pair<double, int>>>> acc;
      for (const auto& e : entries) {
        if (e.failed) continue;
        std::string group;
        for (const auto& [name, value] : e.axes) {
          if (name == axis.path || name == "seed") continue;
          group += (group.empty() ? "" : ";") + name + "=" + value;
        }
        auto& cell = acc[group][ToString(e.strategy)][std::stod(e.axes.at(axis.path))];
        cell.first += e.best_accuracy;
        cell.second += 1;
      }
      for (const auto& [group, by_strategy] : acc) {
        for (const auto& [strategy, series] : by_strategy) {
          std::string xs, ys;
          std::vector<double> means;
          for (const auto& [x, sc] : series) {
            means.push_back(sc.first / sc.second);
            xs += (xs.empty() ? "" : " ") + Fmt(x);
            ys += (ys.empty() ? "" : " ") + Fmt(means.back());
          }
          bool up = true, down = true, strict_up = true, strict_down = true;
          for (std::size_t k = 1; k < means.size(); ++k) {
            up = up && means[k] >= means[k - 1];
            down = down && means[k] <= means[k - 1];
            strict_up = strict_up && means[k] > means[k - 1];
            strict_down = strict_down && means[k] < means[k - 1];
          }
          const char* trend = means.size() < 2 ? "single"
                              : up && down     ? "flat"
                              : strict_up      ? "increasing"
                              : strict_down    ? "decreasing"
                              : up             ? "nondecreasing"
                              : down           ? "nonincreasing"
                                               : "mixed";
          out << axis.path << ',' << group << ',' << strategy << ',' << xs << ',' << ys << ','
              << trend << '\n';
        }
      }
    }
    WriteText(directory / "trends.csv", out.str());
  }
  return result;
}

AttackReport CmdAudit(const fs::path& requested, const AuditCommandOptions& options) {
  // Relative names resolve like `run -o`: under the output root, unless the
  // path already exists as given.
  fs::path directory = requested;
  if (directory.is_relative() && !fs::exists(directory)) directory = OutputRoot() / directory;
  if (!fs::exists(directory / "config.json")) {
    throw AuditError("'" + directory.string() + "' is not an experiment directory");
  }
  if (!fs::exists(directory / "reports.bin")) {
    throw AuditError("'" + directory.string() +
                     "' has no gradient-report log (reports.bin); rerun the experiment with "
                     "output.retain_gradients=true");
  }
  const ExperimentConfig config = ParseConfigFile(directory / "config.json");
  const PreparedData data = PrepareData(config);
  const ReportLog log = ReadReportLog(directory / "reports.bin");
  const Checkpoint start = ReadCheckpoint(directory / "checkpoints" / CheckpointName(0));
  if (!(start.spec == data.spec)) throw AuditError("checkpoint model does not match config");

  TrainingTrace trace;
  trace.spec = data.spec;
  trace.strategy = log.strategy;
  trace.snapshots.push_back(start.params);
  trace.learning_rates = log.learning_rates;
  trace.reports = log.reports;
  for (std::size_t r = 0; r < log.reports.size(); ++r) {
    trace.snapshots.push_back(ApplyUpdate(trace.snapshots.back(), Aggregate(log.reports[r]),
                                          log.learning_rates[r], log.strategy));
    RoundMetrics m;
    m.round = static_cast<int>(r + 1);
    trace.metrics.push_back(m);
  }
  const fs::path last = directory / "checkpoints" / CheckpointName(static_cast<int>(log.reports.size()));
  if (fs::exists(last) && !(ReadCheckpoint(last).params == trace.final_params())) {
    throw AuditError("replayed trajectory does not match the stored final checkpoint");
  }

  AuditOptions audit_options;
  audit_options.shuffle_ground_truth_seed = options.null_seed;
  audit_options.workers = options.workers;
  const AttackReport report =
      Audit(trace, MakeAttackSplit(config, data), data.pair.target, data.test, audit_options);
  const std::string prefix = options.null_seed ? "null_attack_" : "attack_";
  WriteText(directory / (prefix + "rounds.csv"), AttackRoundsCsv(report));
  WriteText(directory / (prefix + "summary.csv"), AttackSummaryCsv(report));
  return report;
}

std::vector<GapPoint> CmdDomainGap(const ExperimentConfig& config,
                                   const std::vector<double>& magnitudes,
                                   const fs::path& directory) {
  if (magnitudes.empty()) throw ParameterError("domain-gap: no magnitudes given");
  fs::create_directories(directory);
  std::vector<GapPoint> points;
  std::ostringstream gaps;
  gaps << kGapsSchema << "\nmagnitude,gap\n";
  for (std::size_t i = 0; i < magnitudes.size(); ++i) {
    ExperimentConfig c = config;
    c.dataset.shift_magnitude = magnitudes[i];
    const PreparedData data = PrepareData(c);
    const std::vector<LabeledDataset> sets = {data.pair.source, data.pair.target};
    const DomainGap gap = LdaProject(sets);
    const std::string stem = "projection_" + std::to_string(i);
    WriteText(directory / (stem + "_source.csv"), ProjectionCsv(gap.projections[0]));
    WriteText(directory / (stem + "_target.csv"), ProjectionCsv(gap.projections[1]));
    points.push_back({magnitudes[i], gap.gap_statistic});
    gaps << Fmt(magnitudes[i]) << ',' << Fmt(gap.gap_statistic) << '\n';
  }
  WriteText(directory / "gaps.csv", gaps.str());
  return points;
}

DomainGap CmdDomainGapDatasets(const std::vector<LabeledDataset>& datasets,
                               const fs::path& directory) {
  const DomainGap gap = LdaProject(datasets);
  fs::create_directories(directory);
  std::ostringstream table;
  table << kGapsSchema << "\ndataset_a,dataset_b,gap\n";
  for (std::size_t a = 0; a < datasets.size(); ++a) {
    WriteText(directory / ("projection_" + std::to_string(a) + "_" +
                           SanitizeName(datasets[a].name()) + ".csv"),
              ProjectionCsv(gap.projections[a]));
    for (std::size_t b = a + 1; b < datasets.size(); ++b) {
      table << datasets[a].name() << ',' << datasets[b].name() << ','
            << Fmt(gap.pairwise_gaps(static_cast<Index>(a), static_cast<Index>(b))) << '\n';
    }
  }
  WriteText(directory / "gaps.csv", table.str());
  return gap;
}

void CmdPartitionInspect(const ExperimentConfig& config, std::ostream& out) {
  const PreparedData data = PrepareData(config);
  const auto& train = data.pair.target;
  out << kPartitionSchema << "\nclient,size,weight";
  for (int k = 0; k < train.num_classes(); ++k) out << ",class_" << k;
  out << '\n';
  const double total = static_cast<double>(data.partition.total());
  for (std::size_t n = 0; n < data.partition.num_clients(); ++n) {
    std::vector<int> counts(static_cast<std::size_t>(train.num_classes()), 0);
    for (Index i : data.partition.assignments[n]) {
      ++counts[static_cast<std::size_t>(train.labels()[static_cast<std::size_t>(i)])];
    }
    out << n << ',' << data.partition.client_size(n) << ','
        << Fmt(static_cast<double>(data.partition.client_size(n)) / total);
    for (int c : counts) out << ',' << c;
    out << '\n';
  }
  out << "# class-proportion deviation: " << Fmt(ClassProportionDeviation(train, data.partition))
      << '\n';
}

}  // namespace dpfl
