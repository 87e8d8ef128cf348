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

// Command-line front-end: run, sweep, audit, domain-gap, partition-inspect.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dpfl/data.h"
#include "dpfl/experiment.h"

namespace {

namespace fs = std::filesystem;

dpfl::ExperimentConfig LoadConfig(const std::string& path,
                                  const std::vector<std::string>& overrides) {
  return path.empty() ? dpfl::ParseConfig("{}", overrides)
                      : dpfl::ParseConfigFile(path, overrides);
}

void PrintRunSummary(const dpfl::RunResult& result) {
  const auto& trace = result.trace;
  std::cout << "directory: " << result.directory.string() << '\n'
            << "strategy: " << dpfl::ToString(trace.strategy) << "  sigma: " << trace.sigma
            << "  rounds: " << trace.rounds_completed() << '\n'
            << "best accuracy: " << trace.best_accuracy() << "  final accuracy: "
            << (trace.metrics.empty() ? 0.0 : trace.metrics.back().test_accuracy) << '\n';
  if (result.attack) {
    std::cout << "best MIA AUC: " << result.attack->best_auc << " (round "
              << result.attack->best_auc_round << ")  best SIA ASR: " << result.attack->best_asr
              << " (round " << result.attack->best_asr_round << ")\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  dpfl::ConfigureAllocator();
  CLI::App app{"dpfl: differentially private federated learning laboratory"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;

  auto* run = app.add_subcommand("run", "Run one experiment");
  run->add_option("-c,--config", config_path, "JSON experiment config");
  run->add_option("-s,--set", overrides, "Override a config key, e.g. privacy.epsilon=1");
  run->add_option("-o,--out", out_dir, "Experiment directory (default: output.directory)");

  std::string sweep_path;
  int sweep_workers = 0;
  auto* sweep = app.add_subcommand("sweep", "Run a grid of experiments and summarize");
  sweep->add_option("spec", sweep_path, "JSON sweep spec")->required();
  sweep->add_option("-o,--out", out_dir, "Sweep directory");
  sweep->add_option("-j,--workers", sweep_workers, "Concurrent cells (overrides the spec)");

  std::string audit_dir;
  std::optional<std::uint64_t> null_seed;
  int audit_workers = 1;
  auto* audit = app.add_subcommand("audit", "Run MIA/SIA over a stored experiment");
  audit->add_option("directory", audit_dir, "Experiment directory")->required();
  audit->add_option("--null-seed", null_seed, "Shuffle ground truth with this seed");
  audit->add_option("-j,--workers", audit_workers, "Rounds audited concurrently");

  std::vector<double> magnitudes;
  std::vector<std::string> idx_sets;
  auto* gap = app.add_subcommand("domain-gap", "LDA projection and domain-gap statistic");
  gap->add_option("-c,--config", config_path, "Experiment config providing the dataset block");
  gap->add_option("-s,--set", overrides, "Override a config key");
  gap->add_option("-m,--magnitudes", magnitudes, "Shift magnitudes to sweep")->delimiter(',');
  gap->add_option("--idx", idx_sets, "Dataset as name:images:labels (repeat, at least 2)");
  gap->add_option("-o,--out", out_dir, "Output directory")->required();

  auto* inspect = app.add_subcommand("partition-inspect", "Print the client partition");
  inspect->add_option("-c,--config", config_path, "JSON experiment config");
  inspect->add_option("-s,--set", overrides, "Override a config key");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? dpfl::kExitOk : dpfl::kExitUsage;
  }

  try {
    if (*run) {
      dpfl::ExperimentConfig config = LoadConfig(config_path, overrides);
      if (!out_dir.empty()) config.output.directory = out_dir;
      const fs::path dir = dpfl::ResolveExperimentDir(config);
      PrintRunSummary(dpfl::CmdRun(config, dir));
    } else if (*sweep) {
      dpfl::SweepSpec spec = dpfl::ParseSweepSpecFile(sweep_path);
      if (sweep_workers > 0) spec.workers = sweep_workers;
      const fs::path dir = out_dir.empty() ? dpfl::OutputRoot() / "sweep" : fs::path(out_dir);
      const dpfl::SweepResult result = dpfl::CmdSweep(spec, dir);
      std::size_t ran = 0, failed = 0;
      for (std::size_t i = 0; i < result.cells.size(); ++i) {
        ran += result.ran[i] ? 1 : 0;
        failed += result.failed[i] ? 1 : 0;
      }
      std::cout << "cells: " << result.cells.size() << "  ran: " << ran
                << "  skipped: " << result.cells.size() - ran << "  failed: " << failed << '\n'
                << "summary: " << (dir / "summary.csv").string() << '\n';
      if (failed > 0) return dpfl::kExitTrainingFailure;
    } else if (*audit) {
      dpfl::AuditCommandOptions options;
      options.null_seed = null_seed;
      options.workers = audit_workers;
      const dpfl::AttackReport report = dpfl::CmdAudit(audit_dir, options);
      std::cout << "best MIA AUC: " << report.best_auc << " (round " << report.best_auc_round
                << ")\nbest SIA ASR: " << report.best_asr << " (round " << report.best_asr_round
                << ")\n";
    } else if (*gap) {
      if (!idx_sets.empty()) {
        std::vector<dpfl::LabeledDataset> sets;
        for (const auto& spec : idx_sets) {
          const auto a = spec.find(':');
          const auto b = spec.find(':', a == std::string::npos ? a : a + 1);
          if (a == std::string::npos || b == std::string::npos) {
            throw dpfl::ConfigError("--idx expects name:images:labels, got '" + spec + "'");
          }
          const dpfl::LabeledDataset loaded =
              dpfl::LoadIdx(spec.substr(a + 1, b - a - 1), spec.substr(b + 1));
          sets.emplace_back(loaded.features(), loaded.labels(), loaded.num_classes(),
                            spec.substr(0, a));
        }
        const dpfl::DomainGap result = dpfl::CmdDomainGapDatasets(sets, out_dir);
        std::cout << "gap statistic: " << result.gap_statistic << '\n';
      } else {
        const dpfl::ExperimentConfig config = LoadConfig(config_path, overrides);
        if (magnitudes.empty()) magnitudes.push_back(config.dataset.shift_magnitude);
        for (const auto& p : dpfl::CmdDomainGap(config, magnitudes, out_dir)) {
          std::cout << "magnitude " << p.magnitude << ": gap " << p.gap << '\n';
        }
      }
    } else if (*inspect) {
      dpfl::CmdPartitionInspect(LoadConfig(config_path, overrides), std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return dpfl::ExitCodeFor(e);
  }
  return dpfl::kExitOk;
}
