#pragma once

#include <string>
#include <vector>

#include "s4xbar/checkpoint.hpp"
#include "s4xbar/config.hpp"
#include "s4xbar/crossbar.hpp"
#include "s4xbar/results.hpp"

namespace s4xbar {

struct NoisePoint {
  int bits = 0;
  double sigma = 0.0;
  std::vector<double> accuracies;  // one per instantiation, ordered by seed
  double median = 0.0, q25 = 0.0, q75 = 0.0;
};

// For each (bits, sigma) pair: programs `instantiations` seeded arrays from
// the bit width's checkpoint and evaluates test accuracy per instantiation.
// Writes raw rows plus median/quartile summaries.
std::vector<NoisePoint> run_noise_sweep(const ExperimentConfig& cfg);

struct PipelineSummary {
  double software_accuracy = 0.0;
  double ideal_crossbar_accuracy = 0.0;
  std::vector<double> noisy_accuracies;
  double noisy_median = 0.0;
  double noisy_q25 = 0.0, noisy_q75 = 0.0;
  std::string checkpoint_path;
  std::string program_path;
};

// ingest -> QAT train -> map -> ideal deploy -> noisy deploy, with every
// artifact persisted under cfg.out_dir.
PipelineSummary run_full_pipeline(const ExperimentConfig& cfg);

// CSV grid of conductances plus a JSON overlay naming the A/B/C block cells,
// one grid file per kernel.
void export_heatmap(const std::vector<ConductanceProgram>& programs,
                    const std::string& out_dir);

// Reproducibility manifest: config hash, seeds, artifact paths.
void write_run_manifest(const ExperimentConfig& cfg, const std::string& command,
                        const std::vector<std::string>& artifacts);

}  // namespace s4xbar
