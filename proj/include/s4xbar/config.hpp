#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "s4xbar/crossbar.hpp"
#include "s4xbar/dataset.hpp"
#include "s4xbar/quantizer.hpp"
#include "s4xbar/ssm.hpp"
#include "s4xbar/trainer.hpp"

namespace s4xbar {

struct DataConfig {
  std::string source = "synth";  // synth | cache | manifest
  std::string path;              // cache file or manifest csv
  int n_per_class = 100;
  std::uint64_t seed = 7;
  SynthSpec synth;
};

struct SweepConfig {
  std::vector<int> bits = {2, 3, 4, 5, 8};
  std::vector<std::string> f_scales = {"1", "3", "10", "dynamic"};
  std::vector<double> sigmas = {0, 5, 10, 15, 20};  // uS
  int instantiations = 100;
  int noise_seeds = 100;  // alias kept equal to instantiations unless set
};

// Versioned experiment description; unknown keys are rejected everywhere.
struct ExperimentConfig {
  int version = 1;
  std::string experiment_id = "experiment";
  ModelConfig model;
  TrainConfig train;
  DataConfig data;
  DeviceModel device;
  PeripheryModel periphery;
  SweepConfig sweep;
  std::string out_dir = "out";
  int threads = 1;
  bool ci_profile = false;

  // Noise sweeps read one trained checkpoint per bit width.
  std::vector<std::pair<int, std::string>> noise_checkpoints;

  static ExperimentConfig load(const std::string& path);
  static ExperimentConfig from_json_text(const std::string& text);
  std::string canonical_json() const;
  std::uint64_t config_hash() const;
};

Dataset load_data(const DataConfig& cfg);

}  // namespace s4xbar
