#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "s4xbar/common.hpp"

namespace s4xbar {

inline constexpr int kSequenceLength = 871;
inline constexpr int kDownsampleFactor = 64;
inline constexpr int kRawLength = kSequenceLength * kDownsampleFactor;  // 55744

// One fixed-length normalized input sequence.
struct Sequence {
  Vec samples;  // length kSequenceLength, max |sample| <= 1
  int label = 0;
  std::string source_id;
};

struct ManifestEntry {
  std::string path;
  int label = 0;
  std::string split;  // "train" or "test"
};

// CSV manifest with header `path,label,split`; labels are the task words
// ("zero" -> 0, "one" -> 1). Paths are resolved relative to the manifest.
struct DatasetManifest {
  std::vector<ManifestEntry> entries;

  static DatasetManifest load(const std::string& csv_path);
};

struct Dataset {
  std::vector<Sequence> train;
  std::vector<Sequence> test;

  std::map<int, int> class_counts(const std::vector<Sequence>& split) const;
  int n_classes() const;
};

// Decode, peak-normalize, pad/truncate to kRawLength raw samples, then
// downsample by averaging blocks of kDownsampleFactor.
Sequence ingest_wav(const std::string& path, int label);

// Ingests every manifest entry; collects all file errors before aborting.
// Sequences are ordered deterministically by source id within each split.
Dataset build_dataset(const DatasetManifest& manifest);

// Tunable synthetic stand-in for the two-word task: each class is a train of
// decaying tone bursts at a class-specific frequency, with seeded
// amplitude/phase/onset/frequency jitter and additive noise. Random burst
// phases make the task need damped (forgetting) kernels; a pure resonator
// that stays coherent across bursts sees interference fades.
struct SynthSpec {
  double class0_cycles = 8.0;   // cycles per sequence
  double class1_cycles = 20.0;
  int n_bursts = 4;
  double decay_tau = 140.0;        // per-burst decay, samples
  double amp_jitter = 0.25;        // per burst
  double freq_jitter = 0.06;       // relative, per sample
  double distractor_level = 0.55;  // opposing-frequency burst amplitude
  double noise_std = 0.15;
  double test_fraction = 0.2;
};

Dataset synth_dataset(int n_per_class, std::uint64_t seed, const SynthSpec& spec = {});

// Versioned binary cache of a dataset (byte-stable across identical runs).
void save_dataset(const std::string& path, const Dataset& ds);
Dataset load_dataset(const std::string& path);

}  // namespace s4xbar
