#include "s4xbar/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "s4xbar/rng.hpp"
#include "s4xbar/wav.hpp"

namespace s4xbar {

namespace fs = std::filesystem;

namespace {

const std::map<std::string, int>& label_map() {
  static const std::map<std::string, int> m = {{"zero", 0}, {"one", 1}};
  return m;
}

Sequence make_sequence(Vec samples, int label, std::string source_id) {
  if (samples.size() != kSequenceLength)
    throw DataError("sequence length must be " + std::to_string(kSequenceLength));
  Sequence s;
  s.samples = std::move(samples);
  s.label = label;
  s.source_id = std::move(source_id);
  return s;
}

}  // namespace

DatasetManifest DatasetManifest::load(const std::string& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw DataError("manifest: cannot open " + csv_path);
  std::string line;
  if (!std::getline(in, line)) throw DataError("manifest: empty file " + csv_path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "path,label,split")
    throw DataError("manifest: expected header 'path,label,split' in " + csv_path);

  const fs::path base = fs::path(csv_path).parent_path();
  DatasetManifest m;
  std::vector<std::string> problems;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string path, label, split;
    if (!std::getline(ss, path, ',') || !std::getline(ss, label, ',') ||
        !std::getline(ss, split)) {
      problems.push_back(csv_path + ":" + std::to_string(lineno) + ": malformed row");
      continue;
    }
    auto it = label_map().find(label);
    if (it == label_map().end()) {
      problems.push_back(csv_path + ":" + std::to_string(lineno) + ": unknown label '" +
                         label + "'");
      continue;
    }
    if (split != "train" && split != "test") {
      problems.push_back(csv_path + ":" + std::to_string(lineno) + ": unknown split '" +
                         split + "'");
      continue;
    }
    m.entries.push_back({(base / path).string(), it->second, split});
  }
  if (!problems.empty()) {
    std::string msg = "manifest errors:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw DataError(msg);
  }
  if (m.entries.empty()) throw DataError("manifest: no entries in " + csv_path);
  return m;
}

std::map<int, int> Dataset::class_counts(const std::vector<Sequence>& split) const {
  std::map<int, int> counts;
  for (const auto& s : split) ++counts[s.label];
  return counts;
}

int Dataset::n_classes() const {
  std::set<int> labels;
  for (const auto& s : train) labels.insert(s.label);
  for (const auto& s : test) labels.insert(s.label);
  return static_cast<int>(labels.size());
}

Sequence ingest_wav(const std::string& path, int label) {
  std::vector<double> raw = read_wav16_mono(path);

  double peak = 0.0;
  for (double v : raw) peak = std::max(peak, std::abs(v));
  if (peak > 0.0)
    for (double& v : raw) v /= peak;

  raw.resize(kRawLength, 0.0);  // zero-pad or truncate

  Vec out(kSequenceLength);
  for (int i = 0; i < kSequenceLength; ++i) {
    double acc = 0.0;
    for (int j = 0; j < kDownsampleFactor; ++j) acc += raw[i * kDownsampleFactor + j];
    out[i] = acc / kDownsampleFactor;
  }
  return make_sequence(std::move(out), label, path);
}

Dataset build_dataset(const DatasetManifest& manifest) {
  if (manifest.entries.empty()) throw DataError("build_dataset: empty manifest");
  Dataset ds;
  std::vector<std::string> failures;
  for (const auto& e : manifest.entries) {
    try {
      Sequence s = ingest_wav(e.path, e.label);
      (e.split == "train" ? ds.train : ds.test).push_back(std::move(s));
    } catch (const DataError& err) {
      failures.push_back(err.what());
    }
  }
  if (!failures.empty()) {
    std::string msg = "build_dataset: " + std::to_string(failures.size()) + " file(s) failed:";
    for (const auto& f : failures) msg += "\n  " + f;
    throw DataError(msg);
  }
  auto by_source = [](const Sequence& a, const Sequence& b) {
    return a.source_id < b.source_id;
  };
  std::sort(ds.train.begin(), ds.train.end(), by_source);
  std::sort(ds.test.begin(), ds.test.end(), by_source);
  return ds;
}

Dataset synth_dataset(int n_per_class, std::uint64_t seed, const SynthSpec& spec) {
  if (n_per_class < 1) throw ConfigError("synth_dataset: n_per_class must be >= 1");
  Dataset ds;
  const double two_pi = 2.0 * std::numbers::pi;
  for (int label = 0; label < 2; ++label) {
    const double base_cycles = label == 0 ? spec.class0_cycles : spec.class1_cycles;
    for (int i = 0; i < n_per_class; ++i) {
      std::mt19937_64 rng(derive_seed(seed, "synth", label, i));
      std::normal_distribution<double> normal(0.0, 1.0);
      std::uniform_real_distribution<double> unif(0.0, 1.0);

      const double other_cycles = label == 0 ? spec.class1_cycles : spec.class0_cycles;
      const double jitter = 1.0 + spec.freq_jitter * (2.0 * unif(rng) - 1.0);
      const double omega = two_pi * base_cycles * jitter / kSequenceLength;
      const double omega_other = two_pi * other_cycles * jitter / kSequenceLength;
      // bursts sit in the front part so a noise-only tail follows
      const double onset_span =
          std::max(1.0, kSequenceLength - 3.0 * spec.decay_tau);

      Vec s = Vec::Zero(kSequenceLength);
      auto add_burst = [&](double w, double amp) {
        const double onset = onset_span * unif(rng);
        const double phase = two_pi * unif(rng);
        for (int t = static_cast<int>(onset); t < kSequenceLength; ++t) {
          const double rel = static_cast<double>(t) - onset;
          s[t] += amp * std::exp(-rel / spec.decay_tau) * std::sin(w * rel + phase);
        }
      };
      for (int burst = 0; burst < spec.n_bursts; ++burst) {
        add_burst(omega, 1.0 - spec.amp_jitter * unif(rng));
        add_burst(omega_other, spec.distractor_level * (1.0 - spec.amp_jitter * unif(rng)));
      }
      for (int t = 0; t < kSequenceLength; ++t) s[t] += spec.noise_std * normal(rng);
      const double peak = s.cwiseAbs().maxCoeff();
      if (peak > 0.0) s /= peak;

      std::string id = "synth/" + std::to_string(label) + "/" + std::to_string(i);
      ds.train.push_back(make_sequence(std::move(s), label, std::move(id)));
    }
  }

  // Stratified split: per class, a seeded shuffle sends the leading fraction
  // to the test set.
  std::vector<Sequence> all = std::move(ds.train);
  ds.train.clear();
  for (int label = 0; label < 2; ++label) {
    std::vector<Index> idx;
    for (Index i = 0; i < static_cast<Index>(all.size()); ++i)
      if (all[i].label == label) idx.push_back(i);
    std::mt19937_64 rng(derive_seed(seed, "split", label));
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n_test = static_cast<std::size_t>(
        std::max(1.0, std::floor(spec.test_fraction * static_cast<double>(idx.size()))));
    for (std::size_t k = 0; k < idx.size(); ++k)
      (k < n_test ? ds.test : ds.train).push_back(std::move(all[idx[k]]));
  }
  auto by_source = [](const Sequence& a, const Sequence& b) {
    return a.source_id < b.source_id;
  };
  std::sort(ds.train.begin(), ds.train.end(), by_source);
  std::sort(ds.test.begin(), ds.test.end(), by_source);
  return ds;
}

namespace {

constexpr char kMagic[4] = {'S', '4', 'X', 'D'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ofstream& out, std::uint32_t v) {
  char b[4] = {char(v), char(v >> 8), char(v >> 16), char(v >> 24)};
  out.write(b, 4);
}

std::uint32_t get_u32(std::ifstream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw DataError("dataset cache: truncated " + path);
  return b[0] | (b[1] << 8) | (b[2] << 16) | (std::uint32_t(b[3]) << 24);
}

void write_split(std::ofstream& out, const std::vector<Sequence>& split) {
  for (const auto& s : split) {
    put_u32(out, static_cast<std::uint32_t>(s.label));
    put_u32(out, static_cast<std::uint32_t>(s.source_id.size()));
    out.write(s.source_id.data(), static_cast<std::streamsize>(s.source_id.size()));
    out.write(reinterpret_cast<const char*>(s.samples.data()),
              kSequenceLength * static_cast<std::streamsize>(sizeof(double)));
  }
}

void read_split(std::ifstream& in, const std::string& path, std::uint32_t count,
                std::vector<Sequence>& split) {
  for (std::uint32_t i = 0; i < count; ++i) {
    Sequence s;
    s.label = static_cast<int>(get_u32(in, path));
    const std::uint32_t idlen = get_u32(in, path);
    s.source_id.resize(idlen);
    in.read(s.source_id.data(), idlen);
    s.samples.resize(kSequenceLength);
    in.read(reinterpret_cast<char*>(s.samples.data()),
            kSequenceLength * static_cast<std::streamsize>(sizeof(double)));
    if (!in) throw DataError("dataset cache: truncated " + path);
    split.push_back(std::move(s));
  }
}

}  // namespace

void save_dataset(const std::string& path, const Dataset& ds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("dataset cache: cannot write " + path);
  out.write(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(ds.train.size()));
  put_u32(out, static_cast<std::uint32_t>(ds.test.size()));
  write_split(out, ds.train);
  write_split(out, ds.test);
  if (!out) throw DataError("dataset cache: write failed for " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("dataset cache: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != std::string(kMagic, 4))
    throw DataError("dataset cache: bad magic in " + path);
  if (get_u32(in, path) != kVersion)
    throw DataError("dataset cache: unsupported version in " + path);
  const std::uint32_t n_train = get_u32(in, path);
  const std::uint32_t n_test = get_u32(in, path);
  Dataset ds;
  read_split(in, path, n_train, ds.train);
  read_split(in, path, n_test, ds.test);
  return ds;
}

}  // namespace s4xbar
