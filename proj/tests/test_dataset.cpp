#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>

#include <unistd.h>

#include "s4xbar/dataset.hpp"
#include "s4xbar/wav.hpp"

using namespace s4xbar;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("s4xbar_test_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

// Goertzel-style DFT magnitude at a single frequency (cycles per sequence).
double dft_magnitude(const Vec& x, double cycles) {
  Complex acc = 0.0;
  const double w = 2.0 * std::numbers::pi * cycles / static_cast<double>(x.size());
  for (Index t = 0; t < x.size(); ++t)
    acc += x[t] * std::polar(1.0, -w * static_cast<double>(t));
  return std::abs(acc);
}

double spectral_peak_cycles(const Vec& x, double max_cycles) {
  double best = 0.0, best_mag = -1.0;
  for (double f = 1.0; f <= max_cycles; f += 0.5) {
    const double m = dft_magnitude(x, f);
    if (m > best_mag) {
      best_mag = m;
      best = f;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("wav roundtrip and format errors") {
  TempDir tmp;
  std::vector<double> samples(1000);
  for (std::size_t i = 0; i < samples.size(); ++i)
    samples[i] = 0.8 * std::sin(0.01 * static_cast<double>(i));
  const std::string path = tmp.file("tone.wav");
  write_wav16_mono(path, samples, 16000);
  const std::vector<double> back = read_wav16_mono(path);
  REQUIRE(back.size() == samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i)
    CHECK(std::abs(back[i] - samples[i]) < 1.0 / 16384.0);

  SUBCASE("stereo rejected") {
    // patch the channel count to 2
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(22);
    const char two[2] = {2, 0};
    f.write(two, 2);
    f.close();
    CHECK_THROWS_AS(read_wav16_mono(path), DataError);
  }
  SUBCASE("missing file named in the error") {
    try {
      read_wav16_mono(tmp.file("absent.wav"));
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("absent.wav") != std::string::npos);
    }
  }
  SUBCASE("garbage rejected") {
    std::ofstream f(tmp.file("junk.wav"), std::ios::binary);
    f << "not a wav at all";
    f.close();
    CHECK_THROWS_AS(read_wav16_mono(tmp.file("junk.wav")), DataError);
  }
}

TEST_CASE("ingest_wav normalization, padding and downsampling") {
  TempDir tmp;
  SUBCASE("silence maps to zeros") {
    write_wav16_mono(tmp.file("zero.wav"), std::vector<double>(kRawLength, 0.0));
    const Sequence s = ingest_wav(tmp.file("zero.wav"), 0);
    CHECK(s.samples.size() == kSequenceLength);
    CHECK(s.samples.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("constant file peak-normalizes to ones") {
    write_wav16_mono(tmp.file("quarter.wav"), std::vector<double>(kRawLength, 0.25));
    const Sequence s = ingest_wav(tmp.file("quarter.wav"), 1);
    for (Index i = 0; i < s.samples.size(); ++i)
      CHECK(s.samples[i] == doctest::Approx(1.0).epsilon(1e-3));
  }
  SUBCASE("short file zero-pads the tail") {
    std::vector<double> raw(100, 0.5);
    write_wav16_mono(tmp.file("short.wav"), raw);
    const Sequence s = ingest_wav(tmp.file("short.wav"), 0);
    // 100 raw samples < 2 blocks of 64: only the first two outputs nonzero
    CHECK(s.samples[0] != 0.0);
    CHECK(s.samples[1] != 0.0);
    for (Index i = 2; i < s.samples.size(); ++i) CHECK(s.samples[i] == 0.0);
    // block means of the normalized signal: 64/64 and 36/64
    CHECK(s.samples[0] == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(s.samples[1] == doctest::Approx(36.0 / 64.0).epsilon(1e-3));
  }
  SUBCASE("gain invariance and determinism") {
    std::vector<double> raw(kRawLength);
    for (int i = 0; i < kRawLength; ++i)
      raw[i] = 0.9 * std::sin(0.002 * i) * std::exp(-i / 20000.0);
    write_wav16_mono(tmp.file("a.wav"), raw);
    for (auto& v : raw) v *= 0.5;  // pre-normalization amplitude change
    write_wav16_mono(tmp.file("b.wav"), raw);
    const Sequence a = ingest_wav(tmp.file("a.wav"), 0);
    const Sequence b = ingest_wav(tmp.file("b.wav"), 0);
    const Sequence a2 = ingest_wav(tmp.file("a.wav"), 0);
    CHECK((a.samples.array() == a2.samples.array()).all());
    CHECK((a.samples - b.samples).cwiseAbs().maxCoeff() < 2e-4);  // 16-bit rounding
    CHECK(a.samples.cwiseAbs().maxCoeff() <= 1.0 + 1e-12);
  }
}

TEST_CASE("manifest loading and dataset assembly") {
  TempDir tmp;
  write_wav16_mono(tmp.file("z.wav"), std::vector<double>(kRawLength, 0.1));
  write_wav16_mono(tmp.file("o.wav"), std::vector<double>(kRawLength, -0.1));

  SUBCASE("two files, one per class") {
    std::ofstream m(tmp.file("m.csv"));
    m << "path,label,split\nz.wav,zero,train\no.wav,one,test\n";
    m.close();
    const Dataset ds = build_dataset(DatasetManifest::load(tmp.file("m.csv")));
    CHECK(ds.train.size() == 1);
    CHECK(ds.test.size() == 1);
    CHECK(ds.train[0].label == 0);
    CHECK(ds.test[0].label == 1);
    CHECK(ds.class_counts(ds.train).at(0) == 1);
  }
  SUBCASE("empty manifest rejected") {
    std::ofstream m(tmp.file("empty.csv"));
    m << "path,label,split\n";
    m.close();
    CHECK_THROWS_AS(DatasetManifest::load(tmp.file("empty.csv")), DataError);
  }
  SUBCASE("unknown label reported with line") {
    std::ofstream m(tmp.file("bad.csv"));
    m << "path,label,split\nz.wav,two,train\n";
    m.close();
    CHECK_THROWS_AS(DatasetManifest::load(tmp.file("bad.csv")), DataError);
  }
  SUBCASE("missing audio files listed") {
    std::ofstream m(tmp.file("miss.csv"));
    m << "path,label,split\nz.wav,zero,train\nnope.wav,one,train\n";
    m.close();
    try {
      build_dataset(DatasetManifest::load(tmp.file("miss.csv")));
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("nope.wav") != std::string::npos);
    }
  }
}

TEST_CASE("synthetic dataset") {
  const Dataset ds = synth_dataset(10, 7);
  CHECK(ds.train.size() == 16);
  CHECK(ds.test.size() == 4);
  CHECK(ds.n_classes() == 2);

  SUBCASE("invariants") {
    for (const auto& s : ds.train) {
      CHECK(s.samples.size() == kSequenceLength);
      CHECK(s.samples.cwiseAbs().maxCoeff() <= 1.0 + 1e-12);
    }
  }
  SUBCASE("determinism") {
    const Dataset ds2 = synth_dataset(10, 7);
    REQUIRE(ds2.train.size() == ds.train.size());
    for (std::size_t i = 0; i < ds.train.size(); ++i)
      CHECK((ds.train[i].samples.array() == ds2.train[i].samples.array()).all());
  }
  SUBCASE("classes separate spectrally") {
    const SynthSpec spec;
    double mean0 = 0.0, mean1 = 0.0;
    int n0 = 0, n1 = 0;
    for (const auto& s : ds.train) {
      const double peak = spectral_peak_cycles(s.samples, 2.0 * spec.class1_cycles);
      if (s.label == 0) {
        mean0 += peak;
        ++n0;
      } else {
        mean1 += peak;
        ++n1;
      }
    }
    mean0 /= n0;
    mean1 /= n1;
    CHECK(mean0 < 0.5 * (spec.class0_cycles + spec.class1_cycles));
    CHECK(mean1 > 0.5 * (spec.class0_cycles + spec.class1_cycles));
  }
}

TEST_CASE("dataset cache roundtrip is byte-stable") {
  TempDir tmp;
  const Dataset ds = synth_dataset(4, 99);
  save_dataset(tmp.file("d1.bin"), ds);
  const Dataset back = load_dataset(tmp.file("d1.bin"));
  REQUIRE(back.train.size() == ds.train.size());
  REQUIRE(back.test.size() == ds.test.size());
  for (std::size_t i = 0; i < ds.train.size(); ++i) {
    CHECK((back.train[i].samples.array() == ds.train[i].samples.array()).all());
    CHECK(back.train[i].label == ds.train[i].label);
    CHECK(back.train[i].source_id == ds.train[i].source_id);
  }
  save_dataset(tmp.file("d2.bin"), back);
  std::ifstream f1(tmp.file("d1.bin"), std::ios::binary);
  std::ifstream f2(tmp.file("d2.bin"), std::ios::binary);
  const std::string b1((std::istreambuf_iterator<char>(f1)), {});
  const std::string b2((std::istreambuf_iterator<char>(f2)), {});
  CHECK(b1 == b2);

  CHECK_THROWS_AS(load_dataset(tmp.file("missing.bin")), DataError);
}
