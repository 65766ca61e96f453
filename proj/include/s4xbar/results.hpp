#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "s4xbar/common.hpp"

namespace s4xbar {

// One appended measurement row. Sort keys come first; the timestamp column is
// informational and excluded from reproducibility comparisons.
struct ResultRow {
  std::string experiment_id;
  int bits = 0;
  std::string f_scale = "1";
  double sigma = 0.0;
  std::uint64_t seed = 0;
  std::string metric;
  double value = 0.0;
  std::string timestamp;
};

// Append-only CSV with a stable, versioned schema.
class ResultWriter {
 public:
  explicit ResultWriter(const std::string& path);
  void append(const ResultRow& row);

  static constexpr const char* kHeader =
      "version,experiment,bits,f_scale,sigma,seed,metric,value,timestamp";

 private:
  std::ofstream out_;
};

std::string format_double(double v);
std::string iso_timestamp();

// Type-7 (linear interpolation) quantile of a sorted sample.
double quantile_sorted(const std::vector<double>& sorted, double p);
double median(std::vector<double> values);

}  // namespace s4xbar
