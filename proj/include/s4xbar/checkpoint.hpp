#pragma once

#include <string>
#include <vector>

#include "s4xbar/crossbar.hpp"
#include "s4xbar/quantizer.hpp"
#include "s4xbar/ssm.hpp"
#include "s4xbar/trainer.hpp"

namespace s4xbar {

// Versioned JSON checkpoint: config block plus flat arrays per tensor;
// complex tensors are stored as separate re/im arrays, kernel tensors
// stacked row-major over kernels.
void save_checkpoint(const std::string& path, const ModelParams& p, const QuantMap& q);
std::pair<ModelParams, QuantMap> load_checkpoint(const std::string& path);

void save_train_report(const std::string& path, const TrainReport& report);

// One JSON file holding the conductance programs of all kernels of a model.
void save_programs(const std::string& path, const std::vector<ConductanceProgram>& programs);
std::vector<ConductanceProgram> load_programs(const std::string& path);

}  // namespace s4xbar
