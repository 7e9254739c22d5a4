#pragma once

#include <string>

#include "experiment_config.hpp"

namespace appo::cli {

int run_gen(const ExperimentConfig& config);
int run_fit_reward(const ExperimentConfig& config);
int run_fit_transition(const ExperimentConfig& config);
int run_train(const ExperimentConfig& config);
int run_sweep(const ExperimentConfig& config);
int run_verify(const ExperimentConfig& config);

/// One-line {"error": {"code", "message"}} document on stderr.
void emit_error(const std::string& code, const std::string& message);

}  // namespace appo::cli
