#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "marlin/env.hpp"
#include "marlin/metrics.hpp"
#include "marlin/orchestration.hpp"

namespace marlin {

struct ExperimentConfig {
    NetworkConfig net{};
    TrainConfig train{};
    std::vector<std::uint64_t> seeds = {1};
    std::string out_dir = "runs";
    int window = 500;  // moving-average window for summaries

    void validate() const;
};

struct ParseError : std::runtime_error {
    int line;
    ParseError(int line_, const std::string& msg)
        : std::runtime_error("line " + std::to_string(line_) + ": " + msg), line(line_) {}
};

// Table-driven defaults: CDRL uses Adam/0.001 with the 0.2 -> 0.01 schedule;
// DDRL and FDRL use SGD/0.01 with 0.5 -> 0.05, small minibatches and the
// smaller replay memory.
ExperimentConfig default_config(Regime regime);

// "key = value" lines with '#' comments. Unknown keys are rejected; missing
// keys keep the regime defaults. The regime key is applied first no matter
// where it appears.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);
std::string render_config(const ExperimentConfig& cfg);

// Runs the configured regime once per seed, writing metrics_seed<S>.csv,
// per-user policy checkpoints, the rendered config, and summary.csv.
// Returns 0 on success.
int run_experiment(const ExperimentConfig& cfg);

// Loads the checkpoints train wrote for one seed.
std::vector<Policy> load_policies(const ExperimentConfig& cfg, std::uint64_t seed);

// Test protocol on trained checkpoints; writes test_metrics_seed<S>.csv.
int run_test_experiment(const ExperimentConfig& cfg);

std::string metrics_path(const std::string& out_dir, std::uint64_t seed);
std::string test_metrics_path(const std::string& out_dir, std::uint64_t seed);
std::string policy_path(const std::string& out_dir, std::uint64_t seed, int user);

}  // namespace marlin
