#pragma once

#include <cstdint>
#include <vector>

#include "marlin/env.hpp"

namespace marlin {

struct WmmseOptions {
    double tol = 1e-6;   // stop when max_k |v_k - v_k_prev| < tol
    int max_iter = 500;
    bool random_init = false;  // v0 ~ U(0, sqrt(Pmax)) instead of full power
    std::uint64_t init_seed = 0;
    // extra seeded random initializations; the best run by sum-rate wins.
    // The block iteration is monotone but not convex, and the full-power
    // start preserves symmetries it cannot break on its own.
    int restarts = 0;
    bool record_objective = false;
};

// Options the benchmark search uses: full-power start plus seeded restarts.
WmmseOptions benchmark_wmmse_options();

struct WmmseResult {
    std::vector<double> powers;  // p_k = v_k^2, inside [0, Pmax]
    double sum_rate = 0.0;       // base-2, computed from powers via the SINR formula
    std::vector<double> mmse;    // e_k at the final iterate (diagnostic)
    int iterations = 0;
    bool converged = false;
    std::vector<double> objective_trace;  // filled when record_objective
};

// Weighted-MMSE power allocation on one interference matrix.
// gains[k][j] = |h_kj|^2 as seen by receiver k; users on other channels must
// carry zero entries.
WmmseResult wmmse_power(const std::vector<std::vector<double>>& gains, double Pmax,
                        double sigma2, const WmmseOptions& opt = {});

// Sum-rate (base-2) of a power vector under a channel assignment, straight
// from the SINR formula.
double assignment_sum_rate(const NetworkConfig& cfg, const NetworkState& state,
                           const std::vector<int>& assignment, const std::vector<double>& powers);

std::vector<std::vector<double>> assignment_gains(const NetworkConfig& cfg,
                                                  const NetworkState& state,
                                                  const std::vector<int>& assignment);

struct BenchmarkResult {
    std::vector<int> assignment;  // per-user channel, 1-based
    std::vector<double> powers;
    double sum_rate = 0.0;
    std::size_t evaluations = 0;  // inner WMMSE solves
};

// WMMSE inside an exhaustive search over the Nc^K channel assignments.
// Ties break toward the lexicographically smallest assignment. Throws
// std::runtime_error when Nc^K exceeds the budget.
BenchmarkResult exhaustive_benchmark(const NetworkConfig& cfg, const NetworkState& state,
                                     std::size_t budget = std::size_t{1} << 16,
                                     const WmmseOptions& opt = benchmark_wmmse_options());

// Fallback for instances past the exhaustive budget: WMMSE over n_samples
// random assignments.
BenchmarkResult sampled_benchmark(const NetworkConfig& cfg, const NetworkState& state,
                                  std::size_t n_samples, std::uint64_t seed,
                                  const WmmseOptions& opt = benchmark_wmmse_options());

}  // namespace marlin
