#pragma once

#include <cstdint>
#include <vector>

#include "marlin/agents.hpp"
#include "marlin/env.hpp"
#include "marlin/metrics.hpp"
#include "marlin/neural.hpp"

namespace marlin {

enum class Regime { CDRL, DDRL, FDRL };
enum class AgentKind { DQN, AC };

struct TrainConfig {
    Regime regime = Regime::CDRL;
    AgentKind agent = AgentKind::DQN;
    RewardMode reward = RewardMode::SumRate;
    std::int64_t T_max = 400000;
    EpsilonSchedule eps{};
    double gamma = 0.9;
    OptimizerKind optimizer = OptimizerKind::Adam;
    double alpha = 0.001;
    double alpha_actor = 0.0005;
    double alpha_critic = 0.001;
    int minibatch = 12;
    std::size_t replay_capacity = 600000;
    int lstm_hidden = 20;
    int adv_width = 10;
    int val_width = 10;
    int critic_hidden = 5;

    // FDRL
    int group_size = 6;
    std::int64_t T_Fed = 1;
    int quant_bits = 0;    // 0 = exchange unquantized parameters
    bool async_eps = false;  // FDRL*: per-user epsilon clock starts on first selection
    bool common_init = false;

    bool dynamic_channel = false;  // Jakes variation every T_v slots while training
    bool aligned_minibatch = false;  // slot-aligned sampling (FedAvg-equivalence runs)
    bool ac_argmax = false;
    int target_sync = 0;

    bool benchmark = false;  // log the WMMSE benchmark alongside training
    std::int64_t test_slots = 10000;
    std::uint64_t seed = 1;

    void validate(const NetworkConfig& net) const;
};

// Cross-user traffic instrumentation; the regime-isolation and accounting
// tests assert on these.
struct Counters {
    std::uint64_t experience_uploads = 0;   // transitions sent to the central unit
    std::uint64_t param_upload_vectors = 0;
    std::uint64_t param_download_vectors = 0;
    std::uint64_t fedavg_rounds = 0;
    std::uint64_t updates = 0;
    std::uint64_t update_skips = 0;
    std::uint64_t benchmark_evals = 0;
    std::uint64_t upload_bits = 0;  // digital upload traffic
    std::vector<std::int64_t> sync_slots;  // 1-based slots where averaging ran
};

struct Policy {
    AgentKind kind = AgentKind::DQN;
    NetworkSpec spec;
    ParameterVector params;
};

struct RunResult {
    MetricsLog log;
    std::vector<Policy> policies;  // what each user deploys after training
    Counters counters;
};

NetworkSpec dqn_spec(const NetworkConfig& net, const TrainConfig& train);
NetworkSpec actor_spec(const NetworkConfig& net, const TrainConfig& train);
NetworkSpec critic_spec(const NetworkConfig& net, const TrainConfig& train);

// The channel draw a training run starts from (replay and benchmark tooling).
NetworkState training_initial_state(const NetworkConfig& net, const TrainConfig& train);

// Centralized training: one shared model fed by every user's experience.
RunResult run_cdrl(const NetworkConfig& net, const TrainConfig& train);
// Fully distributed: private models, private experience, no exchange.
RunResult run_ddrl(const NetworkConfig& net, const TrainConfig& train);
// Federated: local training plus parameter averaging every T_Fed slots over a
// resampled group of group_size users.
RunResult run_fdrl(const NetworkConfig& net, const TrainConfig& train);

// Frozen policies in a dynamic channel with test-epsilon exploration; the
// WMMSE benchmark is recomputed after every channel variation.
MetricsLog run_test(const NetworkConfig& net, const TrainConfig& train,
                    const std::vector<Policy>& policies, Counters* counters = nullptr);

struct AccountRecord {
    double cdrl_bits_per_100 = 0.0;
    double fdrl_bits_per_100 = 0.0;
    double ratio = 0.0;  // FDRL* / CDRL
    int bits_per_param = 0;
    std::size_t params_per_model = 0;
    std::uint64_t state_bits = 0;   // bits charged per uploaded state
    std::uint64_t action_bits = 0;
};

// Digital upload traffic per 100 slots for centralized training vs federated
// averaging. history_based_state charges T_hist observations per state
// instead of the per-user-count form.
AccountRecord info_exchange_account(const NetworkConfig& net, const TrainConfig& train,
                                    bool history_based_state = false);

// Trains once per T_v with per-variation correlation rho^T_v, so every run
// sees the same total variation intensity.
std::vector<RunResult> run_dynamic_training(const NetworkConfig& net, const TrainConfig& train,
                                            const std::vector<int>& Tv_list);

}  // namespace marlin
