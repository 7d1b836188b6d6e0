#pragma once

#include <complex>
#include <cstdint>
#include <utility>
#include <vector>

#include "marlin/rng.hpp"

namespace marlin {

enum class RewardMode { IndividualRate, SumRate, SumLogRate };

struct NetworkConfig {
    int K = 6;                        // transceiver pairs
    int Nc = 2;                       // channels
    int Np = 5;                       // power levels, P_1 = 0 .. P_Np = Pmax
    int M = 10;                       // feedback bits
    double Pmax = 6309.573444801933;  // 38 dBm on a linear scale, unit noise
    double sigma2 = 1.0;              // receiver noise power
    double T_threshold = 1.0;         // feedback quantization step (linear SINR)
    int T_hist = 5;                   // observation-history length
    double rho = 0.9;                 // Jakes correlation per variation
    int T_v = 2000;                   // slots between channel variations
    double rate_epsilon = 1e-6;       // floor applied inside the sum-log-rate reward
    bool reduced_actions = false;     // drop the zero-power transmit actions

    void validate() const;  // throws std::invalid_argument naming the field

    int obs_width() const { return 1 + Nc + Np + M; }
    int n_actions() const { return reduced_actions ? Nc * (Np - 1) + 1 : Nc * Np + 1; }
    // P_i = (i-1)/(Np-1) * Pmax, i in [1, Np]
    double power_level(int i) const;
};

struct UserAction {
    bool transmit = false;
    int channel = 1;    // 1-based in [1, Nc]; ignored when !transmit
    int power_idx = 1;  // 1-based in [1, Np]; ignored when !transmit
};

using JointAction = std::vector<UserAction>;

// Action index 0 is "no transmission"; indices 1.. enumerate (channel, power)
// pairs, channel-major.
UserAction action_from_index(const NetworkConfig& cfg, int index);
int action_to_index(const NetworkConfig& cfg, const UserAction& a);

struct NetworkState {
    // h[n][k*K + j] is the fading coefficient from transmitter j to
    // receiver k on channel n.
    std::vector<std::vector<std::complex<double>>> h;
    int K = 0;
    std::uint64_t slot = 0;

    double gain(int n, int k, int j) const { return std::norm(h[n][k * K + j]); }
};

NetworkState init_network(const NetworkConfig& cfg, std::uint64_t seed);

// One Gauss-Markov variation: h <- rho*h + e, e ~ CN(0, 1-rho^2). Increments
// the slot counter.
NetworkState jakes_step(const NetworkState& state, double rho, Rng& rng);

// Zeroth-order Bessel function of the first kind, |error| < 1e-9.
double bessel_j0(double x);

// rho = J0(2*pi*f_d*interval) for a Doppler frequency and variation interval.
double rho_from_doppler(double f_d, double interval);

std::vector<double> compute_sinr(const NetworkConfig& cfg, const NetworkState& state,
                                 const JointAction& action);

// floor(sinr / T), saturated at 2^M - 1.
int quantize_feedback(double sinr, double T_threshold, int M);

struct Observation {
    std::vector<std::uint8_t> bits;  // length 1 + Nc + Np + M
};

// Bit layout: [no-tx | channel one-hot | power one-hot | M feedback bits,
// most significant first].
Observation encode_observation(const NetworkConfig& cfg, const UserAction& action, int feedback);
std::pair<UserAction, int> decode_observation(const NetworkConfig& cfg, const Observation& obs);

struct AgentState {
    std::vector<Observation> window;  // oldest first, length T_hist

    void push(Observation obs);
    // window bits flattened oldest-first, as 0/1 doubles
    std::vector<double> flatten() const;
    std::vector<std::uint8_t> flat_bits() const;
};

AgentState initial_agent_state(const NetworkConfig& cfg);

double rate_from_sinr(double sinr);
std::vector<double> individual_rates(const std::vector<double>& sinrs);
double sum_rate_of(const std::vector<double>& sinrs);
double sum_log_rate_of(const std::vector<double>& sinrs, double rate_epsilon);

struct Rewards {
    std::vector<double> per_user;  // what each agent is paid this slot
    double sum_rate = 0.0;
    double sum_log_rate = 0.0;
};

Rewards compute_reward(const NetworkConfig& cfg, const std::vector<double>& sinrs,
                       RewardMode mode);

struct StepResult {
    std::vector<Observation> observations;
    std::vector<double> sinrs;
    Rewards rewards;
    NetworkState next;
};

// One slot: SINRs and rewards on the current state, per-user observations,
// then the channel advances (a Jakes variation on slots divisible by T_v when
// dynamic, otherwise just the slot counter).
StepResult step(const NetworkConfig& cfg, const NetworkState& state, const JointAction& action,
                RewardMode mode, Rng& rng, bool dynamic_channel);

}  // namespace marlin
