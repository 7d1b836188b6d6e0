#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "marlin/env.hpp"
#include "marlin/neural.hpp"
#include "marlin/rng.hpp"

namespace marlin {

struct EpsilonSchedule {
    double eps_max = 0.2;
    double eps_min = 0.01;
    std::int64_t T_e = 320000;  // exploration horizon
    double test_eps = 0.1;

    void validate() const;
};

// Linear from eps_max to eps_min over [0, T_e], then held at eps_min.
double epsilon_at(const EpsilonSchedule& sched, std::int64_t t);

struct Transition {
    std::vector<std::uint8_t> s;       // flattened T_hist x obs_width window
    int a = 0;
    double r = 0.0;
    std::vector<std::uint8_t> s_next;
};

// Bounded FIFO. Minibatches are sampled uniformly without replacement.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);

    void push(Transition t);
    std::size_t size() const { return size_; }
    std::size_t capacity() const { return cap_; }
    bool wrapped() const { return wrapped_; }
    const Transition& at(std::size_t logical) const;  // 0 = oldest
    std::vector<std::size_t> sample_indices(std::size_t m, Rng& rng) const;

private:
    std::vector<Transition> slots_;
    std::size_t cap_;
    std::size_t head_ = 0;  // next write position
    std::size_t size_ = 0;
    bool wrapped_ = false;
};

enum class OptimizerKind { Sgd, Adam };

struct DqnAgent {
    NetworkSpec spec;
    ParameterVector params;
    OptimizerKind opt = OptimizerKind::Adam;
    AdamState adam;
    ReplayBuffer buffer;
    // optional periodically-copied target network (0 = bootstrap from the
    // online network, the default)
    int target_sync = 0;
    ParameterVector target_params;
    std::int64_t updates = 0;
};

DqnAgent make_dqn_agent(const NetworkSpec& spec, std::uint64_t init_seed,
                        std::size_t replay_capacity, OptimizerKind opt, int target_sync = 0);

// epsilon-greedy: uniform with probability eps, otherwise argmax Q with
// lowest-index tie-break.
int select_action_dqn(const DqnAgent& agent, const std::vector<std::uint8_t>& state_bits,
                      double eps, Rng& rng);

// One minibatch step. Returns false (and leaves the agent untouched) when the
// buffer is smaller than the minibatch.
bool dqn_update(DqnAgent& agent, double gamma, double alpha, int minibatch, Rng& rng);

// Same step on an explicit set of buffer indices; the orchestration layer
// uses this for slot-aligned sampling.
void dqn_update_on(DqnAgent& agent, const std::vector<std::size_t>& indices, double gamma,
                   double alpha);

struct AcAgent {
    NetworkSpec actor_spec;
    NetworkSpec critic_spec;
    ParameterVector actor;
    ParameterVector critic;
    OptimizerKind opt = OptimizerKind::Adam;
    AdamState actor_adam;
    AdamState critic_adam;
    bool argmax_exploit = false;  // exploit branch: argmax instead of sampling
};

AcAgent make_ac_agent(const NetworkSpec& actor_spec, const NetworkSpec& critic_spec,
                      std::uint64_t init_seed, OptimizerKind opt);

// epsilon branch is uniform; otherwise sample from the actor scores (or take
// the argmax when agent.argmax_exploit is set).
int select_action_ac(const AcAgent& agent, const std::vector<std::uint8_t>& state_bits,
                     double eps, Rng& rng);

struct AcUpdateResult {
    double delta = 0.0;
    bool actor_updated = false;
};

// delta = r + gamma*V(s') - V(s) with V(s') frozen; critic descends delta^2,
// then the actor (when update_actor) ascends log pi(a|s) * delta.
AcUpdateResult ac_update(AcAgent& agent, const Transition& tr, double gamma,
                         double alpha_actor, double alpha_critic, bool update_actor = true);

std::vector<double> bits_to_input(const std::vector<std::uint8_t>& bits);

}  // namespace marlin
