#include "marlin/agents.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace marlin {

void EpsilonSchedule::validate() const {
    if (!(eps_min >= 0.0 && eps_min <= eps_max && eps_max <= 1.0))
        throw std::invalid_argument("epsilon: need 0 <= eps_min <= eps_max <= 1");
    if (T_e < 1) throw std::invalid_argument("T_e: must be >= 1");
    if (!(test_eps >= 0.0 && test_eps <= 1.0))
        throw std::invalid_argument("test_eps: must be in [0, 1]");
}

double epsilon_at(const EpsilonSchedule& sched, std::int64_t t) {
    if (t < 0) throw std::invalid_argument("t: must be >= 0");
    if (t >= sched.T_e) return sched.eps_min;
    double frac = static_cast<double>(t) / static_cast<double>(sched.T_e);
    return sched.eps_max + (sched.eps_min - sched.eps_max) * frac;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : cap_(capacity) {
    if (capacity == 0) throw std::invalid_argument("replay capacity: must be >= 1");
    slots_.reserve(std::min<std::size_t>(capacity, 4096));
}

void ReplayBuffer::push(Transition t) {
    if (size_ < cap_) {
        slots_.push_back(std::move(t));
        ++size_;
    } else {
        slots_[head_] = std::move(t);  // overwrite the oldest
        head_ = (head_ + 1) % cap_;
        wrapped_ = true;
    }
}

const Transition& ReplayBuffer::at(std::size_t logical) const {
    if (logical >= size_) throw std::out_of_range("replay buffer index");
    return slots_[(head_ + logical) % size_];
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t m, Rng& rng) const {
    if (m > size_) throw std::invalid_argument("minibatch larger than buffer");
    std::vector<std::size_t> picked;
    picked.reserve(m);
    if (m * 4 >= size_) {
        // dense draw: partial Fisher-Yates
        std::vector<std::size_t> idx(size_);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        for (std::size_t i = 0; i < m; ++i) {
            std::size_t j = i + rng.uniform_int(size_ - i);
            std::swap(idx[i], idx[j]);
            picked.push_back(idx[i]);
        }
    } else {
        // sparse draw: rejection, collisions are rare
        while (picked.size() < m) {
            std::size_t j = rng.uniform_int(size_);
            if (std::find(picked.begin(), picked.end(), j) == picked.end())
                picked.push_back(j);
        }
    }
    return picked;
}

std::vector<double> bits_to_input(const std::vector<std::uint8_t>& bits) {
    std::vector<double> in(bits.size());
    for (std::size_t i = 0; i < bits.size(); ++i) in[i] = static_cast<double>(bits[i]);
    return in;
}

DqnAgent make_dqn_agent(const NetworkSpec& spec, std::uint64_t init_seed,
                        std::size_t replay_capacity, OptimizerKind opt, int target_sync) {
    DqnAgent agent{spec,
                   init_params(spec, init_seed),
                   opt,
                   make_adam_state(param_count(spec)),
                   ReplayBuffer(replay_capacity),
                   target_sync,
                   {},
                   0};
    if (target_sync > 0) agent.target_params = agent.params;
    return agent;
}

int select_action_dqn(const DqnAgent& agent, const std::vector<std::uint8_t>& state_bits,
                      double eps, Rng& rng) {
    if (rng.uniform() < eps)
        return static_cast<int>(rng.uniform_int(agent.spec.n_actions));
    auto q = forward(agent.spec, agent.params, bits_to_input(state_bits));
    return static_cast<int>(std::max_element(q.begin(), q.end()) - q.begin());
}

namespace {

void apply_step(ParameterVector& params, const GradientVector& grad, OptimizerKind opt,
                AdamState& adam, double alpha) {
    if (opt == OptimizerKind::Adam)
        adam_step(adam, params, grad, alpha);
    else
        sgd_step(params, grad, alpha);
    check_finite(params, "optimizer step");
}

}  // namespace

void dqn_update_on(DqnAgent& agent, const std::vector<std::size_t>& indices, double gamma,
                   double alpha) {
    std::vector<TdSample> batch;
    batch.reserve(indices.size());
    for (std::size_t idx : indices) {
        const Transition& tr = agent.buffer.at(idx);
        batch.push_back({bits_to_input(tr.s), tr.a, tr.r, bits_to_input(tr.s_next)});
    }
    const ParameterVector& bootstrap =
        agent.target_sync > 0 ? agent.target_params : agent.params;
    auto targets = dqn_targets(agent.spec, bootstrap, batch, gamma);
    auto grad = backward_dqn(agent.spec, agent.params, batch, targets);
    apply_step(agent.params, grad, agent.opt, agent.adam, alpha);
    ++agent.updates;
    if (agent.target_sync > 0 && agent.updates % agent.target_sync == 0)
        agent.target_params = agent.params;
}

bool dqn_update(DqnAgent& agent, double gamma, double alpha, int minibatch, Rng& rng) {
    if (minibatch < 1) throw std::invalid_argument("minibatch: must be >= 1");
    if (agent.buffer.size() < static_cast<std::size_t>(minibatch)) return false;
    auto indices = agent.buffer.sample_indices(static_cast<std::size_t>(minibatch), rng);
    dqn_update_on(agent, indices, gamma, alpha);
    return true;
}

AcAgent make_ac_agent(const NetworkSpec& actor_spec, const NetworkSpec& critic_spec,
                      std::uint64_t init_seed, OptimizerKind opt) {
    AcAgent agent;
    agent.actor_spec = actor_spec;
    agent.critic_spec = critic_spec;
    agent.actor = init_params(actor_spec, mix_seed(init_seed, 0x6163746fULL));
    agent.critic = init_params(critic_spec, mix_seed(init_seed, 0x63726974ULL));
    agent.opt = opt;
    agent.actor_adam = make_adam_state(param_count(actor_spec));
    agent.critic_adam = make_adam_state(param_count(critic_spec));
    return agent;
}

int select_action_ac(const AcAgent& agent, const std::vector<std::uint8_t>& state_bits,
                     double eps, Rng& rng) {
    if (rng.uniform() < eps)
        return static_cast<int>(rng.uniform_int(agent.actor_spec.n_actions));
    auto scores = forward(agent.actor_spec, agent.actor, bits_to_input(state_bits));
    if (agent.argmax_exploit)
        return static_cast<int>(std::max_element(scores.begin(), scores.end()) - scores.begin());
    double u = rng.uniform();
    double cum = 0.0;
    for (std::size_t j = 0; j < scores.size(); ++j) {
        cum += scores[j];
        if (u < cum) return static_cast<int>(j);
    }
    return static_cast<int>(scores.size()) - 1;  // guard against rounding
}

AcUpdateResult ac_update(AcAgent& agent, const Transition& tr, double gamma,
                         double alpha_actor, double alpha_critic, bool update_actor) {
    std::vector<CriticSample> cbatch{{bits_to_input(tr.s), tr.r, bits_to_input(tr.s_next)}};
    auto targets = critic_targets(agent.critic_spec, agent.critic, cbatch, gamma);
    auto v = forward(agent.critic_spec, agent.critic, cbatch[0].s);
    AcUpdateResult res;
    res.delta = targets[0] - v[0];
    auto cgrad = backward_critic(agent.critic_spec, agent.critic, cbatch, targets);
    apply_step(agent.critic, cgrad, agent.opt, agent.critic_adam, alpha_critic);
    if (update_actor) {
        std::vector<ActorSample> abatch{{cbatch[0].s, tr.a, res.delta}};
        auto agrad = backward_actor(agent.actor_spec, agent.actor, abatch);
        apply_step(agent.actor, agrad, agent.opt, agent.actor_adam, alpha_actor);
        res.actor_updated = true;
    }
    return res;
}

}  // namespace marlin
