#include "marlin/orchestration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "marlin/wmmse.hpp"

namespace marlin {

namespace {

constexpr std::uint64_t kChanSeed = 1, kJakesSeed = 2, kModelSeed = 3, kSampleSeed = 4,
                        kGroupSeed = 5, kAcPickSeed = 6, kActSeedBase = 0x100,
                        kUserModelBase = 0x200, kUserSampleBase = 0x300;

std::vector<int> sample_users_without_replacement(int K, int G, Rng& rng) {
    std::vector<int> idx(K);
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < G; ++i) {
        int j = i + static_cast<int>(rng.uniform_int(K - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(G);
    std::sort(idx.begin(), idx.end());
    return idx;
}

int bits_for_actions(int n_actions) {
    int bits = 1;
    while ((1 << bits) < n_actions) ++bits;
    return bits;
}

}  // namespace

void TrainConfig::validate(const NetworkConfig& net) const {
    eps.validate();
    if (T_max < 1) throw std::invalid_argument("T_max: must be >= 1");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma: must be in [0, 1)");
    if (!(alpha > 0)) throw std::invalid_argument("alpha: must be > 0");
    if (!(alpha_actor > 0)) throw std::invalid_argument("alpha_actor: must be > 0");
    if (!(alpha_critic > 0)) throw std::invalid_argument("alpha_critic: must be > 0");
    if (minibatch < 1) throw std::invalid_argument("minibatch: must be >= 1");
    if (replay_capacity < 1) throw std::invalid_argument("replay_capacity: must be >= 1");
    if (lstm_hidden < 1) throw std::invalid_argument("lstm_hidden: must be >= 1");
    if (adv_width < 1) throw std::invalid_argument("adv_width: must be >= 1");
    if (val_width < 1) throw std::invalid_argument("val_width: must be >= 1");
    if (critic_hidden < 1) throw std::invalid_argument("critic_hidden: must be >= 1");
    if (regime == Regime::FDRL && (group_size < 1 || group_size > net.K))
        throw std::invalid_argument("G: must be in [1, K]");
    if (T_Fed < 1) throw std::invalid_argument("T_Fed: must be >= 1");
    if (quant_bits != 0 && (quant_bits < 2 || quant_bits > 16))
        throw std::invalid_argument("quant_bits: must be 0 or in [2, 16]");
    if (test_slots < 1) throw std::invalid_argument("test_slots: must be >= 1");
    if (target_sync < 0) throw std::invalid_argument("target_sync: must be >= 0");
    if (aligned_minibatch && regime == Regime::CDRL && minibatch % net.K != 0)
        throw std::invalid_argument("minibatch: aligned sampling needs a multiple of K");
}

NetworkSpec dqn_spec(const NetworkConfig& net, const TrainConfig& train) {
    NetworkSpec spec;
    spec.input_width = net.obs_width();
    spec.T_hist = net.T_hist;
    spec.lstm_hidden = train.lstm_hidden;
    spec.head = HeadKind::DuelingQ;
    spec.n_actions = net.n_actions();
    spec.adv_width = train.adv_width;
    spec.val_width = train.val_width;
    return spec;
}

NetworkSpec actor_spec(const NetworkConfig& net, const TrainConfig& train) {
    NetworkSpec spec;
    spec.input_width = net.obs_width();
    spec.T_hist = net.T_hist;
    spec.lstm_hidden = train.lstm_hidden;
    spec.head = HeadKind::SoftmaxActor;
    spec.n_actions = net.n_actions();
    return spec;
}

NetworkSpec critic_spec(const NetworkConfig& net, const TrainConfig& train) {
    NetworkSpec spec;
    spec.input_width = net.obs_width();
    spec.T_hist = net.T_hist;
    spec.lstm_hidden = train.lstm_hidden;
    spec.head = HeadKind::Critic;
    spec.critic_hidden = train.critic_hidden;
    return spec;
}

NetworkState training_initial_state(const NetworkConfig& net, const TrainConfig& train) {
    return init_network(net, mix_seed(train.seed, kChanSeed));
}

namespace {

struct TrainingRun {
    const NetworkConfig& net;
    const TrainConfig& train;
    Regime regime;
    int K;
    bool shared_model;  // CDRL trains one model on everyone's experience

    Rng jakes_rng;
    Rng sampler_rng;   // CDRL shared sampler
    Rng group_rng;
    Rng ac_pick_rng;
    std::vector<Rng> act_rngs;
    std::vector<Rng> user_sampler_rngs;

    std::vector<DqnAgent> dqns;   // size 1 when shared, else K
    std::vector<AcAgent> acs;

    std::vector<AgentState> windows;
    std::vector<std::int64_t> eps_clock;
    std::vector<char> eps_started;
    std::vector<int> group;  // current FDRL group, sorted user indices

    NetworkState state;
    Counters counters;
    MetricsLog log;
    double current_benchmark = std::numeric_limits<double>::quiet_NaN();
    ParameterVector global_actor;   // last FDRL average (DQN params or actor)
    ParameterVector global_critic;
    bool has_global = false;

    std::uint64_t state_upload_bits;
    std::uint64_t action_upload_bits;

    TrainingRun(const NetworkConfig& net_, const TrainConfig& train_)
        : net(net_),
          train(train_),
          regime(train_.regime),
          K(net_.K),
          shared_model(train_.regime == Regime::CDRL),
          jakes_rng(mix_seed(train_.seed, kJakesSeed)),
          sampler_rng(mix_seed(train_.seed, kSampleSeed)),
          group_rng(mix_seed(train_.seed, kGroupSeed)),
          ac_pick_rng(mix_seed(train_.seed, kAcPickSeed)),
          state(init_network(net_, mix_seed(train_.seed, kChanSeed))) {
        net.validate();
        train.validate(net);
        for (int k = 0; k < K; ++k) {
            act_rngs.emplace_back(mix_seed(train.seed, kActSeedBase + k));
            // aligned sampling keeps every user's sampler on one stream so
            // the drawn slots coincide across users and regimes
            user_sampler_rngs.emplace_back(train.aligned_minibatch
                                               ? mix_seed(train.seed, kSampleSeed)
                                               : mix_seed(train.seed, kUserSampleBase + k));
            windows.push_back(initial_agent_state(net));
        }
        eps_clock.assign(K, 0);
        eps_started.assign(K, 0);

        int n_models = shared_model ? 1 : K;
        for (int m = 0; m < n_models; ++m) {
            std::uint64_t init_seed = (shared_model || train.common_init)
                                          ? mix_seed(train.seed, kModelSeed)
                                          : mix_seed(train.seed, kUserModelBase + m);
            if (train.agent == AgentKind::DQN) {
                dqns.push_back(make_dqn_agent(dqn_spec(net, train), init_seed,
                                              train.replay_capacity, train.optimizer,
                                              train.target_sync));
            } else {
                auto agent = make_ac_agent(actor_spec(net, train), critic_spec(net, train),
                                           init_seed, train.optimizer);
                agent.argmax_exploit = train.ac_argmax;
                acs.push_back(std::move(agent));
            }
        }
        if (regime == Regime::FDRL) {
            group = sample_users_without_replacement(K, train.group_size, group_rng);
            if (train.async_eps)
                for (int user : group) eps_started[user] = 1;
        }
        log.K = K;

        state_upload_bits = static_cast<std::uint64_t>(K) * net.obs_width();
        action_upload_bits = bits_for_actions(net.n_actions());
    }

    int model_of(int user) const { return shared_model ? 0 : user; }

    bool in_group(int user) const {
        return std::binary_search(group.begin(), group.end(), user);
    }

    double epsilon_for(int user, std::int64_t t) const {
        if (regime == Regime::FDRL && train.async_eps) {
            if (!eps_started[user]) return train.eps.eps_max;
            return epsilon_at(train.eps, eps_clock[user]);
        }
        return epsilon_at(train.eps, t);
    }

    int select_action(int user, double eps) {
        int m = model_of(user);
        auto bits = windows[user].flat_bits();
        if (train.agent == AgentKind::DQN)
            return select_action_dqn(dqns[m], bits, eps, act_rngs[user]);
        return select_action_ac(acs[m], bits, eps, act_rngs[user]);
    }

    void refresh_benchmark() {
        current_benchmark = exhaustive_benchmark(net, state).sum_rate;
        ++counters.benchmark_evals;
    }

    // slot-aligned DQN minibatch: the same slots across users and regimes
    void aligned_dqn_update(DqnAgent& agent, std::size_t per_slot, Rng& rng, double alpha) {
        std::size_t m_slots = static_cast<std::size_t>(train.minibatch) / per_slot;
        std::size_t slots_stored = agent.buffer.size() / per_slot;
        if (slots_stored < m_slots) {
            ++counters.update_skips;
            return;
        }
        if (agent.buffer.wrapped())
            throw std::runtime_error("aligned sampling requires an unwrapped replay buffer");
        std::vector<std::size_t> idx(slots_stored);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::vector<std::size_t> chosen;
        for (std::size_t i = 0; i < m_slots; ++i) {
            std::size_t j = i + rng.uniform_int(slots_stored - i);
            std::swap(idx[i], idx[j]);
            chosen.push_back(idx[i]);
        }
        std::vector<std::size_t> flat;
        for (std::size_t slot_idx : chosen)
            for (std::size_t u = 0; u < per_slot; ++u) flat.push_back(slot_idx * per_slot + u);
        dqn_update_on(agent, flat, train.gamma, alpha);
        ++counters.updates;
    }

    void update_dqn_model(int m, Rng& rng) {
        std::size_t per_slot = shared_model ? static_cast<std::size_t>(K) : 1;
        if (train.aligned_minibatch) {
            aligned_dqn_update(dqns[m], per_slot, rng, train.alpha);
            return;
        }
        if (dqn_update(dqns[m], train.gamma, train.alpha, train.minibatch, rng))
            ++counters.updates;
        else
            ++counters.update_skips;
    }

    void fdrl_sync(std::int64_t slot_1based) {
        std::vector<ParameterVector> actor_uploads, critic_uploads;
        std::uint64_t per_param_bits = train.quant_bits > 0 ? train.quant_bits : 64;
        for (int user : group) {
            auto upload = [&](const ParameterVector& p) {
                counters.upload_bits += p.size() * per_param_bits;
                ++counters.param_upload_vectors;
                if (train.quant_bits > 0)
                    return dequantize_params(quantize_params(p, train.quant_bits));
                return p;
            };
            if (train.agent == AgentKind::DQN) {
                actor_uploads.push_back(upload(dqns[user].params));
            } else {
                actor_uploads.push_back(upload(acs[user].actor));
                critic_uploads.push_back(upload(acs[user].critic));
            }
        }
        global_actor = fedavg(actor_uploads);
        if (!critic_uploads.empty()) global_critic = fedavg(critic_uploads);
        has_global = true;
        ++counters.fedavg_rounds;
        counters.sync_slots.push_back(slot_1based);

        group = sample_users_without_replacement(K, train.group_size, group_rng);
        for (int user : group) {
            if (train.agent == AgentKind::DQN) {
                dqns[user].params = global_actor;
            } else {
                acs[user].actor = global_actor;
                acs[user].critic = global_critic;
            }
            ++counters.param_download_vectors;
            if (train.async_eps) eps_started[user] = 1;
        }
    }

    Policy policy_of_model(int m) const {
        if (train.agent == AgentKind::DQN)
            return Policy{AgentKind::DQN, dqns[m].spec, dqns[m].params};
        return Policy{AgentKind::AC, acs[m].actor_spec, acs[m].actor};
    }

    RunResult finish() {
        RunResult res;
        res.log = std::move(log);
        res.counters = std::move(counters);
        if (regime == Regime::FDRL) {
            ParameterVector actor_params;
            if (has_global) {
                actor_params = global_actor;
            } else {
                std::vector<ParameterVector> all;
                for (int k = 0; k < K; ++k)
                    all.push_back(train.agent == AgentKind::DQN ? dqns[k].params
                                                                : acs[k].actor);
                actor_params = fedavg(all);
            }
            NetworkSpec spec = train.agent == AgentKind::DQN ? dqns[0].spec : acs[0].actor_spec;
            for (int k = 0; k < K; ++k)
                res.policies.push_back(Policy{train.agent, spec, actor_params});
        } else {
            for (int k = 0; k < K; ++k) res.policies.push_back(policy_of_model(model_of(k)));
        }
        return res;
    }

    void run() {
        if (train.benchmark) refresh_benchmark();
        for (std::int64_t t = 0; t < train.T_max; ++t) {
            // act
            std::vector<double> eps(K);
            std::vector<int> action_idx(K);
            JointAction joint(K);
            for (int k = 0; k < K; ++k) {
                eps[k] = epsilon_for(k, t);
                action_idx[k] = select_action(k, eps[k]);
                joint[k] = action_from_index(net, action_idx[k]);
            }

            StepResult sr = step(net, state, joint, train.reward, jakes_rng,
                                 train.dynamic_channel);

            // experience and updates
            if (train.agent == AgentKind::DQN) {
                for (int k = 0; k < K; ++k) {
                    if (regime == Regime::FDRL && !in_group(k)) continue;
                    Transition tr;
                    tr.s = windows[k].flat_bits();
                    tr.a = action_idx[k];
                    tr.r = sr.rewards.per_user[k];
                    AgentState next_window = windows[k];
                    next_window.push(sr.observations[k]);
                    tr.s_next = next_window.flat_bits();
                    dqns[model_of(k)].buffer.push(std::move(tr));
                    if (shared_model) {
                        ++counters.experience_uploads;
                        counters.upload_bits += 2 * state_upload_bits + action_upload_bits;
                    }
                }
                if (shared_model) {
                    update_dqn_model(0, sampler_rng);
                } else {
                    for (int k = 0; k < K; ++k) {
                        if (regime == Regime::FDRL && !in_group(k)) continue;
                        update_dqn_model(k, user_sampler_rngs[k]);
                    }
                }
            } else {
                // actor-critic: the shared (CDRL) variant updates the critic on
                // every user's transition and the actor on one random user
                int actor_user = shared_model
                                     ? static_cast<int>(ac_pick_rng.uniform_int(K))
                                     : -1;
                for (int k = 0; k < K; ++k) {
                    if (regime == Regime::FDRL && !in_group(k)) continue;
                    Transition tr;
                    tr.s = windows[k].flat_bits();
                    tr.a = action_idx[k];
                    tr.r = sr.rewards.per_user[k];
                    AgentState next_window = windows[k];
                    next_window.push(sr.observations[k]);
                    tr.s_next = next_window.flat_bits();
                    if (shared_model) {
                        ++counters.experience_uploads;
                        counters.upload_bits += 2 * state_upload_bits + action_upload_bits;
                    }
                    bool update_actor = !shared_model || k == actor_user;
                    ac_update(acs[model_of(k)], tr, train.gamma, train.alpha_actor,
                              train.alpha_critic, update_actor);
                    ++counters.updates;
                }
            }

            // log, then advance
            MetricsRow row;
            row.slot = t;
            row.epsilon = std::accumulate(eps.begin(), eps.end(), 0.0) / K;
            row.sum_rate = sr.rewards.sum_rate;
            row.sum_log_rate = sr.rewards.sum_log_rate;
            row.benchmark = current_benchmark;
            row.rate = individual_rates(sr.sinrs);
            row.action = action_idx;
            for (int k = 0; k < K; ++k) {
                row.channel.push_back(joint[k].transmit ? joint[k].channel : 0);
                row.power.push_back(joint[k].transmit ? net.power_level(joint[k].power_idx)
                                                      : 0.0);
            }
            log.rows.push_back(std::move(row));

            for (int k = 0; k < K; ++k) windows[k].push(sr.observations[k]);
            bool channel_varied = train.dynamic_channel &&
                                  sr.next.slot % static_cast<std::uint64_t>(net.T_v) == 0;
            state = std::move(sr.next);
            if (train.benchmark && train.dynamic_channel && channel_varied)
                refresh_benchmark();

            if (regime == Regime::FDRL && train.async_eps)
                for (int user : group) ++eps_clock[user];

            if (regime == Regime::FDRL && (t + 1) % train.T_Fed == 0) fdrl_sync(t + 1);
        }
    }
};

RunResult run_training(const NetworkConfig& net, const TrainConfig& train) {
    TrainingRun run(net, train);
    run.run();
    return run.finish();
}

}  // namespace

RunResult run_cdrl(const NetworkConfig& net, const TrainConfig& train) {
    TrainConfig t = train;
    t.regime = Regime::CDRL;
    return run_training(net, t);
}

RunResult run_ddrl(const NetworkConfig& net, const TrainConfig& train) {
    TrainConfig t = train;
    t.regime = Regime::DDRL;
    return run_training(net, t);
}

RunResult run_fdrl(const NetworkConfig& net, const TrainConfig& train) {
    TrainConfig t = train;
    t.regime = Regime::FDRL;
    return run_training(net, t);
}

MetricsLog run_test(const NetworkConfig& net, const TrainConfig& train,
                    const std::vector<Policy>& policies, Counters* counters) {
    net.validate();
    train.validate(net);
    if (static_cast<int>(policies.size()) != net.K)
        throw std::invalid_argument("policies: need one per user");
    const int K = net.K;
    Rng jakes_rng(mix_seed(train.seed, kJakesSeed + 0x1000));
    std::vector<Rng> act_rngs;
    for (int k = 0; k < K; ++k)
        act_rngs.emplace_back(mix_seed(train.seed, kActSeedBase + 0x1000 + k));
    NetworkState state = init_network(net, mix_seed(train.seed, kChanSeed));
    std::vector<AgentState> windows(K, initial_agent_state(net));

    Counters local;
    Counters& ctr = counters ? *counters : local;
    MetricsLog log;
    log.K = K;

    double benchmark = exhaustive_benchmark(net, state).sum_rate;
    ++ctr.benchmark_evals;

    double eps = train.eps.test_eps;
    for (std::int64_t t = 0; t < train.test_slots; ++t) {
        JointAction joint(K);
        std::vector<int> action_idx(K);
        for (int k = 0; k < K; ++k) {
            const Policy& pol = policies[k];
            auto bits = windows[k].flat_bits();
            int a;
            if (act_rngs[k].uniform() < eps) {
                a = static_cast<int>(act_rngs[k].uniform_int(pol.spec.n_actions));
            } else {
                auto out = forward(pol.spec, pol.params, bits_to_input(bits));
                if (pol.kind == AgentKind::DQN || train.ac_argmax) {
                    a = static_cast<int>(std::max_element(out.begin(), out.end()) -
                                         out.begin());
                } else {
                    double u = act_rngs[k].uniform();
                    double cum = 0.0;
                    a = static_cast<int>(out.size()) - 1;
                    for (std::size_t j = 0; j < out.size(); ++j) {
                        cum += out[j];
                        if (u < cum) {
                            a = static_cast<int>(j);
                            break;
                        }
                    }
                }
            }
            action_idx[k] = a;
            joint[k] = action_from_index(net, a);
        }

        StepResult sr = step(net, state, joint, train.reward, jakes_rng, true);

        MetricsRow row;
        row.slot = t;
        row.epsilon = eps;
        row.sum_rate = sr.rewards.sum_rate;
        row.sum_log_rate = sr.rewards.sum_log_rate;
        row.benchmark = benchmark;
        row.rate = individual_rates(sr.sinrs);
        row.action = action_idx;
        for (int k = 0; k < K; ++k) {
            row.channel.push_back(joint[k].transmit ? joint[k].channel : 0);
            row.power.push_back(joint[k].transmit ? net.power_level(joint[k].power_idx) : 0.0);
        }
        log.rows.push_back(std::move(row));

        for (int k = 0; k < K; ++k) windows[k].push(sr.observations[k]);
        bool varied = sr.next.slot % static_cast<std::uint64_t>(net.T_v) == 0;
        state = std::move(sr.next);
        if (varied) {
            benchmark = exhaustive_benchmark(net, state).sum_rate;
            ++ctr.benchmark_evals;
        }
    }
    return log;
}

AccountRecord info_exchange_account(const NetworkConfig& net, const TrainConfig& train,
                                    bool history_based_state) {
    net.validate();
    if (train.group_size < 1 || train.group_size > net.K)
        throw std::invalid_argument("G: must be in [1, K]");
    if (train.T_Fed < 1) throw std::invalid_argument("T_Fed: must be >= 1");

    AccountRecord rec;
    rec.state_bits = history_based_state
                         ? static_cast<std::uint64_t>(net.T_hist) * net.obs_width()
                         : static_cast<std::uint64_t>(net.K) * net.obs_width();
    rec.action_bits = bits_for_actions(net.n_actions());
    double per_slot = static_cast<double>(net.K) * (2.0 * rec.state_bits + rec.action_bits);
    rec.cdrl_bits_per_100 = 100.0 * per_slot;

    std::size_t params = param_count(dqn_spec(net, train));
    if (train.agent == AgentKind::AC)
        params = param_count(actor_spec(net, train)) + param_count(critic_spec(net, train));
    rec.params_per_model = params;
    rec.bits_per_param = train.quant_bits > 0 ? train.quant_bits : 64;
    double per_round = static_cast<double>(train.group_size) * params * rec.bits_per_param;
    rec.fdrl_bits_per_100 = per_round * (100.0 / static_cast<double>(train.T_Fed));
    rec.ratio = rec.fdrl_bits_per_100 / rec.cdrl_bits_per_100;
    return rec;
}

std::vector<RunResult> run_dynamic_training(const NetworkConfig& net, const TrainConfig& train,
                                            const std::vector<int>& Tv_list) {
    std::vector<RunResult> results;
    for (int tv : Tv_list) {
        if (tv < 1) throw std::invalid_argument("T_v: must be >= 1");
        NetworkConfig n = net;
        n.T_v = tv;
        n.rho = std::pow(net.rho, tv);  // matched total variation intensity
        TrainConfig t = train;
        t.dynamic_channel = true;
        results.push_back(run_training(n, t));
    }
    return results;
}

}  // namespace marlin
