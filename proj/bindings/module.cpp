#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "marlin/env.hpp"
#include "marlin/experiment.hpp"
#include "marlin/metrics.hpp"
#include "marlin/neural.hpp"
#include "marlin/orchestration.hpp"
#include "marlin/wmmse.hpp"

namespace py = pybind11;
using namespace marlin;

PYBIND11_MODULE(_marlin, m) {
    m.doc() = "interference-network simulator, DRL training regimes and WMMSE benchmark";

    // --- env ---------------------------------------------------------------
    py::enum_<RewardMode>(m, "RewardMode")
        .value("IndividualRate", RewardMode::IndividualRate)
        .value("SumRate", RewardMode::SumRate)
        .value("SumLogRate", RewardMode::SumLogRate);

    py::class_<NetworkConfig>(m, "NetworkConfig")
        .def(py::init<>())
        .def_readwrite("K", &NetworkConfig::K)
        .def_readwrite("Nc", &NetworkConfig::Nc)
        .def_readwrite("Np", &NetworkConfig::Np)
        .def_readwrite("M", &NetworkConfig::M)
        .def_readwrite("Pmax", &NetworkConfig::Pmax)
        .def_readwrite("sigma2", &NetworkConfig::sigma2)
        .def_readwrite("T_threshold", &NetworkConfig::T_threshold)
        .def_readwrite("T_hist", &NetworkConfig::T_hist)
        .def_readwrite("rho", &NetworkConfig::rho)
        .def_readwrite("T_v", &NetworkConfig::T_v)
        .def_readwrite("rate_epsilon", &NetworkConfig::rate_epsilon)
        .def_readwrite("reduced_actions", &NetworkConfig::reduced_actions)
        .def("validate", &NetworkConfig::validate)
        .def("obs_width", &NetworkConfig::obs_width)
        .def("n_actions", &NetworkConfig::n_actions)
        .def("power_level", &NetworkConfig::power_level);

    py::class_<UserAction>(m, "UserAction")
        .def(py::init([](bool transmit, int channel, int power_idx) {
                 return UserAction{transmit, channel, power_idx};
             }),
             py::arg("transmit") = false, py::arg("channel") = 1, py::arg("power_idx") = 1)
        .def_readwrite("transmit", &UserAction::transmit)
        .def_readwrite("channel", &UserAction::channel)
        .def_readwrite("power_idx", &UserAction::power_idx);

    py::class_<NetworkState>(m, "NetworkState")
        .def_readonly("K", &NetworkState::K)
        .def_readonly("slot", &NetworkState::slot)
        .def("gain", &NetworkState::gain)
        .def("coefficients", [](const NetworkState& s) { return s.h; });

    py::class_<Rng>(m, "Rng")
        .def(py::init<std::uint64_t>())
        .def("uniform", [](Rng& r) { return r.uniform(); })
        .def("normal", &Rng::normal);

    m.def("init_network", &init_network, py::arg("config"), py::arg("seed"));
    m.def("jakes_step", &jakes_step, py::arg("state"), py::arg("rho"), py::arg("rng"));
    m.def("bessel_j0", &bessel_j0);
    m.def("rho_from_doppler", &rho_from_doppler, py::arg("f_d"), py::arg("interval"));
    m.def("compute_sinr", &compute_sinr, py::arg("config"), py::arg("state"), py::arg("action"));
    m.def("quantize_feedback", &quantize_feedback, py::arg("sinr"), py::arg("T_threshold"),
          py::arg("M"));
    m.def("encode_observation",
          [](const NetworkConfig& cfg, const UserAction& a, int feedback) {
              return encode_observation(cfg, a, feedback).bits;
          });
    m.def("decode_observation", [](const NetworkConfig& cfg, std::vector<std::uint8_t> bits) {
        return decode_observation(cfg, Observation{std::move(bits)});
    });
    m.def("action_from_index", &action_from_index);
    m.def("action_to_index", &action_to_index);
    m.def("individual_rates", &individual_rates);
    m.def("sum_rate", &sum_rate_of);
    m.def("sum_log_rate", &sum_log_rate_of, py::arg("sinrs"), py::arg("rate_epsilon") = 1e-6);

    // --- wmmse -------------------------------------------------------------
    py::class_<WmmseOptions>(m, "WmmseOptions")
        .def(py::init<>())
        .def_readwrite("tol", &WmmseOptions::tol)
        .def_readwrite("max_iter", &WmmseOptions::max_iter)
        .def_readwrite("random_init", &WmmseOptions::random_init)
        .def_readwrite("init_seed", &WmmseOptions::init_seed)
        .def_readwrite("record_objective", &WmmseOptions::record_objective);

    py::class_<WmmseResult>(m, "WmmseResult")
        .def_readonly("powers", &WmmseResult::powers)
        .def_readonly("sum_rate", &WmmseResult::sum_rate)
        .def_readonly("mmse", &WmmseResult::mmse)
        .def_readonly("iterations", &WmmseResult::iterations)
        .def_readonly("converged", &WmmseResult::converged)
        .def_readonly("objective_trace", &WmmseResult::objective_trace);

    py::class_<BenchmarkResult>(m, "BenchmarkResult")
        .def_readonly("assignment", &BenchmarkResult::assignment)
        .def_readonly("powers", &BenchmarkResult::powers)
        .def_readonly("sum_rate", &BenchmarkResult::sum_rate)
        .def_readonly("evaluations", &BenchmarkResult::evaluations);

    m.def("wmmse_power", &wmmse_power, py::arg("gains"), py::arg("Pmax"), py::arg("sigma2"),
          py::arg("options") = WmmseOptions{});
    m.def("exhaustive_benchmark", &exhaustive_benchmark, py::arg("config"), py::arg("state"),
          py::arg("budget") = std::size_t{1} << 16, py::arg("options") = WmmseOptions{});
    m.def("sampled_benchmark", &sampled_benchmark, py::arg("config"), py::arg("state"),
          py::arg("n_samples"), py::arg("seed"), py::arg("options") = WmmseOptions{});

    // --- neural ------------------------------------------------------------
    py::enum_<HeadKind>(m, "HeadKind")
        .value("DuelingQ", HeadKind::DuelingQ)
        .value("SoftmaxActor", HeadKind::SoftmaxActor)
        .value("Critic", HeadKind::Critic);

    py::class_<NetworkSpec>(m, "NetworkSpec")
        .def(py::init<>())
        .def_readwrite("input_width", &NetworkSpec::input_width)
        .def_readwrite("T_hist", &NetworkSpec::T_hist)
        .def_readwrite("lstm_hidden", &NetworkSpec::lstm_hidden)
        .def_readwrite("head", &NetworkSpec::head)
        .def_readwrite("n_actions", &NetworkSpec::n_actions)
        .def_readwrite("adv_width", &NetworkSpec::adv_width)
        .def_readwrite("val_width", &NetworkSpec::val_width)
        .def_readwrite("critic_hidden", &NetworkSpec::critic_hidden)
        .def("describe", &NetworkSpec::describe);

    m.def("param_count", &param_count);
    m.def("init_params", &init_params, py::arg("spec"), py::arg("seed"));
    m.def("forward", [](const NetworkSpec& spec, const ParameterVector& params,
                        const std::vector<double>& state) {
        return forward(spec, params, state);
    });
    m.def("sgd_step", [](ParameterVector params, const GradientVector& grad, double alpha) {
        sgd_step(params, grad, alpha);
        return params;
    });
    m.def("fedavg", &fedavg);
    m.def("quantize_params", &quantize_params, py::arg("params"), py::arg("bits"));
    m.def("dequantize_params", &dequantize_params);
    m.def("quantize_roundtrip", [](const ParameterVector& p, int bits) {
        return dequantize_params(quantize_params(p, bits));
    });
    m.def("save_checkpoint", &save_checkpoint);
    m.def("load_checkpoint", &load_checkpoint);

    // --- agents / schedules --------------------------------------------------
    py::class_<EpsilonSchedule>(m, "EpsilonSchedule")
        .def(py::init<>())
        .def_readwrite("eps_max", &EpsilonSchedule::eps_max)
        .def_readwrite("eps_min", &EpsilonSchedule::eps_min)
        .def_readwrite("T_e", &EpsilonSchedule::T_e)
        .def_readwrite("test_eps", &EpsilonSchedule::test_eps);

    m.def("epsilon_at", &epsilon_at, py::arg("schedule"), py::arg("t"));

    // --- orchestration --------------------------------------------------------
    py::enum_<Regime>(m, "Regime")
        .value("CDRL", Regime::CDRL)
        .value("DDRL", Regime::DDRL)
        .value("FDRL", Regime::FDRL);

    py::enum_<AgentKind>(m, "AgentKind")
        .value("DQN", AgentKind::DQN)
        .value("AC", AgentKind::AC);

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("regime", &TrainConfig::regime)
        .def_readwrite("agent", &TrainConfig::agent)
        .def_readwrite("reward", &TrainConfig::reward)
        .def_readwrite("T_max", &TrainConfig::T_max)
        .def_readwrite("eps", &TrainConfig::eps)
        .def_readwrite("gamma", &TrainConfig::gamma)
        .def_readwrite("optimizer", &TrainConfig::optimizer)
        .def_readwrite("alpha", &TrainConfig::alpha)
        .def_readwrite("alpha_actor", &TrainConfig::alpha_actor)
        .def_readwrite("alpha_critic", &TrainConfig::alpha_critic)
        .def_readwrite("minibatch", &TrainConfig::minibatch)
        .def_readwrite("replay_capacity", &TrainConfig::replay_capacity)
        .def_readwrite("lstm_hidden", &TrainConfig::lstm_hidden)
        .def_readwrite("group_size", &TrainConfig::group_size)
        .def_readwrite("T_Fed", &TrainConfig::T_Fed)
        .def_readwrite("quant_bits", &TrainConfig::quant_bits)
        .def_readwrite("async_eps", &TrainConfig::async_eps)
        .def_readwrite("common_init", &TrainConfig::common_init)
        .def_readwrite("dynamic_channel", &TrainConfig::dynamic_channel)
        .def_readwrite("benchmark", &TrainConfig::benchmark)
        .def_readwrite("test_slots", &TrainConfig::test_slots)
        .def_readwrite("seed", &TrainConfig::seed);

    py::enum_<OptimizerKind>(m, "OptimizerKind")
        .value("Sgd", OptimizerKind::Sgd)
        .value("Adam", OptimizerKind::Adam);

    py::class_<MetricsRow>(m, "MetricsRow")
        .def_readonly("slot", &MetricsRow::slot)
        .def_readonly("epsilon", &MetricsRow::epsilon)
        .def_readonly("sum_rate", &MetricsRow::sum_rate)
        .def_readonly("sum_log_rate", &MetricsRow::sum_log_rate)
        .def_readonly("benchmark", &MetricsRow::benchmark)
        .def_readonly("rate", &MetricsRow::rate)
        .def_readonly("channel", &MetricsRow::channel)
        .def_readonly("power", &MetricsRow::power)
        .def_readonly("action", &MetricsRow::action);

    py::class_<MetricsLog>(m, "MetricsLog")
        .def_readonly("K", &MetricsLog::K)
        .def_readonly("rows", &MetricsLog::rows);

    py::class_<Counters>(m, "Counters")
        .def_readonly("experience_uploads", &Counters::experience_uploads)
        .def_readonly("param_upload_vectors", &Counters::param_upload_vectors)
        .def_readonly("param_download_vectors", &Counters::param_download_vectors)
        .def_readonly("fedavg_rounds", &Counters::fedavg_rounds)
        .def_readonly("updates", &Counters::updates)
        .def_readonly("update_skips", &Counters::update_skips)
        .def_readonly("benchmark_evals", &Counters::benchmark_evals)
        .def_readonly("upload_bits", &Counters::upload_bits)
        .def_readonly("sync_slots", &Counters::sync_slots);

    py::class_<Policy>(m, "Policy")
        .def_readonly("kind", &Policy::kind)
        .def_readonly("spec", &Policy::spec)
        .def_readonly("params", &Policy::params);

    py::class_<RunResult>(m, "RunResult")
        .def_readonly("log", &RunResult::log)
        .def_readonly("policies", &RunResult::policies)
        .def_readonly("counters", &RunResult::counters);

    py::class_<AccountRecord>(m, "AccountRecord")
        .def_readonly("cdrl_bits_per_100", &AccountRecord::cdrl_bits_per_100)
        .def_readonly("fdrl_bits_per_100", &AccountRecord::fdrl_bits_per_100)
        .def_readonly("ratio", &AccountRecord::ratio)
        .def_readonly("bits_per_param", &AccountRecord::bits_per_param)
        .def_readonly("params_per_model", &AccountRecord::params_per_model);

    m.def("dqn_spec", &dqn_spec);
    m.def("actor_spec", &actor_spec);
    m.def("critic_spec", &critic_spec);
    m.def("run_cdrl", &run_cdrl, py::arg("net"), py::arg("train"),
          py::call_guard<py::gil_scoped_release>());
    m.def("run_ddrl", &run_ddrl, py::arg("net"), py::arg("train"),
          py::call_guard<py::gil_scoped_release>());
    m.def("run_fdrl", &run_fdrl, py::arg("net"), py::arg("train"),
          py::call_guard<py::gil_scoped_release>());
    m.def("run_test",
          [](const NetworkConfig& net, const TrainConfig& train,
             const std::vector<Policy>& policies) { return run_test(net, train, policies); },
          py::call_guard<py::gil_scoped_release>());
    m.def("info_exchange_account", &info_exchange_account, py::arg("net"), py::arg("train"),
          py::arg("history_based_state") = false);

    // --- experiment -----------------------------------------------------------
    py::class_<ExperimentConfig>(m, "ExperimentConfig")
        .def(py::init<>())
        .def_readwrite("net", &ExperimentConfig::net)
        .def_readwrite("train", &ExperimentConfig::train)
        .def_readwrite("seeds", &ExperimentConfig::seeds)
        .def_readwrite("out_dir", &ExperimentConfig::out_dir)
        .def_readwrite("window", &ExperimentConfig::window);

    m.def("default_config", &default_config);
    m.def("parse_config", &parse_config);
    m.def("render_config", &render_config);
    m.def("run_experiment", &run_experiment, py::call_guard<py::gil_scoped_release>());
    m.def("moving_average", &moving_average);
}
