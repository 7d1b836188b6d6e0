#include "marlin/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace marlin {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

double num_value(const std::string& v, int line) {
    std::size_t used = 0;
    double x;
    try {
        x = std::stod(v, &used);
    } catch (const std::exception&) {
        throw ParseError(line, "expected a number, got '" + v + "'");
    }
    if (used != v.size()) throw ParseError(line, "trailing characters in number '" + v + "'");
    return x;
}

std::int64_t int_value(const std::string& v, int line) {
    double x = num_value(v, line);
    auto i = static_cast<std::int64_t>(x);
    if (static_cast<double>(i) != x) throw ParseError(line, "expected an integer, got '" + v + "'");
    return i;
}

bool bool_value(const std::string& v, int line) {
    std::string s = lower(v);
    if (s == "true" || s == "1" || s == "on" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "off" || s == "no") return false;
    throw ParseError(line, "expected a boolean, got '" + v + "'");
}

Regime regime_value(const std::string& v, int line) {
    std::string s = lower(v);
    if (s == "cdrl") return Regime::CDRL;
    if (s == "ddrl") return Regime::DDRL;
    if (s == "fdrl") return Regime::FDRL;
    throw ParseError(line, "regime must be cdrl, ddrl or fdrl");
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

const char* regime_name(Regime r) {
    switch (r) {
        case Regime::CDRL: return "cdrl";
        case Regime::DDRL: return "ddrl";
        case Regime::FDRL: return "fdrl";
    }
    return "cdrl";
}

struct Line {
    int number;
    std::string key;
    std::string value;
};

std::vector<Line> tokenize(const std::string& text) {
    std::vector<Line> lines;
    std::istringstream in(text);
    std::string raw;
    int number = 0;
    while (std::getline(in, raw)) {
        ++number;
        std::string s = raw;
        std::size_t hash = s.find('#');
        if (hash != std::string::npos) s = s.substr(0, hash);
        s = trim(s);
        if (s.empty()) continue;
        std::size_t eq = s.find('=');
        if (eq == std::string::npos) throw ParseError(number, "expected 'key = value'");
        std::string key = trim(s.substr(0, eq));
        std::string value = trim(s.substr(eq + 1));
        if (key.empty()) throw ParseError(number, "missing key");
        if (value.empty()) throw ParseError(number, "missing value for '" + key + "'");
        lines.push_back({number, key, value});
    }
    return lines;
}

}  // namespace

void ExperimentConfig::validate() const {
    net.validate();
    train.validate(net);
    if (seeds.empty()) throw std::invalid_argument("seeds: need at least one");
    if (window < 1) throw std::invalid_argument("window: must be >= 1");
}

ExperimentConfig default_config(Regime regime) {
    ExperimentConfig cfg;
    cfg.train.regime = regime;
    if (regime == Regime::CDRL) {
        cfg.train.optimizer = OptimizerKind::Adam;
        cfg.train.alpha = 0.001;
        cfg.train.alpha_actor = 0.0005;
        cfg.train.alpha_critic = 0.001;
        cfg.train.eps = EpsilonSchedule{0.2, 0.01, 320000, 0.1};
        cfg.train.minibatch = 12;
        cfg.train.replay_capacity = 600000;
    } else {
        cfg.train.optimizer = OptimizerKind::Sgd;
        cfg.train.alpha = 0.01;
        cfg.train.alpha_actor = 0.001;
        cfg.train.alpha_critic = 0.001;
        cfg.train.eps = EpsilonSchedule{0.5, 0.05, 500000, 0.1};
        cfg.train.minibatch = 2;
        cfg.train.replay_capacity = 100000;
    }
    cfg.train.T_max = 400000;
    cfg.train.group_size = cfg.net.K;
    cfg.train.T_Fed = 1;
    return cfg;
}

ExperimentConfig parse_config(const std::string& text) {
    auto lines = tokenize(text);

    Regime regime = Regime::CDRL;
    for (const auto& ln : lines)
        if (lower(ln.key) == "regime") regime = regime_value(ln.value, ln.number);
    ExperimentConfig cfg = default_config(regime);

    bool group_set = false;
    double f_d = -1.0, slot_duration = -1.0;

    for (const auto& ln : lines) {
        const std::string key = ln.key;
        const std::string& v = ln.value;
        int n = ln.number;
        auto& net = cfg.net;
        auto& tr = cfg.train;
        if (key == "regime") {
            // handled in the first pass
        } else if (key == "K") net.K = static_cast<int>(int_value(v, n));
        else if (key == "Nc") net.Nc = static_cast<int>(int_value(v, n));
        else if (key == "Np") net.Np = static_cast<int>(int_value(v, n));
        else if (key == "M") net.M = static_cast<int>(int_value(v, n));
        else if (key == "Pmax") net.Pmax = num_value(v, n);
        else if (key == "sigma2") net.sigma2 = num_value(v, n);
        else if (key == "T_threshold") net.T_threshold = num_value(v, n);
        else if (key == "T_hist") net.T_hist = static_cast<int>(int_value(v, n));
        else if (key == "rho") net.rho = num_value(v, n);
        else if (key == "T_v") net.T_v = static_cast<int>(int_value(v, n));
        else if (key == "rate_epsilon") net.rate_epsilon = num_value(v, n);
        else if (key == "reduced_actions") net.reduced_actions = bool_value(v, n);
        else if (key == "f_d") f_d = num_value(v, n);
        else if (key == "slot_duration") slot_duration = num_value(v, n);
        else if (key == "agent") {
            std::string s = lower(v);
            if (s == "dqn") tr.agent = AgentKind::DQN;
            else if (s == "ac") tr.agent = AgentKind::AC;
            else throw ParseError(n, "agent must be dqn or ac");
        } else if (key == "reward") {
            std::string s = lower(v);
            if (s == "individual") tr.reward = RewardMode::IndividualRate;
            else if (s == "sum_rate") tr.reward = RewardMode::SumRate;
            else if (s == "sum_log_rate") tr.reward = RewardMode::SumLogRate;
            else throw ParseError(n, "reward must be individual, sum_rate or sum_log_rate");
        } else if (key == "optimizer") {
            std::string s = lower(v);
            if (s == "sgd") tr.optimizer = OptimizerKind::Sgd;
            else if (s == "adam") tr.optimizer = OptimizerKind::Adam;
            else throw ParseError(n, "optimizer must be sgd or adam");
        } else if (key == "T_max") tr.T_max = int_value(v, n);
        else if (key == "T_e") tr.eps.T_e = int_value(v, n);
        else if (key == "eps_max") tr.eps.eps_max = num_value(v, n);
        else if (key == "eps_min") tr.eps.eps_min = num_value(v, n);
        else if (key == "test_eps") tr.eps.test_eps = num_value(v, n);
        else if (key == "gamma") tr.gamma = num_value(v, n);
        else if (key == "alpha") tr.alpha = num_value(v, n);
        else if (key == "alpha_actor") tr.alpha_actor = num_value(v, n);
        else if (key == "alpha_critic") tr.alpha_critic = num_value(v, n);
        else if (key == "minibatch") tr.minibatch = static_cast<int>(int_value(v, n));
        else if (key == "replay_capacity")
            tr.replay_capacity = static_cast<std::size_t>(int_value(v, n));
        else if (key == "lstm_hidden") tr.lstm_hidden = static_cast<int>(int_value(v, n));
        else if (key == "adv_width") tr.adv_width = static_cast<int>(int_value(v, n));
        else if (key == "val_width") tr.val_width = static_cast<int>(int_value(v, n));
        else if (key == "critic_hidden") tr.critic_hidden = static_cast<int>(int_value(v, n));
        else if (key == "G") {
            tr.group_size = static_cast<int>(int_value(v, n));
            group_set = true;
        } else if (key == "T_Fed") tr.T_Fed = int_value(v, n);
        else if (key == "quant_bits") tr.quant_bits = static_cast<int>(int_value(v, n));
        else if (key == "async_eps") tr.async_eps = bool_value(v, n);
        else if (key == "common_init") tr.common_init = bool_value(v, n);
        else if (key == "dynamic_channel") tr.dynamic_channel = bool_value(v, n);
        else if (key == "aligned_minibatch") tr.aligned_minibatch = bool_value(v, n);
        else if (key == "ac_argmax") tr.ac_argmax = bool_value(v, n);
        else if (key == "target_sync") tr.target_sync = static_cast<int>(int_value(v, n));
        else if (key == "benchmark") tr.benchmark = bool_value(v, n);
        else if (key == "test_slots") tr.test_slots = int_value(v, n);
        else if (key == "window") cfg.window = static_cast<int>(int_value(v, n));
        else if (key == "seeds") {
            cfg.seeds.clear();
            std::istringstream ss(v);
            std::string part;
            while (std::getline(ss, part, ',')) {
                part = trim(part);
                if (part.empty()) throw ParseError(n, "empty seed entry");
                cfg.seeds.push_back(static_cast<std::uint64_t>(int_value(part, n)));
            }
            if (cfg.seeds.empty()) throw ParseError(n, "seeds: need at least one");
        } else {
            throw ParseError(n, "unknown key '" + key + "'");
        }
    }

    if (!group_set) cfg.train.group_size = cfg.net.K;
    if (f_d >= 0.0 || slot_duration >= 0.0) {
        if (f_d < 0.0 || slot_duration < 0.0)
            throw ParseError(0, "f_d and slot_duration must be given together");
        cfg.net.rho = rho_from_doppler(f_d, slot_duration);
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str());
}

std::string render_config(const ExperimentConfig& cfg) {
    std::ostringstream out;
    const auto& net = cfg.net;
    const auto& tr = cfg.train;
    out << "regime = " << regime_name(tr.regime) << "\n";
    out << "agent = " << (tr.agent == AgentKind::DQN ? "dqn" : "ac") << "\n";
    out << "reward = "
        << (tr.reward == RewardMode::IndividualRate
                ? "individual"
                : tr.reward == RewardMode::SumRate ? "sum_rate" : "sum_log_rate")
        << "\n";
    out << "K = " << net.K << "\n";
    out << "Nc = " << net.Nc << "\n";
    out << "Np = " << net.Np << "\n";
    out << "M = " << net.M << "\n";
    out << "Pmax = " << fmt_double(net.Pmax) << "\n";
    out << "sigma2 = " << fmt_double(net.sigma2) << "\n";
    out << "T_threshold = " << fmt_double(net.T_threshold) << "\n";
    out << "T_hist = " << net.T_hist << "\n";
    out << "rho = " << fmt_double(net.rho) << "\n";
    out << "T_v = " << net.T_v << "\n";
    out << "rate_epsilon = " << fmt_double(net.rate_epsilon) << "\n";
    out << "reduced_actions = " << (net.reduced_actions ? "true" : "false") << "\n";
    out << "T_max = " << tr.T_max << "\n";
    out << "T_e = " << tr.eps.T_e << "\n";
    out << "eps_max = " << fmt_double(tr.eps.eps_max) << "\n";
    out << "eps_min = " << fmt_double(tr.eps.eps_min) << "\n";
    out << "test_eps = " << fmt_double(tr.eps.test_eps) << "\n";
    out << "gamma = " << fmt_double(tr.gamma) << "\n";
    out << "optimizer = " << (tr.optimizer == OptimizerKind::Adam ? "adam" : "sgd") << "\n";
    out << "alpha = " << fmt_double(tr.alpha) << "\n";
    out << "alpha_actor = " << fmt_double(tr.alpha_actor) << "\n";
    out << "alpha_critic = " << fmt_double(tr.alpha_critic) << "\n";
    out << "minibatch = " << tr.minibatch << "\n";
    out << "replay_capacity = " << tr.replay_capacity << "\n";
    out << "lstm_hidden = " << tr.lstm_hidden << "\n";
    out << "adv_width = " << tr.adv_width << "\n";
    out << "val_width = " << tr.val_width << "\n";
    out << "critic_hidden = " << tr.critic_hidden << "\n";
    out << "G = " << tr.group_size << "\n";
    out << "T_Fed = " << tr.T_Fed << "\n";
    out << "quant_bits = " << tr.quant_bits << "\n";
    out << "async_eps = " << (tr.async_eps ? "true" : "false") << "\n";
    out << "common_init = " << (tr.common_init ? "true" : "false") << "\n";
    out << "dynamic_channel = " << (tr.dynamic_channel ? "true" : "false") << "\n";
    out << "aligned_minibatch = " << (tr.aligned_minibatch ? "true" : "false") << "\n";
    out << "ac_argmax = " << (tr.ac_argmax ? "true" : "false") << "\n";
    out << "target_sync = " << tr.target_sync << "\n";
    out << "benchmark = " << (tr.benchmark ? "true" : "false") << "\n";
    out << "test_slots = " << tr.test_slots << "\n";
    out << "window = " << cfg.window << "\n";
    out << "seeds = ";
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i)
        out << (i ? "," : "") << cfg.seeds[i];
    out << "\n";
    return out.str();
}

std::string metrics_path(const std::string& out_dir, std::uint64_t seed) {
    return out_dir + "/metrics_seed" + std::to_string(seed) + ".csv";
}

std::string test_metrics_path(const std::string& out_dir, std::uint64_t seed) {
    return out_dir + "/test_metrics_seed" + std::to_string(seed) + ".csv";
}

std::string policy_path(const std::string& out_dir, std::uint64_t seed, int user) {
    return out_dir + "/policy_seed" + std::to_string(seed) + "_user" + std::to_string(user) +
           ".ckpt";
}

namespace {

RunResult dispatch_regime(const NetworkConfig& net, const TrainConfig& train) {
    switch (train.regime) {
        case Regime::CDRL: return run_cdrl(net, train);
        case Regime::DDRL: return run_ddrl(net, train);
        case Regime::FDRL: return run_fdrl(net, train);
    }
    throw std::logic_error("unreachable regime");
}

}  // namespace

int run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    std::filesystem::create_directories(cfg.out_dir);
    {
        std::ofstream f(cfg.out_dir + "/config_used.cfg", std::ios::trunc);
        f << render_config(cfg);
    }
    std::vector<MetricsLog> logs;
    std::vector<std::string> labels;
    for (std::uint64_t seed : cfg.seeds) {
        TrainConfig train = cfg.train;
        train.seed = seed;
        RunResult res = dispatch_regime(cfg.net, train);
        write_metrics_csv(metrics_path(cfg.out_dir, seed), res.log);
        for (int k = 0; k < cfg.net.K; ++k)
            save_checkpoint(policy_path(cfg.out_dir, seed, k), res.policies[k].spec,
                            res.policies[k].params);
        logs.push_back(std::move(res.log));
        labels.push_back("seed" + std::to_string(seed));
    }
    Summary summary = summarize(logs, labels, cfg.window);
    write_summary_csv(cfg.out_dir + "/summary.csv", summary);
    return 0;
}

std::vector<Policy> load_policies(const ExperimentConfig& cfg, std::uint64_t seed) {
    NetworkSpec spec = cfg.train.agent == AgentKind::DQN ? dqn_spec(cfg.net, cfg.train)
                                                         : actor_spec(cfg.net, cfg.train);
    std::vector<Policy> policies;
    for (int k = 0; k < cfg.net.K; ++k) {
        Policy p;
        p.kind = cfg.train.agent;
        p.spec = spec;
        p.params = load_checkpoint(policy_path(cfg.out_dir, seed, k), spec);
        policies.push_back(std::move(p));
    }
    return policies;
}

int run_test_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    for (std::uint64_t seed : cfg.seeds) {
        auto policies = load_policies(cfg, seed);
        TrainConfig train = cfg.train;
        train.seed = seed;
        MetricsLog log = run_test(cfg.net, train, policies);
        write_metrics_csv(test_metrics_path(cfg.out_dir, seed), log);
    }
    return 0;
}

}  // namespace marlin
