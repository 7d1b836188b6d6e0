#include "marlin/env.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace marlin {

namespace {

[[noreturn]] void bad_field(const std::string& field, const std::string& why) {
    throw std::invalid_argument(field + ": " + why);
}

}  // namespace

void NetworkConfig::validate() const {
    if (K < 1) bad_field("K", "must be >= 1");
    if (Nc < 1) bad_field("Nc", "must be >= 1");
    if (Np < 2) bad_field("Np", "must be >= 2");
    if (M < 1) bad_field("M", "must be >= 1");
    if (!(Pmax > 0)) bad_field("Pmax", "must be > 0");
    if (!(sigma2 > 0)) bad_field("sigma2", "must be > 0");
    if (!(T_threshold > 0)) bad_field("T_threshold", "must be > 0");
    if (T_hist < 1) bad_field("T_hist", "must be >= 1");
    if (!(rho >= 0.0 && rho <= 1.0)) bad_field("rho", "must be in [0, 1]");
    if (T_v < 1) bad_field("T_v", "must be >= 1");
    if (!(rate_epsilon > 0)) bad_field("rate_epsilon", "must be > 0");
}

double NetworkConfig::power_level(int i) const {
    if (i < 1 || i > Np) bad_field("power_idx", "out of range");
    return static_cast<double>(i - 1) / static_cast<double>(Np - 1) * Pmax;
}

UserAction action_from_index(const NetworkConfig& cfg, int index) {
    if (index < 0 || index >= cfg.n_actions())
        bad_field("action", "index " + std::to_string(index) + " out of range");
    UserAction a;
    if (index == 0) return a;  // no transmission
    int levels = cfg.reduced_actions ? cfg.Np - 1 : cfg.Np;
    int base = cfg.reduced_actions ? 2 : 1;  // reduced set skips the zero level
    a.transmit = true;
    a.channel = (index - 1) / levels + 1;
    a.power_idx = (index - 1) % levels + base;
    return a;
}

int action_to_index(const NetworkConfig& cfg, const UserAction& a) {
    if (!a.transmit) return 0;
    if (a.channel < 1 || a.channel > cfg.Nc) bad_field("channel", "out of range");
    if (a.power_idx < 1 || a.power_idx > cfg.Np) bad_field("power_idx", "out of range");
    int levels = cfg.reduced_actions ? cfg.Np - 1 : cfg.Np;
    int base = cfg.reduced_actions ? 2 : 1;
    if (cfg.reduced_actions && a.power_idx < 2)
        bad_field("power_idx", "zero-power transmit excluded by reduced_actions");
    return 1 + (a.channel - 1) * levels + (a.power_idx - base);
}

NetworkState init_network(const NetworkConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(mix_seed(seed, 0x656e76ULL));  // "env"
    NetworkState st;
    st.K = cfg.K;
    st.slot = 0;
    st.h.resize(cfg.Nc);
    for (int n = 0; n < cfg.Nc; ++n) {
        st.h[n].resize(static_cast<std::size_t>(cfg.K) * cfg.K);
        for (auto& v : st.h[n]) v = rng.cnormal();
    }
    return st;
}

NetworkState jakes_step(const NetworkState& state, double rho, Rng& rng) {
    if (!(rho >= 0.0 && rho <= 1.0)) bad_field("rho", "must be in [0, 1]");
    NetworkState next = state;
    double innov = std::sqrt(std::max(0.0, 1.0 - rho * rho));
    for (auto& mat : next.h)
        for (auto& v : mat) v = rho * v + innov * rng.cnormal();
    next.slot = state.slot + 1;
    return next;
}

double bessel_j0(double x) {
    x = std::fabs(x);
    if (x < 12.0) {
        // ascending series; alternating, so the accumulated cancellation at
        // x = 12 stays below ~1e-12 in double precision
        double term = 1.0, sum = 1.0;
        double q = 0.25 * x * x;
        for (int k = 1; k <= 60; ++k) {
            term *= -q / (static_cast<double>(k) * k);
            sum += term;
            if (std::fabs(term) < 1e-18 * std::fabs(sum) + 1e-300) break;
        }
        return sum;
    }
    // Hankel asymptotic expansion, truncated at the smallest term (the series
    // diverges past it); at x >= 12 the remainder is below 1e-10
    double p = 1.0, q = -0.125 / x;
    double pterm = 1.0, qterm = q;
    double inv8x2 = 1.0 / (64.0 * x * x);
    for (int k = 1; k <= 40; ++k) {
        double a = 4.0 * k - 3.0, b = 4.0 * k - 1.0;
        double next_p = pterm * (-a * a * b * b * inv8x2 / ((2.0 * k - 1.0) * 2.0 * k));
        double c = 4.0 * k - 1.0, d = 4.0 * k + 1.0;
        double next_q = qterm * (-c * c * d * d * inv8x2 / (2.0 * k * (2.0 * k + 1.0)));
        if (std::fabs(next_p) >= std::fabs(pterm) || std::fabs(next_q) >= std::fabs(qterm))
            break;
        pterm = next_p;
        qterm = next_q;
        p += pterm;
        q += qterm;
        if (std::fabs(pterm) < 1e-17 && std::fabs(qterm) < 1e-17) break;
    }
    double chi = x - 0.25 * M_PI;
    return std::sqrt(2.0 / (M_PI * x)) * (p * std::cos(chi) - q * std::sin(chi));
}

double rho_from_doppler(double f_d, double interval) {
    if (!(f_d >= 0)) bad_field("f_d", "must be >= 0");
    if (!(interval >= 0)) bad_field("interval", "must be >= 0");
    return bessel_j0(2.0 * M_PI * f_d * interval);
}

std::vector<double> compute_sinr(const NetworkConfig& cfg, const NetworkState& state,
                                 const JointAction& action) {
    if (static_cast<int>(action.size()) != cfg.K)
        bad_field("action", "joint action size != K");
    std::vector<double> sinr(cfg.K, 0.0);
    for (int k = 0; k < cfg.K; ++k) {
        const UserAction& ak = action[k];
        if (!ak.transmit) continue;
        int n = ak.channel - 1;
        if (n < 0 || n >= cfg.Nc) bad_field("channel", "out of range");
        double pk = cfg.power_level(ak.power_idx);
        double interference = 0.0;
        for (int j = 0; j < cfg.K; ++j) {
            if (j == k) continue;
            const UserAction& aj = action[j];
            if (!aj.transmit || aj.channel != ak.channel) continue;
            interference += cfg.power_level(aj.power_idx) * state.gain(n, k, j);
        }
        sinr[k] = pk * state.gain(n, k, k) / (interference + cfg.sigma2);
    }
    return sinr;
}

int quantize_feedback(double sinr, double T_threshold, int M) {
    if (!(sinr >= 0)) bad_field("sinr", "must be >= 0");
    if (!(T_threshold > 0)) bad_field("T_threshold", "must be > 0");
    if (M < 1) bad_field("M", "must be >= 1");
    double level = std::floor(sinr / T_threshold);
    double cap = std::pow(2.0, M) - 1.0;
    return static_cast<int>(std::min(level, cap));
}

Observation encode_observation(const NetworkConfig& cfg, const UserAction& action,
                               int feedback) {
    Observation obs;
    obs.bits.assign(cfg.obs_width(), 0);
    if (!action.transmit) {
        obs.bits[0] = 1;  // every other entry stays 0
        return obs;
    }
    if (action.channel < 1 || action.channel > cfg.Nc) bad_field("channel", "out of range");
    if (action.power_idx < 1 || action.power_idx > cfg.Np) bad_field("power_idx", "out of range");
    if (feedback < 0 || feedback >= (1 << cfg.M)) bad_field("feedback", "needs more than M bits");
    obs.bits[action.channel] = 1;             // entry n+1
    obs.bits[cfg.Nc + action.power_idx] = 1;  // entry Nc+i+1
    for (int j = 0; j < cfg.M; ++j)
        obs.bits[1 + cfg.Nc + cfg.Np + j] =
            static_cast<std::uint8_t>((feedback >> (cfg.M - 1 - j)) & 1);
    return obs;
}

std::pair<UserAction, int> decode_observation(const NetworkConfig& cfg, const Observation& obs) {
    if (static_cast<int>(obs.bits.size()) != cfg.obs_width())
        bad_field("observation", "wrong width");
    UserAction a;
    if (obs.bits[0]) return {a, 0};
    a.transmit = true;
    for (int n = 1; n <= cfg.Nc; ++n)
        if (obs.bits[n]) a.channel = n;
    for (int i = 1; i <= cfg.Np; ++i)
        if (obs.bits[cfg.Nc + i]) a.power_idx = i;
    int feedback = 0;
    for (int j = 0; j < cfg.M; ++j)
        feedback = (feedback << 1) | obs.bits[1 + cfg.Nc + cfg.Np + j];
    return {a, feedback};
}

void AgentState::push(Observation obs) {
    window.erase(window.begin());
    window.push_back(std::move(obs));
}

std::vector<double> AgentState::flatten() const {
    std::vector<double> out;
    out.reserve(window.size() * (window.empty() ? 0 : window[0].bits.size()));
    for (const auto& obs : window)
        for (auto b : obs.bits) out.push_back(static_cast<double>(b));
    return out;
}

std::vector<std::uint8_t> AgentState::flat_bits() const {
    std::vector<std::uint8_t> out;
    out.reserve(window.size() * (window.empty() ? 0 : window[0].bits.size()));
    for (const auto& obs : window) out.insert(out.end(), obs.bits.begin(), obs.bits.end());
    return out;
}

AgentState initial_agent_state(const NetworkConfig& cfg) {
    AgentState st;
    Observation silent = encode_observation(cfg, UserAction{}, 0);
    st.window.assign(cfg.T_hist, silent);
    return st;
}

double rate_from_sinr(double sinr) { return std::log2(1.0 + sinr); }

std::vector<double> individual_rates(const std::vector<double>& sinrs) {
    std::vector<double> rates(sinrs.size());
    for (std::size_t k = 0; k < sinrs.size(); ++k) rates[k] = rate_from_sinr(sinrs[k]);
    return rates;
}

double sum_rate_of(const std::vector<double>& sinrs) {
    double s = 0.0;
    for (double v : sinrs) s += rate_from_sinr(v);
    return s;
}

double sum_log_rate_of(const std::vector<double>& sinrs, double rate_epsilon) {
    // silent users would contribute log(0); clip their rate at the floor
    double s = 0.0;
    for (double v : sinrs) {
        double rate = rate_from_sinr(v);
        s += std::log(rate > rate_epsilon ? rate : rate_epsilon);
    }
    return s;
}

Rewards compute_reward(const NetworkConfig& cfg, const std::vector<double>& sinrs,
                       RewardMode mode) {
    Rewards r;
    r.sum_rate = sum_rate_of(sinrs);
    r.sum_log_rate = sum_log_rate_of(sinrs, cfg.rate_epsilon);
    switch (mode) {
        case RewardMode::IndividualRate:
            r.per_user = individual_rates(sinrs);
            break;
        case RewardMode::SumRate:
            r.per_user.assign(sinrs.size(), r.sum_rate);
            break;
        case RewardMode::SumLogRate:
            r.per_user.assign(sinrs.size(), r.sum_log_rate);
            break;
    }
    return r;
}

StepResult step(const NetworkConfig& cfg, const NetworkState& state, const JointAction& action,
                RewardMode mode, Rng& rng, bool dynamic_channel) {
    StepResult res;
    res.sinrs = compute_sinr(cfg, state, action);
    res.rewards = compute_reward(cfg, res.sinrs, mode);
    res.observations.reserve(cfg.K);
    for (int k = 0; k < cfg.K; ++k) {
        int fb = quantize_feedback(res.sinrs[k], cfg.T_threshold, cfg.M);
        res.observations.push_back(encode_observation(cfg, action[k], fb));
    }
    std::uint64_t next_slot = state.slot + 1;
    if (dynamic_channel && next_slot % static_cast<std::uint64_t>(cfg.T_v) == 0) {
        res.next = jakes_step(state, cfg.rho, rng);
    } else {
        res.next = state;
        res.next.slot = next_slot;
    }
    return res;
}

}  // namespace marlin
