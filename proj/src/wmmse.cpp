#include "marlin/wmmse.hpp"

#include <cmath>
#include <stdexcept>

#include "marlin/rng.hpp"

namespace marlin {

namespace {

// weighted-MSE objective sum_k (w_k e_k - log w_k) with
// e_k = (u_k|h_kk|v_k - 1)^2 + sum_{j!=k} (u_k|h_kj|v_j)^2 + sigma2 u_k^2
double wmmse_objective(const std::vector<std::vector<double>>& amp, double sigma2,
                       const std::vector<double>& v, const std::vector<double>& u,
                       const std::vector<double>& w) {
    std::size_t K = v.size();
    double obj = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        double e = (u[k] * amp[k][k] * v[k] - 1.0) * (u[k] * amp[k][k] * v[k] - 1.0);
        for (std::size_t j = 0; j < K; ++j) {
            if (j == k) continue;
            double t = u[k] * amp[k][j] * v[j];
            e += t * t;
        }
        e += sigma2 * u[k] * u[k];
        obj += w[k] * e - std::log(w[k]);
    }
    return obj;
}

double sum_rate_from_powers(const std::vector<std::vector<double>>& gains, double sigma2,
                            const std::vector<double>& powers) {
    std::size_t K = powers.size();
    double s = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        double interference = 0.0;
        for (std::size_t j = 0; j < K; ++j)
            if (j != k) interference += powers[j] * gains[k][j];
        s += std::log2(1.0 + powers[k] * gains[k][k] / (interference + sigma2));
    }
    return s;
}

}  // namespace

namespace {

WmmseResult wmmse_power_single(const std::vector<std::vector<double>>& gains, double Pmax,
                               double sigma2, const WmmseOptions& opt) {
    std::size_t K = gains.size();
    if (K == 0) throw std::invalid_argument("gains: empty");
    for (const auto& row : gains) {
        if (row.size() != K) throw std::invalid_argument("gains: not square");
        for (double g : row)
            if (!(g >= 0)) throw std::invalid_argument("gains: negative entry");
    }
    if (!(Pmax > 0)) throw std::invalid_argument("Pmax: must be > 0");
    if (!(sigma2 > 0)) throw std::invalid_argument("sigma2: must be > 0");

    std::vector<std::vector<double>> amp(K, std::vector<double>(K));
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t j = 0; j < K; ++j) amp[k][j] = std::sqrt(gains[k][j]);

    double vmax = std::sqrt(Pmax);
    std::vector<double> v(K, vmax), u(K), w(K);
    if (opt.random_init) {
        Rng rng(mix_seed(opt.init_seed, 0x776d6d7365ULL));
        for (auto& x : v) x = rng.uniform() * vmax;
    }

    auto update_u = [&](void) {
        for (std::size_t k = 0; k < K; ++k) {
            double denom = sigma2;
            for (std::size_t j = 0; j < K; ++j) denom += gains[k][j] * v[j] * v[j];
            u[k] = amp[k][k] * v[k] / denom;
        }
    };
    auto update_w = [&](void) {
        for (std::size_t k = 0; k < K; ++k) w[k] = 1.0 / (1.0 - u[k] * amp[k][k] * v[k]);
    };

    update_u();
    update_w();

    WmmseResult res;
    if (opt.record_objective)
        res.objective_trace.push_back(wmmse_objective(amp, sigma2, v, u, w));

    int it = 0;
    bool converged = false;
    for (; it < opt.max_iter; ++it) {
        double max_dv = 0.0;
        std::vector<double> v_new(K);
        for (std::size_t k = 0; k < K; ++k) {
            double denom = 0.0;
            for (std::size_t j = 0; j < K; ++j)
                denom += w[j] * u[j] * u[j] * gains[j][k];
            double vk = denom > 0.0 ? w[k] * u[k] * amp[k][k] / denom : 0.0;
            v_new[k] = std::min(std::max(vk, 0.0), vmax);
        }
        for (std::size_t k = 0; k < K; ++k) {
            max_dv = std::max(max_dv, std::fabs(v_new[k] - v[k]));
            v[k] = v_new[k];
        }
        update_u();
        update_w();
        if (opt.record_objective)
            res.objective_trace.push_back(wmmse_objective(amp, sigma2, v, u, w));
        if (max_dv < opt.tol) {
            converged = true;
            ++it;
            break;
        }
    }

    res.iterations = it;
    res.converged = converged;
    res.powers.resize(K);
    res.mmse.resize(K);
    for (std::size_t k = 0; k < K; ++k) {
        res.powers[k] = v[k] * v[k];
        res.mmse[k] = 1.0 - u[k] * amp[k][k] * v[k];
    }
    res.sum_rate = sum_rate_from_powers(gains, sigma2, res.powers);
    return res;
}

}  // namespace

WmmseOptions benchmark_wmmse_options() {
    WmmseOptions opt;
    opt.restarts = 4;
    return opt;
}

WmmseResult wmmse_power(const std::vector<std::vector<double>>& gains, double Pmax,
                        double sigma2, const WmmseOptions& opt) {
    WmmseResult best = wmmse_power_single(gains, Pmax, sigma2, opt);
    for (int r = 1; r <= opt.restarts; ++r) {
        WmmseOptions ropt = opt;
        ropt.random_init = true;
        ropt.init_seed = mix_seed(opt.init_seed, static_cast<std::uint64_t>(r));
        WmmseResult res = wmmse_power_single(gains, Pmax, sigma2, ropt);
        if (res.sum_rate > best.sum_rate) best = std::move(res);
    }
    return best;
}

std::vector<std::vector<double>> assignment_gains(const NetworkConfig& cfg,
                                                  const NetworkState& state,
                                                  const std::vector<int>& assignment) {
    if (static_cast<int>(assignment.size()) != cfg.K)
        throw std::invalid_argument("assignment: size != K");
    std::vector<std::vector<double>> gains(cfg.K, std::vector<double>(cfg.K, 0.0));
    for (int k = 0; k < cfg.K; ++k) {
        int n = assignment[k] - 1;
        if (n < 0 || n >= cfg.Nc) throw std::invalid_argument("assignment: channel out of range");
        for (int j = 0; j < cfg.K; ++j)
            if (j == k || assignment[j] == assignment[k]) gains[k][j] = state.gain(n, k, j);
    }
    return gains;
}

double assignment_sum_rate(const NetworkConfig& cfg, const NetworkState& state,
                           const std::vector<int>& assignment,
                           const std::vector<double>& powers) {
    auto gains = assignment_gains(cfg, state, assignment);
    return sum_rate_from_powers(gains, cfg.sigma2, powers);
}

namespace {

BenchmarkResult best_over_assignments(const NetworkConfig& cfg, const NetworkState& state,
                                      const std::vector<std::vector<int>>& assignments,
                                      const WmmseOptions& opt) {
    BenchmarkResult best;
    best.sum_rate = -1.0;
    for (const auto& assignment : assignments) {
        auto gains = assignment_gains(cfg, state, assignment);
        auto res = wmmse_power(gains, cfg.Pmax, cfg.sigma2, opt);
        ++best.evaluations;
        if (res.sum_rate > best.sum_rate) {  // ties keep the earlier (lexicographic) one
            best.sum_rate = res.sum_rate;
            best.assignment = assignment;
            best.powers = res.powers;
        }
    }
    return best;
}

}  // namespace

BenchmarkResult exhaustive_benchmark(const NetworkConfig& cfg, const NetworkState& state,
                                     std::size_t budget, const WmmseOptions& opt) {
    double count = std::pow(static_cast<double>(cfg.Nc), cfg.K);
    if (count > static_cast<double>(budget))
        throw std::runtime_error("exhaustive benchmark: Nc^K = " +
                                 std::to_string(static_cast<std::uint64_t>(count)) +
                                 " assignments exceed the budget of " + std::to_string(budget) +
                                 "; use sampled_benchmark instead");
    std::size_t total = static_cast<std::size_t>(count);

    // lexicographic enumeration, user 0 most significant
    std::vector<std::vector<int>> assignments;
    assignments.reserve(total);
    std::vector<int> cur(cfg.K, 1);
    for (std::size_t idx = 0; idx < total; ++idx) {
        assignments.push_back(cur);
        for (int k = cfg.K - 1; k >= 0; --k) {
            if (++cur[k] <= cfg.Nc) break;
            cur[k] = 1;
        }
    }
    return best_over_assignments(cfg, state, assignments, opt);
}

BenchmarkResult sampled_benchmark(const NetworkConfig& cfg, const NetworkState& state,
                                  std::size_t n_samples, std::uint64_t seed,
                                  const WmmseOptions& opt) {
    if (n_samples == 0) throw std::invalid_argument("n_samples: must be >= 1");
    Rng rng(mix_seed(seed, 0x62656e6368ULL));
    std::vector<std::vector<int>> assignments;
    assignments.reserve(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) {
        std::vector<int> a(cfg.K);
        for (int k = 0; k < cfg.K; ++k) a[k] = 1 + static_cast<int>(rng.uniform_int(cfg.Nc));
        assignments.push_back(std::move(a));
    }
    return best_over_assignments(cfg, state, assignments, opt);
}

}  // namespace marlin
