#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "marlin/rng.hpp"
#include "marlin/wmmse.hpp"

using namespace marlin;

namespace {

// brute-force oracle: best sum-rate over a power grid (grid_n points per
// user including 0 and Pmax), independent of the WMMSE iteration
double grid_best_sum_rate(const std::vector<std::vector<double>>& gains, double Pmax,
                          double sigma2, int grid_n) {
    std::size_t K = gains.size();
    std::vector<int> idx(K, 0);
    std::vector<double> p(K);
    double best = -1.0;
    while (true) {
        for (std::size_t k = 0; k < K; ++k)
            p[k] = static_cast<double>(idx[k]) / (grid_n - 1) * Pmax;
        double s = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            double interference = 0.0;
            for (std::size_t j = 0; j < K; ++j)
                if (j != k) interference += p[j] * gains[k][j];
            s += std::log2(1.0 + p[k] * gains[k][k] / (interference + sigma2));
        }
        best = std::max(best, s);
        std::size_t k = 0;
        while (k < K && ++idx[k] == grid_n) idx[k++] = 0;
        if (k == K) break;
    }
    return best;
}

std::vector<std::vector<double>> random_gains(int K, Rng& rng) {
    std::vector<std::vector<double>> g(K, std::vector<double>(K));
    for (auto& row : g)
        for (auto& v : row) v = std::norm(rng.cnormal());
    return g;
}

}  // namespace

TEST_CASE("single user takes full power") {
    std::vector<std::vector<double>> gains{{1.0}};
    auto res = wmmse_power(gains, 4.0, 1.0);
    CHECK(res.converged);
    CHECK(res.powers[0] == doctest::Approx(4.0));
    CHECK(res.sum_rate == doctest::Approx(std::log2(5.0)));
    CHECK(res.mmse[0] == doctest::Approx(1.0 / 5.0));  // 1/(1+SINR)
}

TEST_CASE("two symmetric users with strong cross gains match the grid oracle") {
    // cross gains 10x the direct gains: the optimum silences one user, which
    // the full-power start cannot reach on its own (it preserves the
    // symmetry), so the benchmark options add seeded restarts
    std::vector<std::vector<double>> gains{{1.0, 10.0}, {10.0, 1.0}};
    auto res = wmmse_power(gains, 4.0, 1.0, benchmark_wmmse_options());
    double oracle = grid_best_sum_rate(gains, 4.0, 1.0, 200);
    CHECK(res.sum_rate >= 0.99 * oracle);
    for (double p : res.powers) {
        CHECK(p >= 0.0);
        CHECK(p <= 4.0);
    }
}

TEST_CASE("wmmse objective is nonincreasing across iterations") {
    Rng rng(71);
    for (int rep = 0; rep < 10; ++rep) {
        auto gains = random_gains(3, rng);
        WmmseOptions opt;
        opt.record_objective = true;
        auto res = wmmse_power(gains, 10.0, 1.0, opt);
        REQUIRE(res.objective_trace.size() >= 2);
        for (std::size_t i = 1; i < res.objective_trace.size(); ++i)
            CHECK(res.objective_trace[i] <= res.objective_trace[i - 1] + 1e-9);
    }
}

TEST_CASE("random instances stay within 1% of the grid oracle") {
    Rng rng(72);
    for (int rep = 0; rep < 8; ++rep) {
        auto gains = random_gains(2, rng);
        double pmax = rep % 2 == 0 ? 10.0 : 100.0;
        auto res = wmmse_power(gains, pmax, 1.0, benchmark_wmmse_options());
        double oracle = grid_best_sum_rate(gains, pmax, 1.0, 200);
        CHECK(res.sum_rate >= 0.99 * oracle);
    }
}

TEST_CASE("power box constraint holds exactly") {
    Rng rng(73);
    for (int rep = 0; rep < 20; ++rep) {
        auto gains = random_gains(4, rng);
        auto res = wmmse_power(gains, 7.5, 0.5);
        for (double p : res.powers) {
            CHECK(p >= 0.0);
            CHECK(p <= 7.5);
        }
    }
}

TEST_CASE("permutation equivariance") {
    std::vector<std::vector<double>> gains{{2.0, 0.3, 0.1}, {0.5, 1.0, 0.2}, {0.4, 0.6, 3.0}};
    auto res = wmmse_power(gains, 5.0, 1.0);
    // swap users 0 and 2
    std::vector<std::vector<double>> swapped{
        {gains[2][2], gains[2][1], gains[2][0]},
        {gains[1][2], gains[1][1], gains[1][0]},
        {gains[0][2], gains[0][1], gains[0][0]}};
    auto res2 = wmmse_power(swapped, 5.0, 1.0);
    CHECK(res2.powers[0] == doctest::Approx(res.powers[2]).epsilon(1e-9));
    CHECK(res2.powers[1] == doctest::Approx(res.powers[1]).epsilon(1e-9));
    CHECK(res2.powers[2] == doctest::Approx(res.powers[0]).epsilon(1e-9));
    CHECK(res2.sum_rate == doctest::Approx(res.sum_rate).epsilon(1e-9));
}

TEST_CASE("assignment gains zero out cross-channel interference") {
    NetworkConfig cfg;
    cfg.K = 3;
    cfg.Nc = 2;
    auto st = init_network(cfg, 5);
    std::vector<int> assignment{1, 2, 1};
    auto gains = assignment_gains(cfg, st, assignment);
    CHECK(gains[0][1] == 0.0);
    CHECK(gains[1][0] == 0.0);
    CHECK(gains[1][2] == 0.0);
    CHECK(gains[0][2] == doctest::Approx(st.gain(0, 0, 2)));
    CHECK(gains[1][1] == doctest::Approx(st.gain(1, 1, 1)));
}

TEST_CASE("exhaustive benchmark separates users under strong interference") {
    // enumerate all 4 assignments with an inner grid oracle; strong cross
    // gains force the two users onto different channels
    NetworkConfig cfg;
    cfg.K = 2;
    cfg.Nc = 2;
    cfg.Pmax = 4.0;
    auto st = init_network(cfg, 1);
    for (int n = 0; n < 2; ++n) {
        st.h[n][0] = {1.0, 0.0};   // h_00
        st.h[n][3] = {1.0, 0.0};   // h_11
        st.h[n][1] = {10.0, 0.0};  // h_01
        st.h[n][2] = {10.0, 0.0};  // h_10
    }
    double best_oracle = -1.0;
    std::vector<int> best_assignment;
    for (int a0 = 1; a0 <= 2; ++a0)
        for (int a1 = 1; a1 <= 2; ++a1) {
            auto gains = assignment_gains(cfg, st, {a0, a1});
            double v = grid_best_sum_rate(gains, cfg.Pmax, cfg.sigma2, 200);
            if (v > best_oracle) {
                best_oracle = v;
                best_assignment = {a0, a1};
            }
        }
    CHECK(best_assignment[0] != best_assignment[1]);

    auto res = exhaustive_benchmark(cfg, st);
    CHECK(res.assignment[0] != res.assignment[1]);
    CHECK(res.sum_rate >= 0.99 * best_oracle);
    CHECK(res.evaluations == 4);
}

TEST_CASE("exhaustive benchmark visits exactly Nc^K assignments") {
    NetworkConfig cfg;
    cfg.K = 6;
    cfg.Nc = 2;
    auto st = init_network(cfg, 2);
    auto res = exhaustive_benchmark(cfg, st);
    CHECK(res.evaluations == 64);
}

TEST_CASE("single channel degenerates to one WMMSE solve") {
    NetworkConfig cfg;
    cfg.K = 3;
    cfg.Nc = 1;
    auto st = init_network(cfg, 3);
    auto res = exhaustive_benchmark(cfg, st);
    CHECK(res.evaluations == 1);
    auto direct = wmmse_power(assignment_gains(cfg, st, {1, 1, 1}), cfg.Pmax, cfg.sigma2);
    CHECK(res.sum_rate == doctest::Approx(direct.sum_rate));
}

TEST_CASE("budget overflow raises and suggests sampling") {
    NetworkConfig cfg;
    cfg.K = 10;
    cfg.Nc = 4;  // 4^10 ~ 1e6 assignments
    auto st = init_network(cfg, 4);
    CHECK_THROWS_WITH_AS(exhaustive_benchmark(cfg, st, 1 << 10),
                         doctest::Contains("sampled_benchmark"), std::runtime_error);
    auto res = sampled_benchmark(cfg, st, 32, 9);
    CHECK(res.evaluations == 32);
    CHECK(res.sum_rate > 0.0);
}

TEST_CASE("channel assignment is invariant to a common gain/noise scale") {
    NetworkConfig cfg;
    cfg.K = 3;
    cfg.Nc = 2;
    cfg.Pmax = 10.0;
    for (int seed = 0; seed < 6; ++seed) {
        auto st = init_network(cfg, 100 + seed);
        auto base = exhaustive_benchmark(cfg, st);
        NetworkConfig scaled_cfg = cfg;
        scaled_cfg.sigma2 = cfg.sigma2 * 16.0;
        NetworkState scaled = st;
        for (auto& mat : scaled.h)
            for (auto& v : mat) v *= 4.0;  // gains scale by 16
        auto res = exhaustive_benchmark(scaled_cfg, scaled);
        CHECK(res.assignment == base.assignment);
    }
}

TEST_CASE("lexicographic tie-break on a fully symmetric instance") {
    NetworkConfig cfg;
    cfg.K = 2;
    cfg.Nc = 2;
    cfg.Pmax = 4.0;
    auto st = init_network(cfg, 1);
    for (int n = 0; n < 2; ++n)
        for (int i = 0; i < 4; ++i) st.h[n][i] = {1.0, 0.0};
    // both split assignments {1,2} and {2,1} achieve the same rate
    auto res = exhaustive_benchmark(cfg, st);
    CHECK(res.assignment == std::vector<int>{1, 2});
}

TEST_CASE("non-convergence is reported with the final iterate, not an error") {
    // interference keeps one v off the box bound, so one iteration is not
    // enough at this tolerance
    std::vector<std::vector<double>> gains{{1.0, 0.1}, {0.2, 0.8}};
    WmmseOptions opt;
    opt.max_iter = 1;
    opt.tol = 1e-15;
    auto res = wmmse_power(gains, 100.0, 1.0, opt);
    CHECK_FALSE(res.converged);
    CHECK(res.iterations == 1);
    CHECK(res.powers.size() == 2);
    auto full = wmmse_power(gains, 100.0, 1.0);
    CHECK(full.converged);
    CHECK(full.sum_rate >= res.sum_rate - 1e-9);
}

TEST_CASE("random initialization is seeded and stays inside the box") {
    std::vector<std::vector<double>> gains{{1.0, 0.2}, {0.3, 1.5}};
    WmmseOptions opt;
    opt.random_init = true;
    opt.init_seed = 5;
    auto a = wmmse_power(gains, 4.0, 1.0, opt);
    auto b = wmmse_power(gains, 4.0, 1.0, opt);
    CHECK(a.powers == b.powers);
    for (double p : a.powers) CHECK(p <= 4.0);
}
