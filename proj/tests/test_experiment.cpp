#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "marlin/experiment.hpp"

using namespace marlin;
namespace fs = std::filesystem;

namespace {

std::string small_config_text(const char* extra = "") {
    std::string s =
        "regime = cdrl\n"
        "K = 2\nNc = 2\nNp = 3\nM = 4\nPmax = 10\nT_hist = 3\n"
        "T_max = 60\nT_e = 30\nminibatch = 4\nlstm_hidden = 5\n"
        "adv_width = 3\nval_width = 3\nwindow = 10\nseeds = 1,2\n";
    return s + extra;
}

std::string read_file(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(f.good());
    return std::string(std::istreambuf_iterator<char>(f), {});
}

struct TempDir {
    fs::path path;
    TempDir(const char* tag) : path(fs::temp_directory_path() / tag) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("empty document takes the centralized-training defaults") {
    auto cfg = parse_config("");
    CHECK(cfg.net.K == 6);
    CHECK(cfg.net.Nc == 2);
    CHECK(cfg.net.Np == 5);
    CHECK(cfg.net.M == 10);
    CHECK(cfg.train.T_max == 400000);
    CHECK(cfg.train.eps.T_e == 320000);
    CHECK(cfg.train.alpha == 0.001);
    CHECK(cfg.train.gamma == 0.9);
    CHECK(cfg.train.eps.eps_max == 0.2);
    CHECK(cfg.train.eps.eps_min == 0.01);
    CHECK(cfg.train.optimizer == OptimizerKind::Adam);
    CHECK(cfg.train.minibatch == 12);
    CHECK(cfg.train.replay_capacity == 600000);
    CHECK(cfg.net.Pmax == doctest::Approx(std::pow(10.0, 3.8)));
}

TEST_CASE("federated regime switches to the distributed table defaults") {
    auto cfg = parse_config("regime = fdrl\n");
    CHECK(cfg.train.eps.T_e == 500000);
    CHECK(cfg.train.alpha == 0.01);
    CHECK(cfg.train.eps.eps_max == 0.5);
    CHECK(cfg.train.eps.eps_min == 0.05);
    CHECK(cfg.train.replay_capacity == 100000);
    CHECK(cfg.train.minibatch == 2);
    CHECK(cfg.train.optimizer == OptimizerKind::Sgd);
    CHECK(cfg.train.group_size == cfg.net.K);
    // the regime key wins regardless of its position
    auto tail = parse_config("T_e = 7\nregime = fdrl\n");
    CHECK(tail.train.optimizer == OptimizerKind::Sgd);
    CHECK(tail.train.eps.T_e == 7);
}

TEST_CASE("unknown keys and malformed lines carry line numbers") {
    CHECK_THROWS_WITH_AS(parse_config("K = 6\nbogus_key = 1\n"),
                         doctest::Contains("line 2"), ParseError);
    CHECK_THROWS_WITH_AS(parse_config("\n\nK 6\n"), doctest::Contains("line 3"), ParseError);
    CHECK_THROWS_WITH_AS(parse_config("K = abc\n"), doctest::Contains("number"), ParseError);
    CHECK_THROWS_WITH_AS(parse_config("regime = xyz\n"), doctest::Contains("regime"),
                         ParseError);
}

TEST_CASE("invariant violations name the offending key") {
    CHECK_THROWS_WITH_AS(parse_config("K = -1\n"), doctest::Contains("K"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(parse_config("gamma = 1.5\n"), doctest::Contains("gamma"),
                         std::invalid_argument);
}

TEST_CASE("comments and blank lines are ignored") {
    auto cfg = parse_config("# a comment\n\nK = 4  # trailing comment\n");
    CHECK(cfg.net.K == 4);
}

TEST_CASE("doppler keys fold into the correlation") {
    auto cfg = parse_config("f_d = 15\nslot_duration = 0.001\n");
    CHECK(cfg.net.rho == doctest::Approx(rho_from_doppler(15.0, 0.001)));
    CHECK_THROWS_AS(parse_config("f_d = 15\n"), ParseError);
}

TEST_CASE("config round-trips through render and parse") {
    auto cfg = parse_config(small_config_text("reward = sum_log_rate\nquant_bits = 11\n"));
    std::string rendered = render_config(cfg);
    auto back = parse_config(rendered);
    CHECK(render_config(back) == rendered);
    CHECK(back.net.K == 2);
    CHECK(back.train.reward == RewardMode::SumLogRate);
    CHECK(back.train.quant_bits == 11);
    CHECK(back.seeds == std::vector<std::uint64_t>{1, 2});
}

TEST_CASE("moving average window semantics") {
    std::vector<double> constant(20, 3.5);
    for (double v : moving_average(constant, 7)) CHECK(v == doctest::Approx(3.5));

    std::vector<double> series{1, 2, 3, 4};
    CHECK(moving_average(series, 1) == series);
    auto ma = moving_average(series, 2);
    CHECK(ma[0] == doctest::Approx(1.0));
    CHECK(ma[3] == doctest::Approx(3.5));

    CHECK_THROWS_AS(moving_average(series, 5), std::invalid_argument);
    CHECK_THROWS_AS(moving_average(series, 0), std::invalid_argument);
}

TEST_CASE("metrics CSV round-trips exactly") {
    MetricsLog log;
    log.K = 2;
    for (int t = 0; t < 5; ++t) {
        MetricsRow row;
        row.slot = t;
        row.epsilon = 0.2 - t * 1e-3;
        row.sum_rate = 1.23456789012345 * (t + 1);
        row.sum_log_rate = -0.5 * t;
        row.benchmark = t < 2 ? std::numeric_limits<double>::quiet_NaN() : 7.25;
        row.rate = {0.5 * t, 0.25 * t};
        row.channel = {1 + t % 2, 0};
        row.power = {10.0 / 3.0, 0.0};
        log.rows.push_back(row);
    }
    TempDir dir("marlin_csv_test");
    auto path = (dir.path / "m.csv").string();
    write_metrics_csv(path, log);
    auto back = read_metrics_csv(path);
    REQUIRE(back.K == 2);
    REQUIRE(back.rows.size() == 5);
    for (int t = 0; t < 5; ++t) {
        CHECK(back.rows[t].slot == log.rows[t].slot);
        CHECK(back.rows[t].epsilon == log.rows[t].epsilon);
        CHECK(back.rows[t].sum_rate == log.rows[t].sum_rate);
        CHECK(back.rows[t].power == log.rows[t].power);
        CHECK(back.rows[t].channel == log.rows[t].channel);
        if (t < 2)
            CHECK(std::isnan(back.rows[t].benchmark));
        else
            CHECK(back.rows[t].benchmark == 7.25);
    }
}

TEST_CASE("summaries aggregate per-seed means arithmetically") {
    MetricsLog a, b;
    a.K = b.K = 1;
    for (int t = 0; t < 10; ++t) {
        MetricsRow ra;
        ra.slot = t;
        ra.sum_rate = 2.0;
        ra.sum_log_rate = 1.0;
        ra.benchmark = 4.0;
        ra.rate = {2.0};
        ra.channel = {1};
        ra.power = {0.5};
        a.rows.push_back(ra);
        ra.sum_rate = 4.0;
        ra.power = {1.5};
        b.rows.push_back(ra);
    }
    auto s = summarize({a, b}, {"s1", "s2"}, 5);
    CHECK(s.per_file[0].final_window_sum_rate == doctest::Approx(2.0));
    CHECK(s.per_file[1].final_window_sum_rate == doctest::Approx(4.0));
    CHECK(s.mean.final_window_sum_rate == doctest::Approx(3.0));
    CHECK(s.mean.mean_power[0] == doctest::Approx(1.0));
    CHECK(s.per_file[0].benchmark_ratio == doctest::Approx(0.5));
    CHECK_THROWS_AS(summarize({a}, {"s1"}, 11), std::invalid_argument);
}

TEST_CASE("run_experiment writes one metrics file per seed plus a summary") {
    TempDir dir("marlin_exp_test");
    auto cfg = parse_config(small_config_text());
    cfg.out_dir = (dir.path / "out").string();
    CHECK(run_experiment(cfg) == 0);

    CHECK(fs::exists(metrics_path(cfg.out_dir, 1)));
    CHECK(fs::exists(metrics_path(cfg.out_dir, 2)));
    CHECK(fs::exists(cfg.out_dir + "/summary.csv"));
    CHECK(fs::exists(cfg.out_dir + "/config_used.cfg"));
    int metric_files = 0;
    for (const auto& e : fs::directory_iterator(cfg.out_dir))
        if (e.path().filename().string().rfind("metrics_seed", 0) == 0) ++metric_files;
    CHECK(metric_files == 2);

    auto log = read_metrics_csv(metrics_path(cfg.out_dir, 1));
    CHECK(log.rows.size() == 60);
    CHECK(log.K == 2);
    // slots strictly increasing from zero
    for (std::size_t i = 0; i < log.rows.size(); ++i)
        CHECK(log.rows[i].slot == static_cast<std::int64_t>(i));
}

TEST_CASE("rerunning an experiment yields byte-identical outputs") {
    TempDir dir("marlin_det_test");
    auto cfg = parse_config(small_config_text());
    cfg.seeds = {7};
    cfg.out_dir = (dir.path / "a").string();
    run_experiment(cfg);
    auto first = read_file(metrics_path(cfg.out_dir, 7));
    auto first_summary = read_file(cfg.out_dir + "/summary.csv");

    cfg.out_dir = (dir.path / "b").string();
    run_experiment(cfg);
    CHECK(read_file(metrics_path(cfg.out_dir, 7)) == first);
    CHECK(read_file(cfg.out_dir + "/summary.csv") == first_summary);
}

TEST_CASE("benchmark toggle adds the ratio to the summary") {
    TempDir dir("marlin_bench_test");
    auto cfg = parse_config(small_config_text("benchmark = true\n"));
    cfg.seeds = {3};
    cfg.out_dir = (dir.path / "out").string();
    run_experiment(cfg);
    auto summary = summarize_files({metrics_path(cfg.out_dir, 3)}, cfg.window);
    CHECK(std::isfinite(summary.per_file[0].benchmark));
    CHECK(summary.per_file[0].benchmark > 0.0);
    CHECK(std::isfinite(summary.per_file[0].benchmark_ratio));
}

TEST_CASE("trained checkpoints reload and drive the test protocol") {
    TempDir dir("marlin_ckpt_test");
    auto cfg = parse_config(small_config_text("test_slots = 20\n"));
    cfg.seeds = {5};
    cfg.out_dir = (dir.path / "out").string();
    run_experiment(cfg);

    auto policies = load_policies(cfg, 5);
    REQUIRE(policies.size() == 2);
    CHECK(policies[0].params.size() == param_count(policies[0].spec));

    CHECK(run_test_experiment(cfg) == 0);
    auto log = read_metrics_csv(test_metrics_path(cfg.out_dir, 5));
    CHECK(log.rows.size() == 20);
    for (const auto& row : log.rows) CHECK(row.epsilon == cfg.train.eps.test_eps);
}
