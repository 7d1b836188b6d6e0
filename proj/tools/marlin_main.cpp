#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "marlin/experiment.hpp"
#include "marlin/wmmse.hpp"

namespace {

std::string resolve_out_dir(const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv("MARLIN_OUT_DIR"); env && *env) return env;
    return "runs";
}

marlin::ExperimentConfig load_cfg(const std::string& config_path,
                                  const std::vector<std::uint64_t>& seeds,
                                  const std::string& out_flag, int window) {
    marlin::ExperimentConfig cfg = config_path.empty()
                                       ? marlin::default_config(marlin::Regime::CDRL)
                                       : marlin::load_config_file(config_path);
    if (!seeds.empty()) cfg.seeds = seeds;
    cfg.out_dir = resolve_out_dir(out_flag);
    if (window > 0) cfg.window = window;
    cfg.validate();
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"interference-network resource allocation: DRL training and WMMSE benchmarks"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    std::vector<std::uint64_t> seeds;
    int window = 0;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "config file (key = value)");
        cmd->add_option("--seed", seeds, "seed (repeatable, overrides the config)");
        cmd->add_option("--out", out_dir, "output directory (default $MARLIN_OUT_DIR or ./runs)");
    };

    auto* train = app.add_subcommand("train", "train the configured regime, one run per seed");
    add_common(train);
    train->add_option("--window", window, "moving-average window for the summary");

    auto* test = app.add_subcommand("test", "run trained checkpoints in the dynamic channel");
    add_common(test);

    auto* bench = app.add_subcommand("benchmark", "WMMSE + exhaustive search on one channel draw");
    add_common(bench);
    std::size_t samples = 0;
    bench->add_option("--samples", samples, "sample this many assignments instead of all Nc^K");

    auto* account = app.add_subcommand("account", "information-exchange accounting");
    account->add_option("--config", config_path, "config file (key = value)");
    bool history_state = false;
    account->add_flag("--history-state", history_state,
                      "charge T_hist observations per uploaded state");

    auto* summ = app.add_subcommand("summarize", "summarize metrics files");
    std::vector<std::string> files;
    summ->add_option("files", files, "metrics files (default: metrics_seed*.csv under --out)");
    summ->add_option("--out", out_dir, "directory to scan when no files are given");
    summ->add_option("--window", window, "moving-average window (default 500)");
    std::string csv_out;
    summ->add_option("--csv", csv_out, "also write the summary as CSV");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) {
            auto cfg = load_cfg(config_path, seeds, out_dir, window);
            return marlin::run_experiment(cfg);
        }
        if (test->parsed()) {
            auto cfg = load_cfg(config_path, seeds, out_dir, window);
            return marlin::run_test_experiment(cfg);
        }
        if (bench->parsed()) {
            auto cfg = load_cfg(config_path, seeds, out_dir, window);
            for (std::uint64_t seed : cfg.seeds) {
                auto state = marlin::init_network(cfg.net, marlin::mix_seed(seed, 1));
                marlin::BenchmarkResult res =
                    samples > 0 ? marlin::sampled_benchmark(cfg.net, state, samples, seed)
                                : marlin::exhaustive_benchmark(cfg.net, state);
                std::cout << "seed " << seed << ": sum_rate=" << res.sum_rate << " assignment=[";
                for (std::size_t k = 0; k < res.assignment.size(); ++k)
                    std::cout << (k ? " " : "") << res.assignment[k];
                std::cout << "] powers=[";
                for (std::size_t k = 0; k < res.powers.size(); ++k)
                    std::cout << (k ? " " : "") << res.powers[k];
                std::cout << "] (" << res.evaluations << " WMMSE solves)\n";
            }
            return 0;
        }
        if (account->parsed()) {
            auto cfg = config_path.empty() ? marlin::default_config(marlin::Regime::FDRL)
                                           : marlin::load_config_file(config_path);
            auto rec = marlin::info_exchange_account(cfg.net, cfg.train, history_state);
            std::cout << "params_per_model=" << rec.params_per_model
                      << " bits_per_param=" << rec.bits_per_param
                      << " state_bits=" << rec.state_bits << " action_bits=" << rec.action_bits
                      << "\n";
            std::cout << "cdrl_bits_per_100_slots=" << rec.cdrl_bits_per_100 << "\n";
            std::cout << "fdrl_bits_per_100_slots=" << rec.fdrl_bits_per_100 << "\n";
            std::cout << "ratio=" << rec.ratio << "\n";
            return 0;
        }
        if (summ->parsed()) {
            if (files.empty()) {
                std::string dir = resolve_out_dir(out_dir);
                for (const auto& entry : std::filesystem::directory_iterator(dir)) {
                    std::string name = entry.path().filename().string();
                    if (name.rfind("metrics_seed", 0) == 0 && entry.path().extension() == ".csv")
                        files.push_back(entry.path().string());
                }
                std::sort(files.begin(), files.end());
                if (files.empty()) {
                    std::cerr << "no metrics files found under " << dir << "\n";
                    return 1;
                }
            }
            auto summary = marlin::summarize_files(files, window > 0 ? window : 500);
            std::cout << marlin::format_summary(summary);
            if (!csv_out.empty()) marlin::write_summary_csv(csv_out, summary);
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
