#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace marlin {

struct MetricsRow {
    std::int64_t slot = 0;
    double epsilon = 0.0;
    double sum_rate = 0.0;
    double sum_log_rate = 0.0;
    double benchmark = 0.0;  // NaN until first computed; then the latest value
    std::vector<double> rate;     // per user
    std::vector<int> channel;     // per user, 0 = no transmission
    std::vector<double> power;    // per user, linear
    std::vector<int> action;      // per user action index (kept in memory only)
};

struct MetricsLog {
    int K = 0;
    std::vector<MetricsRow> rows;
};

// One header line, then comma-separated numeric rows. Doubles are written
// with enough digits to round-trip exactly.
void write_metrics_csv(const std::string& path, const MetricsLog& log);
MetricsLog read_metrics_csv(const std::string& path);

struct SummaryRow {
    std::string label;  // seed tag or "mean"
    std::int64_t rows = 0;
    double mean_sum_rate = 0.0;
    double final_window_sum_rate = 0.0;
    double mean_sum_log_rate = 0.0;
    double final_window_sum_log_rate = 0.0;
    std::vector<double> mean_power;  // per user
    double benchmark = 0.0;          // final benchmark value (NaN if absent)
    double benchmark_ratio = 0.0;    // final-window sum-rate / benchmark
};

struct Summary {
    int window = 0;
    std::vector<SummaryRow> per_file;
    SummaryRow mean;  // arithmetic mean of the per-file rows
};

// Windowed moving average of a series; output[i] averages the last
// min(i+1, window) values. Throws when window exceeds the series length.
std::vector<double> moving_average(const std::vector<double>& series, int window);

Summary summarize(const std::vector<MetricsLog>& logs, const std::vector<std::string>& labels,
                  int window);
Summary summarize_files(const std::vector<std::string>& paths, int window);
void write_summary_csv(const std::string& path, const Summary& summary);
std::string format_summary(const Summary& summary);

}  // namespace marlin
