#include "marlin/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace marlin {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);  // round-trips exactly
    return buf;
}

double parse_double(const std::string& s, const std::string& where) {
    try {
        return std::stod(s);
    } catch (const std::exception&) {
        throw std::runtime_error("bad numeric field '" + s + "' in " + where);
    }
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace

void write_metrics_csv(const std::string& path, const MetricsLog& log) {
    std::ostringstream out;
    out << "slot,epsilon,sum_rate,sum_log_rate,benchmark_sum_rate";
    for (int k = 1; k <= log.K; ++k) out << ",rate_" << k;
    for (int k = 1; k <= log.K; ++k) out << ",channel_" << k;
    for (int k = 1; k <= log.K; ++k) out << ",power_" << k;
    out << "\n";
    for (const auto& row : log.rows) {
        out << row.slot << ',' << fmt(row.epsilon) << ',' << fmt(row.sum_rate) << ','
            << fmt(row.sum_log_rate) << ',' << fmt(row.benchmark);
        for (double v : row.rate) out << ',' << fmt(v);
        for (int v : row.channel) out << ',' << v;
        for (double v : row.power) out << ',' << fmt(v);
        out << "\n";
    }
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << out.str();
    if (!f) throw std::runtime_error("short write: " + path);
}

MetricsLog read_metrics_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open metrics file: " + path);
    std::string header;
    if (!std::getline(f, header)) throw std::runtime_error("empty metrics file: " + path);
    auto cols = split(header, ',');
    int K = 0;
    for (const auto& c : cols)
        if (c.rfind("rate_", 0) == 0) ++K;
    if (cols.size() != static_cast<std::size_t>(5 + 3 * K))
        throw std::runtime_error("unexpected column set in " + path);

    MetricsLog log;
    log.K = K;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        auto fields = split(line, ',');
        if (fields.size() != cols.size())
            throw std::runtime_error("short row in " + path);
        MetricsRow row;
        row.slot = static_cast<std::int64_t>(parse_double(fields[0], path));
        row.epsilon = parse_double(fields[1], path);
        row.sum_rate = parse_double(fields[2], path);
        row.sum_log_rate = parse_double(fields[3], path);
        row.benchmark = parse_double(fields[4], path);
        for (int k = 0; k < K; ++k) row.rate.push_back(parse_double(fields[5 + k], path));
        for (int k = 0; k < K; ++k)
            row.channel.push_back(static_cast<int>(parse_double(fields[5 + K + k], path)));
        for (int k = 0; k < K; ++k)
            row.power.push_back(parse_double(fields[5 + 2 * K + k], path));
        log.rows.push_back(std::move(row));
    }
    return log;
}

std::vector<double> moving_average(const std::vector<double>& series, int window) {
    if (window < 1) throw std::invalid_argument("window: must be >= 1");
    if (static_cast<std::size_t>(window) > series.size())
        throw std::invalid_argument("window: larger than the series");
    std::vector<double> out(series.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < series.size(); ++i) {
        acc += series[i];
        if (i >= static_cast<std::size_t>(window)) acc -= series[i - window];
        out[i] = acc / static_cast<double>(std::min<std::size_t>(i + 1, window));
    }
    return out;
}

namespace {

SummaryRow summarize_one(const MetricsLog& log, const std::string& label, int window) {
    if (log.rows.empty()) throw std::invalid_argument("metrics log is empty: " + label);
    SummaryRow row;
    row.label = label;
    row.rows = static_cast<std::int64_t>(log.rows.size());
    std::vector<double> sum_rate, sum_log_rate;
    for (const auto& r : log.rows) {
        sum_rate.push_back(r.sum_rate);
        sum_log_rate.push_back(r.sum_log_rate);
    }
    row.mean_sum_rate = mean_of(sum_rate);
    row.mean_sum_log_rate = mean_of(sum_log_rate);
    row.final_window_sum_rate = moving_average(sum_rate, window).back();
    row.final_window_sum_log_rate = moving_average(sum_log_rate, window).back();
    row.mean_power.assign(log.K, 0.0);
    for (const auto& r : log.rows)
        for (int k = 0; k < log.K; ++k) row.mean_power[k] += r.power[k];
    for (auto& p : row.mean_power) p /= static_cast<double>(log.rows.size());
    row.benchmark = log.rows.back().benchmark;
    row.benchmark_ratio = row.final_window_sum_rate / row.benchmark;
    return row;
}

}  // namespace

Summary summarize(const std::vector<MetricsLog>& logs, const std::vector<std::string>& labels,
                  int window) {
    if (logs.empty()) throw std::invalid_argument("summarize: no metrics");
    if (logs.size() != labels.size()) throw std::invalid_argument("summarize: label mismatch");
    Summary s;
    s.window = window;
    for (std::size_t i = 0; i < logs.size(); ++i)
        s.per_file.push_back(summarize_one(logs[i], labels[i], window));

    SummaryRow mean;
    mean.label = "mean";
    mean.mean_power.assign(s.per_file[0].mean_power.size(), 0.0);
    double n = static_cast<double>(s.per_file.size());
    for (const auto& r : s.per_file) {
        mean.rows += r.rows;
        mean.mean_sum_rate += r.mean_sum_rate / n;
        mean.final_window_sum_rate += r.final_window_sum_rate / n;
        mean.mean_sum_log_rate += r.mean_sum_log_rate / n;
        mean.final_window_sum_log_rate += r.final_window_sum_log_rate / n;
        mean.benchmark += r.benchmark / n;
        mean.benchmark_ratio += r.benchmark_ratio / n;
        for (std::size_t k = 0; k < mean.mean_power.size(); ++k)
            mean.mean_power[k] += r.mean_power[k] / n;
    }
    s.mean = std::move(mean);
    return s;
}

Summary summarize_files(const std::vector<std::string>& paths, int window) {
    std::vector<MetricsLog> logs;
    for (const auto& p : paths) logs.push_back(read_metrics_csv(p));
    return summarize(logs, paths, window);
}

void write_summary_csv(const std::string& path, const Summary& summary) {
    std::ostringstream out;
    std::size_t K = summary.per_file.empty() ? 0 : summary.per_file[0].mean_power.size();
    out << "label,rows,mean_sum_rate,final_window_sum_rate,mean_sum_log_rate,"
           "final_window_sum_log_rate,benchmark,benchmark_ratio";
    for (std::size_t k = 1; k <= K; ++k) out << ",mean_power_" << k;
    out << "\n";
    auto emit = [&](const SummaryRow& r) {
        out << r.label << ',' << r.rows << ',' << fmt(r.mean_sum_rate) << ','
            << fmt(r.final_window_sum_rate) << ',' << fmt(r.mean_sum_log_rate) << ','
            << fmt(r.final_window_sum_log_rate) << ',' << fmt(r.benchmark) << ','
            << fmt(r.benchmark_ratio);
        for (double p : r.mean_power) out << ',' << fmt(p);
        out << "\n";
    };
    for (const auto& r : summary.per_file) emit(r);
    emit(summary.mean);
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << out.str();
}

std::string format_summary(const Summary& summary) {
    std::ostringstream out;
    auto num = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.4f", v);
        return std::string(buf);
    };
    out << "window=" << summary.window << "\n";
    auto emit = [&](const SummaryRow& r) {
        out << r.label << ": rows=" << r.rows << " sum_rate(mean=" << num(r.mean_sum_rate)
            << ", final=" << num(r.final_window_sum_rate) << ")"
            << " sum_log_rate(mean=" << num(r.mean_sum_log_rate)
            << ", final=" << num(r.final_window_sum_log_rate) << ")";
        if (std::isfinite(r.benchmark))
            out << " benchmark=" << num(r.benchmark) << " ratio=" << num(r.benchmark_ratio);
        out << " mean_power=[";
        for (std::size_t k = 0; k < r.mean_power.size(); ++k)
            out << (k ? " " : "") << num(r.mean_power[k]);
        out << "]\n";
    };
    for (const auto& r : summary.per_file) emit(r);
    emit(summary.mean);
    return out.str();
}

}  // namespace marlin
