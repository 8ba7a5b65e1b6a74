#include "idem/csv.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace idem {

std::string csv_double(double value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", value);
    return buf;
}

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos)
        return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"')
            out += '"';
        out += c;
    }
    out += '"';
    return out;
}

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream os(path, std::ios::binary); // binary: keep \n endings everywhere
    if (!os)
        throw std::runtime_error("cannot write " + path);
    return os;
}

} // namespace

void write_metrics_csv(const std::vector<MetricsRecord>& records, const std::string& path) {
    std::ofstream os = open_out(path);
    os << kMetricsHeader << '\n';
    for (const MetricsRecord& r : records) {
        os << r.seed << ',' << r.episode << ',' << r.steps << ',' << csv_double(r.ret) << ','
           << (r.win ? 1 : 0) << ',' << csv_double(r.mean_loss) << ','
           << csv_double(r.eta_last) << ',' << csv_double(r.delta_bar) << ','
           << (r.change_event ? 1 : 0) << '\n';
    }
}

void write_eval_csv(const std::vector<EvalRecord>& records, const std::string& path) {
    std::ofstream os = open_out(path);
    os << kEvalHeader << '\n';
    for (const EvalRecord& r : records)
        os << r.seed << ',' << r.episode << ',' << r.steps << ',' << csv_double(r.ret) << ','
           << (r.win ? 1 : 0) << '\n';
}

void write_losses_csv(const std::vector<long>& steps, const std::vector<double>& losses,
                      const std::string& path) {
    if (steps.size() != losses.size())
        throw std::invalid_argument("step and loss arrays differ in length");
    std::ofstream os = open_out(path);
    os << kLossHeader << '\n';
    for (std::size_t i = 0; i < steps.size(); ++i)
        os << steps[i] << ',' << csv_double(losses[i]) << '\n';
}

void write_summary_csv(const std::vector<SummaryRow>& rows, const std::string& path) {
    std::ofstream os = open_out(path);
    os << kSummaryHeader << '\n';
    for (const SummaryRow& r : rows) {
        os << csv_escape(r.variant) << ',';
        if (r.avg_winning_steps)
            os << csv_double(*r.avg_winning_steps);
        os << ',' << csv_double(r.win_rate) << ',' << csv_double(r.avg_reward) << ','
           << csv_double(r.avg_loss) << ',' << r.n_seeds << '\n';
    }
}

} // namespace idem
