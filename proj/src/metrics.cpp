#include "idem/metrics.hpp"

#include <numeric>

namespace idem {

double tail_mean(const std::vector<double>& values, std::size_t tail) {
    if (values.empty())
        return 0.0;
    std::size_t n = std::min(tail, values.size());
    double sum = std::accumulate(values.end() - static_cast<std::ptrdiff_t>(n), values.end(), 0.0);
    return sum / static_cast<double>(n);
}

SummaryRow aggregate_summary(const std::string& variant, const std::vector<SeedSummary>& seeds) {
    SummaryRow row;
    row.variant = variant;
    row.per_seed = seeds;
    row.n_seeds = static_cast<int>(seeds.size());
    if (seeds.empty())
        return row;

    double steps_sum = 0.0;
    int steps_n = 0;
    for (const SeedSummary& s : seeds) {
        row.win_rate += s.win_rate;
        row.avg_reward += s.avg_reward;
        row.avg_loss += s.avg_loss;
        if (s.avg_winning_steps) {
            steps_sum += *s.avg_winning_steps;
            ++steps_n;
        }
    }
    row.win_rate /= row.n_seeds;
    row.avg_reward /= row.n_seeds;
    row.avg_loss /= row.n_seeds;
    if (steps_n > 0)
        row.avg_winning_steps = steps_sum / steps_n;
    return row;
}

} // namespace idem
