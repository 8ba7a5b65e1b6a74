#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace idem {

// One row of per-episode training telemetry.
struct MetricsRecord {
    std::uint64_t seed = 0;
    int episode = 0;
    int steps = 0;
    double ret = 0.0;
    bool win = false;
    double mean_loss = 0.0;
    double eta_last = 0.0;
    double delta_bar = 0.0;
    bool change_event = false;
};

// One row of greedy-evaluation telemetry.
struct EvalRecord {
    std::uint64_t seed = 0;
    int episode = 0;
    int steps = 0;
    double ret = 0.0;
    bool win = false;
};

// Per-seed aggregates for one trained variant.
struct SeedSummary {
    std::uint64_t seed = 0;
    double win_rate = 0.0;
    double avg_reward = 0.0;
    std::optional<double> avg_winning_steps; // empty when no evaluation win
    double avg_loss = 0.0;                   // mean batch loss, final 500 training steps
};

// Cross-seed aggregate for one variant. avg_winning_steps averages only the
// seeds that won at least once and is empty when none did.
struct SummaryRow {
    std::string variant;
    std::optional<double> avg_winning_steps;
    double win_rate = 0.0;
    double avg_reward = 0.0;
    double avg_loss = 0.0;
    int n_seeds = 0;
    std::vector<SeedSummary> per_seed;
};

SummaryRow aggregate_summary(const std::string& variant, const std::vector<SeedSummary>& seeds);

// Mean over the last `tail` entries (whole series when shorter), 0 if empty.
double tail_mean(const std::vector<double>& values, std::size_t tail);

} // namespace idem
