#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "idem/agent.hpp"
#include "idem/checkpoint.hpp"
#include "idem/gridworld.hpp"
#include "idem/metrics.hpp"

namespace idem {

struct EnvSettings {
    std::string map = "4x4"; // builtin name ("4x4", "8x8") or path to a map file
    bool slippery = true;
    int max_steps = 0; // 0 = layout default
};

GridMap load_map(const std::string& name_or_path);

// Change events fire at episode boundaries; gaps between events are drawn
// uniformly from [gap_lo, gap_hi]. Events alternate goal relocation and
// tile-stability change; non-slippery maps get relocations only, since
// stability has no meaning without slip.
struct DynamicSchedule {
    bool enabled = false;
    int gap_lo = 100;
    int gap_hi = 300;
    double tile_fraction = 0.25; // share of frozen tiles re-rolled per event
    double slip_lo = 0.0;        // per-lateral slip probability range
    double slip_hi = 0.5;
};

struct ExperimentSpec {
    std::string name = "experiment";
    EnvSettings env;
    AgentConfig config; // variant is overridden per run
    std::vector<std::uint64_t> seeds;
    int eval_episodes = 1000;
    std::string outdir = "out";
    DynamicSchedule dynamic;
    int threads = 0; // 0 = hardware concurrency

    void validate() const;
};

struct RecoveryStat {
    int episode = 0;
    ChangeEvent::Kind kind = ChangeEvent::Kind::GoalRelocation;
    double pre_change_win_rate = 0.0;        // trailing-100 rate just before the event
    std::optional<int> episodes_to_recover;  // empty when never regained
};

struct ReplicaResult {
    std::uint64_t seed = 0;
    Variant variant = Variant::Idem;
    std::vector<MetricsRecord> train_records;
    std::vector<EvalRecord> eval_records;
    SeedSummary summary;
    std::vector<long> loss_steps;  // global step indices of the recorded tail
    std::vector<double> loss_tail; // final <= 500 training-step losses
    std::vector<RecoveryStat> recoveries;
    Checkpoint checkpoint;
};

// The per-seed change schedule; the same seed always yields the same events,
// so paired variants see identical environments.
std::vector<ChangeEvent> make_schedule(const ExperimentSpec& spec, std::uint64_t seed);

ReplicaResult run_replica(const ExperimentSpec& spec, Variant variant, std::uint64_t seed,
                          const std::vector<ChangeEvent>& schedule);

struct ComparisonResult {
    SummaryRow baseline; // vanilla DQN
    SummaryRow idem;
};

// Trains both variants on paired seeds, evaluates greedily, and writes
// metrics/eval/loss CSVs, checkpoints, summary.json/.csv, and loss.svg
// into spec.outdir.
ComparisonResult run_comparison(const ExperimentSpec& spec);

// Same, with spec.dynamic change events injected during training and
// per-event recovery metrics added to the summary.
ComparisonResult run_dynamic(const ExperimentSpec& spec);

struct GridSpec {
    std::vector<double> learning_rates;
    std::vector<double> beta1_values;
    ExperimentSpec base; // env, remaining config, seeds per cell, outdir

    void validate() const;
};

struct GridCell {
    double lr = 0.0;
    double beta1 = 0.0;
    SummaryRow summary;
    std::string error; // nonempty when the cell failed
};

// IDEM-only sweep over (learning rate x beta1); failed cells are recorded
// and the rest of the grid still runs. Writes ablation.csv + summary.json.
std::vector<GridCell> run_ablation(const GridSpec& grid);

} // namespace idem
