#include "idem/experiment.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "idem/csv.hpp"
#include "idem/svg.hpp"
#include "idem/util.hpp"

namespace idem {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

GridMap load_map(const std::string& name_or_path) {
    if (name_or_path == "4x4" || name_or_path == "8x8")
        return GridMap::builtin(name_or_path);
    std::ifstream is(name_or_path, std::ios::binary);
    if (!is)
        throw std::invalid_argument("cannot read map file " + name_or_path);
    std::ostringstream text;
    text << is.rdbuf();
    return GridMap::parse(text.str());
}

void ExperimentSpec::validate() const {
    config.validate();
    if (seeds.empty())
        throw std::invalid_argument("at least one seed is required");
    std::vector<std::uint64_t> sorted = seeds;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw std::invalid_argument("seeds must be distinct");
    if (eval_episodes < 1)
        throw std::invalid_argument("eval_episodes must be >= 1");
    if (outdir.empty())
        throw std::invalid_argument("output directory must be set");
    if (dynamic.enabled) {
        if (dynamic.gap_lo < 1 || dynamic.gap_hi < dynamic.gap_lo)
            throw std::invalid_argument("dynamic gaps must satisfy 1 <= lo <= hi");
        if (dynamic.tile_fraction < 0.0 || dynamic.tile_fraction > 1.0)
            throw std::invalid_argument("tile fraction must lie in [0, 1]");
        if (dynamic.slip_lo < 0.0 || dynamic.slip_hi > 0.5 ||
            dynamic.slip_lo > dynamic.slip_hi)
            throw std::invalid_argument("slip range must satisfy 0 <= lo <= hi <= 0.5");
    }
}

std::vector<ChangeEvent> make_schedule(const ExperimentSpec& spec, std::uint64_t seed) {
    std::vector<ChangeEvent> events;
    if (!spec.dynamic.enabled)
        return events;
    std::mt19937_64 rng(mix_seed(seed, 0x31));
    GridWorld scratch(load_map(spec.env.map), spec.env.slippery, spec.env.max_steps, 0);
    std::uniform_int_distribution<int> gap(spec.dynamic.gap_lo, spec.dynamic.gap_hi);
    int episode = 0;
    bool relocate = true;
    for (;;) {
        episode += gap(rng);
        if (episode >= spec.config.episodes)
            break;
        if (relocate || !spec.env.slippery)
            events.push_back(scratch.inject_goal_relocation(rng, episode));
        else
            events.push_back(scratch.inject_tile_stability_change(
                rng, spec.dynamic.tile_fraction, spec.dynamic.slip_lo, spec.dynamic.slip_hi,
                episode));
        relocate = !relocate;
    }
    return events;
}

namespace {

constexpr std::size_t kLossTail = 500;
constexpr int kRecoveryWindow = 100;

std::vector<RecoveryStat> recovery_stats(const std::vector<MetricsRecord>& records,
                                         const std::vector<ChangeEvent>& schedule) {
    // trailing win rate over the last kRecoveryWindow episodes, per episode
    std::vector<double> trailing(records.size(), 0.0);
    int in_window = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        in_window += records[i].win ? 1 : 0;
        if (i >= static_cast<std::size_t>(kRecoveryWindow))
            in_window -= records[i - kRecoveryWindow].win ? 1 : 0;
        trailing[i] = static_cast<double>(in_window) /
                      std::min<std::size_t>(i + 1, kRecoveryWindow);
    }

    std::vector<RecoveryStat> stats;
    for (const ChangeEvent& ev : schedule) {
        RecoveryStat st;
        st.episode = ev.episode_index;
        st.kind = ev.kind;
        st.pre_change_win_rate =
            ev.episode_index > 0 ? trailing[static_cast<std::size_t>(ev.episode_index - 1)] : 0.0;
        for (std::size_t i = static_cast<std::size_t>(ev.episode_index); i < records.size(); ++i) {
            if (trailing[i] >= st.pre_change_win_rate) {
                st.episodes_to_recover = static_cast<int>(i) - ev.episode_index + 1;
                break;
            }
        }
        stats.push_back(st);
    }
    return stats;
}

int resolve_threads(int requested) {
    if (requested > 0)
        return requested;
    unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

json seed_summary_json(const SeedSummary& s) {
    json j;
    j["seed"] = s.seed;
    j["win_rate"] = s.win_rate;
    j["avg_reward"] = s.avg_reward;
    if (s.avg_winning_steps)
        j["avg_winning_steps"] = *s.avg_winning_steps;
    else
        j["avg_winning_steps"] = nullptr;
    j["avg_loss"] = s.avg_loss;
    return j;
}

json summary_row_json(const SummaryRow& row) {
    json j;
    j["variant"] = row.variant;
    if (row.avg_winning_steps)
        j["avg_winning_steps"] = *row.avg_winning_steps;
    else
        j["avg_winning_steps"] = nullptr;
    j["win_rate"] = row.win_rate;
    j["avg_reward"] = row.avg_reward;
    j["avg_loss"] = row.avg_loss;
    j["n_seeds"] = row.n_seeds;
    json per_seed = json::array();
    for (const SeedSummary& s : row.per_seed)
        per_seed.push_back(seed_summary_json(s));
    j["per_seed"] = per_seed;
    return j;
}

json spec_json(const ExperimentSpec& spec, int max_steps_resolved) {
    const AgentConfig& c = spec.config;
    json j;
    j["experiment"] = spec.name;
    j["map"] = spec.env.map;
    j["slippery"] = spec.env.slippery;
    j["max_steps"] = max_steps_resolved;
    j["episodes"] = c.episodes;
    j["eval_episodes"] = spec.eval_episodes;
    j["seeds"] = spec.seeds;
    j["gamma"] = c.gamma;
    j["epsilon"] = c.epsilon;
    j["eta0"] = c.eta0;
    j["kappa"] = c.kappa;
    j["lambda"] = c.lambda;
    j["window"] = c.window;
    j["batch_size"] = c.batch_size;
    j["capacity"] = c.buffer_capacity;
    j["warmup"] = c.warmup;
    j["optimizer"] = c.optimizer == OptimizerKind::Adam ? "adam" : "sgd";
    j["cadence"] = c.cadence == TrainCadence::PerEpisode ? "episode" : "step";
    j["beta1"] = c.beta1;
    j["beta2"] = c.beta2;
    j["eps_adam"] = c.eps_adam;
    j["hidden"] = c.hidden;
    j["target_sync_every"] = c.target_sync_every;
    j["exponent_cap"] = c.exponent_cap;
    json dyn;
    dyn["enabled"] = spec.dynamic.enabled;
    dyn["gap_lo"] = spec.dynamic.gap_lo;
    dyn["gap_hi"] = spec.dynamic.gap_hi;
    dyn["tile_fraction"] = spec.dynamic.tile_fraction;
    dyn["slip_lo"] = spec.dynamic.slip_lo;
    dyn["slip_hi"] = spec.dynamic.slip_hi;
    j["dynamic"] = dyn;
    return j;
}

void write_json(const json& j, const fs::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw std::runtime_error("cannot write " + path.string());
    os << j.dump(2) << '\n';
}

std::vector<LossSeries> loss_series(const std::vector<ReplicaResult>& results) {
    // mean per-episode training loss across seeds, one series per variant
    std::vector<LossSeries> series;
    for (Variant v : {Variant::VanillaDqn, Variant::Idem}) {
        std::vector<double> sums;
        int n = 0;
        for (const ReplicaResult& r : results) {
            if (r.variant != v)
                continue;
            ++n;
            if (r.train_records.size() > sums.size())
                sums.resize(r.train_records.size(), 0.0);
            for (std::size_t i = 0; i < r.train_records.size(); ++i)
                sums[i] += r.train_records[i].mean_loss;
        }
        if (n == 0)
            continue;
        for (double& s : sums)
            s /= n;
        series.push_back(LossSeries{variant_name(v), std::move(sums)});
    }
    return series;
}

ComparisonResult run_paired(const ExperimentSpec& spec, bool dynamic) {
    ExperimentSpec resolved = spec;
    resolved.dynamic.enabled = dynamic && spec.dynamic.enabled;
    resolved.validate();

    const std::size_t n_seeds = resolved.seeds.size();
    std::vector<ReplicaResult> results(2 * n_seeds);
    parallel_for(static_cast<int>(2 * n_seeds), resolve_threads(resolved.threads), [&](int i) {
        std::uint64_t seed = resolved.seeds[static_cast<std::size_t>(i) / 2];
        Variant variant = i % 2 == 0 ? Variant::VanillaDqn : Variant::Idem;
        std::vector<ChangeEvent> schedule = make_schedule(resolved, seed);
        results[static_cast<std::size_t>(i)] = run_replica(resolved, variant, seed, schedule);
    });

    fs::create_directories(resolved.outdir);
    GridMap map = load_map(resolved.env.map);
    int max_steps = resolved.env.max_steps > 0 ? resolved.env.max_steps : default_max_steps(map);
    write_json(spec_json(resolved, max_steps), fs::path(resolved.outdir) / "config.json");

    std::vector<SeedSummary> base_seeds, idem_seeds;
    for (const ReplicaResult& r : results) {
        std::string tag = std::string(variant_name(r.variant)) + "_" + std::to_string(r.seed);
        fs::path dir(resolved.outdir);
        write_metrics_csv(r.train_records, (dir / ("metrics_" + tag + ".csv")).string());
        write_eval_csv(r.eval_records, (dir / ("eval_" + tag + ".csv")).string());
        write_losses_csv(r.loss_steps, r.loss_tail, (dir / ("losses_" + tag + ".csv")).string());
        save_checkpoint(r.checkpoint, (dir / ("checkpoint_" + tag + ".qnet")).string());
        (r.variant == Variant::VanillaDqn ? base_seeds : idem_seeds).push_back(r.summary);
    }

    ComparisonResult out;
    out.baseline = aggregate_summary(variant_name(Variant::VanillaDqn), base_seeds);
    out.idem = aggregate_summary(variant_name(Variant::Idem), idem_seeds);
    write_summary_csv({out.baseline, out.idem},
                      (fs::path(resolved.outdir) / "summary.csv").string());

    json summary;
    summary["experiment"] = resolved.name;
    summary["variants"]["dqn"] = summary_row_json(out.baseline);
    summary["variants"]["idem"] = summary_row_json(out.idem);
    if (resolved.dynamic.enabled) {
        json events = json::object();
        for (const ReplicaResult& r : results) {
            json per_event = json::array();
            for (const RecoveryStat& st : r.recoveries) {
                json e;
                e["episode"] = st.episode;
                e["kind"] = st.kind == ChangeEvent::Kind::GoalRelocation
                                ? "goal_relocation"
                                : "tile_stability_change";
                e["pre_change_win_rate"] = st.pre_change_win_rate;
                if (st.episodes_to_recover)
                    e["episodes_to_recover"] = *st.episodes_to_recover;
                else
                    e["episodes_to_recover"] = nullptr;
                per_event.push_back(e);
            }
            std::string tag =
                std::string(variant_name(r.variant)) + "_" + std::to_string(r.seed);
            events[tag] = per_event;
        }
        summary["events"] = events;
    }
    write_json(summary, fs::path(resolved.outdir) / "summary.json");

    std::vector<LossSeries> series = loss_series(results);
    std::size_t points = 0;
    for (const LossSeries& s : series)
        points += s.values.size();
    if (points >= 2)
        emit_loss_chart(series, (fs::path(resolved.outdir) / "loss.svg").string());
    return out;
}

} // namespace

ReplicaResult run_replica(const ExperimentSpec& spec, Variant variant, std::uint64_t seed,
                          const std::vector<ChangeEvent>& schedule) {
    AgentConfig cfg = spec.config;
    cfg.variant = variant;
    cfg.seed = seed;

    GridWorld env(load_map(spec.env.map), spec.env.slippery, spec.env.max_steps,
                  mix_seed(seed, 0x01));
    Agent agent(cfg, env.n_states());

    ReplicaResult result;
    result.seed = seed;
    result.variant = variant;
    result.train_records.reserve(static_cast<std::size_t>(cfg.episodes));

    auto next_event = schedule.begin();
    for (int ep = 0; ep < cfg.episodes; ++ep) {
        bool changed = false;
        while (next_event != schedule.end() && next_event->episode_index <= ep) {
            env.apply(*next_event);
            ++next_event;
            changed = true;
        }
        EpisodeResult er = agent.run_episode(env);
        result.train_records.push_back(MetricsRecord{seed, ep, er.steps, er.ret, er.win,
                                                     er.mean_loss, er.eta_last,
                                                     agent.window().mean(), changed});
    }

    EvalStats stats = agent.evaluate(env, spec.eval_episodes, mix_seed(seed, 0x02));
    for (int e = 0; e < stats.episodes; ++e)
        result.eval_records.push_back(EvalRecord{seed, e, stats.steps[static_cast<std::size_t>(e)],
                                                 stats.returns[static_cast<std::size_t>(e)],
                                                 stats.returns[static_cast<std::size_t>(e)] >= 1.0});

    result.summary.seed = seed;
    result.summary.win_rate = stats.win_rate();
    result.summary.avg_reward = stats.avg_reward();
    result.summary.avg_winning_steps = stats.avg_winning_steps();
    result.summary.avg_loss = tail_mean(agent.loss_history(), kLossTail);

    const std::vector<double>& losses = agent.loss_history();
    std::size_t tail = std::min(kLossTail, losses.size());
    for (std::size_t i = losses.size() - tail; i < losses.size(); ++i) {
        result.loss_steps.push_back(static_cast<long>(i));
        result.loss_tail.push_back(losses[i]);
    }

    if (!schedule.empty())
        result.recoveries = recovery_stats(result.train_records, schedule);
    result.checkpoint = Checkpoint{agent.net(), agent.adam()};
    return result;
}

ComparisonResult run_comparison(const ExperimentSpec& spec) { return run_paired(spec, false); }

ComparisonResult run_dynamic(const ExperimentSpec& spec) {
    if (!spec.dynamic.enabled)
        throw std::invalid_argument("run_dynamic needs spec.dynamic.enabled");
    return run_paired(spec, true);
}

void GridSpec::validate() const {
    base.validate();
    if (learning_rates.empty() || beta1_values.empty())
        throw std::invalid_argument("ablation axes must be nonempty");
    for (double lr : learning_rates)
        if (lr <= 0.0)
            throw std::invalid_argument("learning rates must be positive");
    for (double b : beta1_values)
        if (b < 0.0 || b >= 1.0)
            throw std::invalid_argument("beta1 values must lie in [0, 1)");
}

std::vector<GridCell> run_ablation(const GridSpec& grid) {
    grid.validate();
    const std::size_t n_lr = grid.learning_rates.size();
    const std::size_t n_b1 = grid.beta1_values.size();
    const std::size_t n_seeds = grid.base.seeds.size();
    const std::size_t n_tasks = n_lr * n_b1 * n_seeds;

    std::vector<SeedSummary> seed_results(n_tasks);
    std::vector<std::string> seed_errors(n_tasks);
    parallel_for(static_cast<int>(n_tasks), resolve_threads(grid.base.threads), [&](int idx) {
        auto i = static_cast<std::size_t>(idx);
        std::size_t cell = i / n_seeds;
        std::uint64_t seed = grid.base.seeds[i % n_seeds];
        ExperimentSpec spec = grid.base;
        spec.config.eta0 = grid.learning_rates[cell / n_b1];
        spec.config.beta1 = grid.beta1_values[cell % n_b1];
        try {
            ReplicaResult r = run_replica(spec, Variant::Idem, seed, make_schedule(spec, seed));
            seed_results[i] = r.summary;
        } catch (const std::exception& e) {
            seed_errors[i] = e.what();
        }
    });

    std::vector<GridCell> cells;
    for (std::size_t cell = 0; cell < n_lr * n_b1; ++cell) {
        GridCell gc;
        gc.lr = grid.learning_rates[cell / n_b1];
        gc.beta1 = grid.beta1_values[cell % n_b1];
        std::vector<SeedSummary> ok;
        for (std::size_t s = 0; s < n_seeds; ++s) {
            std::size_t i = cell * n_seeds + s;
            if (!seed_errors[i].empty()) {
                if (gc.error.empty())
                    gc.error = seed_errors[i];
            } else {
                ok.push_back(seed_results[i]);
            }
        }
        gc.summary = aggregate_summary(variant_name(Variant::Idem), ok);
        cells.push_back(std::move(gc));
    }

    fs::create_directories(grid.base.outdir);
    fs::path dir(grid.base.outdir);
    GridMap map = load_map(grid.base.env.map);
    int max_steps =
        grid.base.env.max_steps > 0 ? grid.base.env.max_steps : default_max_steps(map);
    json cfg = spec_json(grid.base, max_steps);
    cfg["learning_rates"] = grid.learning_rates;
    cfg["beta1_values"] = grid.beta1_values;
    write_json(cfg, dir / "config.json");

    std::ofstream os(dir / "ablation.csv", std::ios::binary);
    if (!os)
        throw std::runtime_error("cannot write ablation.csv");
    os << "lr,beta1,n_seeds,win_rate,avg_reward,avg_winning_steps,avg_loss,status\n";
    for (const GridCell& gc : cells) {
        os << csv_double(gc.lr) << ',' << csv_double(gc.beta1) << ',' << gc.summary.n_seeds
           << ',' << csv_double(gc.summary.win_rate) << ',' << csv_double(gc.summary.avg_reward)
           << ',';
        if (gc.summary.avg_winning_steps)
            os << csv_double(*gc.summary.avg_winning_steps);
        os << ',' << csv_double(gc.summary.avg_loss) << ','
           << csv_escape(gc.error.empty() ? "ok" : "error: " + gc.error) << '\n';
    }
    os.close();

    json summary;
    summary["experiment"] = grid.base.name;
    json cell_list = json::array();
    const GridCell* best = nullptr;
    for (const GridCell& gc : cells) {
        json c;
        c["lr"] = gc.lr;
        c["beta1"] = gc.beta1;
        c["summary"] = summary_row_json(gc.summary);
        c["status"] = gc.error.empty() ? "ok" : gc.error;
        cell_list.push_back(c);
        if (gc.error.empty() && (!best || gc.summary.win_rate > best->summary.win_rate))
            best = &gc;
    }
    summary["cells"] = cell_list;
    if (best) {
        summary["best_cell"]["lr"] = best->lr;
        summary["best_cell"]["beta1"] = best->beta1;
        summary["best_cell"]["win_rate"] = best->summary.win_rate;
    }
    write_json(summary, dir / "summary.json");
    return cells;
}

} // namespace idem
