#include "idem/cli.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "idem/agent.hpp"
#include "idem/checkpoint.hpp"
#include "idem/experiment.hpp"
#include "idem/selftest.hpp"

namespace idem {

namespace {

using json = nlohmann::json;

struct CliOptions {
    ExperimentSpec spec;
    int n_seeds = 10;
    std::uint64_t seed_base = 0;
    std::string config_file;
    // ablation axes
    std::vector<double> lrs = {1e-5, 1e-4, 1e-3, 1e-2};
    std::vector<double> beta1s = {0.5, 0.8, 0.9, 0.99};
    // eval
    std::string checkpoint_path;
    std::string optimizer = "adam";
    std::string cadence = "episode";
};

void add_common_options(CLI::App* cmd, CliOptions& o) {
    AgentConfig& c = o.spec.config;
    cmd->add_option("--map", o.spec.env.map, "builtin layout (4x4, 8x8) or map file path");
    cmd->add_flag("--slippery,!--no-slippery", o.spec.env.slippery, "stochastic ice movement");
    cmd->add_option("--max_steps", o.spec.env.max_steps, "episode step limit (0 = layout default)");
    cmd->add_option("--episodes", c.episodes, "training episodes per run");
    cmd->add_option("--eval_episodes", o.spec.eval_episodes, "greedy evaluation episodes");
    cmd->add_option("--seeds", o.n_seeds, "number of replicate seeds");
    cmd->add_option("--seed_base", o.seed_base, "first seed value");
    cmd->add_option("--gamma", c.gamma, "discount factor");
    cmd->add_option("--epsilon", c.epsilon, "exploration probability");
    cmd->add_option("--eta0,--lr", c.eta0, "base learning rate");
    cmd->add_option("--kappa", c.kappa, "learning-rate decay factor");
    cmd->add_option("--lambda", c.lambda, "replay weighting factor");
    cmd->add_option("--window", c.window, "TD moving-average window");
    cmd->add_option("--batch_size", c.batch_size, "training batch size");
    cmd->add_option("--capacity", c.buffer_capacity, "replay buffer capacity");
    cmd->add_option("--warmup", c.warmup, "buffer size required before training");
    cmd->add_option("--optimizer", o.optimizer, "adam or sgd");
    cmd->add_option("--cadence", o.cadence, "train once per episode or per step");
    cmd->add_option("--beta1", c.beta1, "adam first-moment decay");
    cmd->add_option("--beta2", c.beta2, "adam second-moment decay");
    cmd->add_option("--eps_adam", c.eps_adam, "adam denominator constant");
    cmd->add_option("--hidden", c.hidden, "hidden units");
    cmd->add_option("--target_sync_every", c.target_sync_every,
                    "sync a target network every N updates (0 = off)");
    cmd->add_option("--exponent_cap", c.exponent_cap, "cap on lambda*|delta| in the weight");
    cmd->add_option("--threads", o.spec.threads, "worker threads (0 = all cores)");
    cmd->add_option("--out", o.spec.outdir, "output directory");
    cmd->add_option("--config", o.config_file, "JSON config file; overrides flags");
}

void add_dynamic_options(CLI::App* cmd, CliOptions& o) {
    DynamicSchedule& d = o.spec.dynamic;
    cmd->add_option("--gap_lo", d.gap_lo, "min episodes between change events");
    cmd->add_option("--gap_hi", d.gap_hi, "max episodes between change events");
    cmd->add_option("--tile_fraction", d.tile_fraction, "share of frozen tiles re-rolled");
    cmd->add_option("--slip_lo", d.slip_lo, "lateral slip probability lower bound");
    cmd->add_option("--slip_hi", d.slip_hi, "lateral slip probability upper bound");
}

// The config file wins over flags; keys mirror the long flag names.
void apply_config_file(CliOptions& o) {
    if (o.config_file.empty())
        return;
    std::ifstream is(o.config_file);
    if (!is)
        throw std::invalid_argument("cannot read config file " + o.config_file);
    json j = json::parse(is);

    AgentConfig& c = o.spec.config;
    std::map<std::string, std::function<void(const json&)>> setters = {
        {"map", [&](const json& v) { o.spec.env.map = v.get<std::string>(); }},
        {"slippery", [&](const json& v) { o.spec.env.slippery = v.get<bool>(); }},
        {"max_steps", [&](const json& v) { o.spec.env.max_steps = v.get<int>(); }},
        {"episodes", [&](const json& v) { c.episodes = v.get<int>(); }},
        {"eval_episodes", [&](const json& v) { o.spec.eval_episodes = v.get<int>(); }},
        {"seeds", [&](const json& v) { o.n_seeds = v.get<int>(); }},
        {"seed_base", [&](const json& v) { o.seed_base = v.get<std::uint64_t>(); }},
        {"gamma", [&](const json& v) { c.gamma = v.get<double>(); }},
        {"epsilon", [&](const json& v) { c.epsilon = v.get<double>(); }},
        {"eta0", [&](const json& v) { c.eta0 = v.get<double>(); }},
        {"lr", [&](const json& v) { c.eta0 = v.get<double>(); }},
        {"kappa", [&](const json& v) { c.kappa = v.get<double>(); }},
        {"lambda", [&](const json& v) { c.lambda = v.get<double>(); }},
        {"window", [&](const json& v) { c.window = v.get<int>(); }},
        {"batch_size", [&](const json& v) { c.batch_size = v.get<int>(); }},
        {"capacity", [&](const json& v) { c.buffer_capacity = v.get<int>(); }},
        {"warmup", [&](const json& v) { c.warmup = v.get<int>(); }},
        {"optimizer", [&](const json& v) { o.optimizer = v.get<std::string>(); }},
        {"cadence", [&](const json& v) { o.cadence = v.get<std::string>(); }},
        {"beta1", [&](const json& v) { c.beta1 = v.get<double>(); }},
        {"beta2", [&](const json& v) { c.beta2 = v.get<double>(); }},
        {"eps_adam", [&](const json& v) { c.eps_adam = v.get<double>(); }},
        {"hidden", [&](const json& v) { c.hidden = v.get<int>(); }},
        {"target_sync_every", [&](const json& v) { c.target_sync_every = v.get<int>(); }},
        {"exponent_cap", [&](const json& v) { c.exponent_cap = v.get<double>(); }},
        {"threads", [&](const json& v) { o.spec.threads = v.get<int>(); }},
        {"out", [&](const json& v) { o.spec.outdir = v.get<std::string>(); }},
        {"gap_lo", [&](const json& v) { o.spec.dynamic.gap_lo = v.get<int>(); }},
        {"gap_hi", [&](const json& v) { o.spec.dynamic.gap_hi = v.get<int>(); }},
        {"tile_fraction", [&](const json& v) { o.spec.dynamic.tile_fraction = v.get<double>(); }},
        {"slip_lo", [&](const json& v) { o.spec.dynamic.slip_lo = v.get<double>(); }},
        {"slip_hi", [&](const json& v) { o.spec.dynamic.slip_hi = v.get<double>(); }},
        {"learning_rates", [&](const json& v) { o.lrs = v.get<std::vector<double>>(); }},
        {"beta1_values", [&](const json& v) { o.beta1s = v.get<std::vector<double>>(); }},
        {"checkpoint", [&](const json& v) { o.checkpoint_path = v.get<std::string>(); }},
    };
    for (auto it = j.begin(); it != j.end(); ++it) {
        auto setter = setters.find(it.key());
        if (setter == setters.end())
            throw std::invalid_argument("unknown config key '" + it.key() + "'");
        setter->second(it.value());
    }
}

void finalize(CliOptions& o) {
    apply_config_file(o);
    if (o.optimizer == "adam")
        o.spec.config.optimizer = OptimizerKind::Adam;
    else if (o.optimizer == "sgd")
        o.spec.config.optimizer = OptimizerKind::Sgd;
    else
        throw std::invalid_argument("optimizer must be adam or sgd");
    if (o.cadence == "episode")
        o.spec.config.cadence = TrainCadence::PerEpisode;
    else if (o.cadence == "step")
        o.spec.config.cadence = TrainCadence::PerStep;
    else
        throw std::invalid_argument("cadence must be episode or step");
    if (o.n_seeds < 1)
        throw std::invalid_argument("--seeds must be >= 1");
    o.spec.seeds.clear();
    for (int i = 0; i < o.n_seeds; ++i)
        o.spec.seeds.push_back(o.seed_base + static_cast<std::uint64_t>(i));
}

std::string steps_or_dash(const std::optional<double>& steps) {
    if (!steps)
        return "-";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", *steps);
    return buf;
}

void print_summary(const SummaryRow& row) {
    std::printf("%-6s win_rate %.4f  avg_reward %.4f  avg_winning_steps %s  avg_loss %.6g\n",
                row.variant.c_str(), row.win_rate, row.avg_reward,
                steps_or_dash(row.avg_winning_steps).c_str(), row.avg_loss);
}

int run_compare(CliOptions& o, bool dynamic) {
    finalize(o);
    if (o.spec.outdir.empty())
        o.spec.outdir = dynamic ? "runs/dynamic" : "runs/compare";
    o.spec.name = dynamic ? "dynamic" : "compare";
    o.spec.dynamic.enabled = dynamic;
    ComparisonResult result = dynamic ? run_dynamic(o.spec) : run_comparison(o.spec);
    print_summary(result.baseline);
    print_summary(result.idem);
    std::printf("results written to %s\n", o.spec.outdir.c_str());
    return 0;
}

int run_ablation_cmd(CliOptions& o) {
    finalize(o);
    if (o.spec.outdir.empty())
        o.spec.outdir = "runs/ablation";
    o.spec.name = "ablation";
    GridSpec grid;
    grid.learning_rates = o.lrs;
    grid.beta1_values = o.beta1s;
    grid.base = o.spec;
    std::vector<GridCell> cells = run_ablation(grid);
    const GridCell* best = nullptr;
    for (const GridCell& gc : cells) {
        std::printf("lr %-8g beta1 %-5g win_rate %.4f  avg_loss %.6g  %s\n", gc.lr, gc.beta1,
                    gc.summary.win_rate, gc.summary.avg_loss,
                    gc.error.empty() ? "ok" : gc.error.c_str());
        if (gc.error.empty() && (!best || gc.summary.win_rate > best->summary.win_rate))
            best = &gc;
    }
    if (best)
        std::printf("best cell: lr %g, beta1 %g (win_rate %.4f)\n", best->lr, best->beta1,
                    best->summary.win_rate);
    std::printf("results written to %s\n", o.spec.outdir.c_str());
    return 0;
}

int run_eval(CliOptions& o) {
    finalize(o);
    if (o.checkpoint_path.empty())
        throw std::invalid_argument("--checkpoint is required");
    Checkpoint ckpt = load_checkpoint(o.checkpoint_path);
    GridWorld env(load_map(o.spec.env.map), o.spec.env.slippery, o.spec.env.max_steps);
    if (env.n_states() != ckpt.net.n_states())
        throw std::invalid_argument("checkpoint was trained on a different map size");
    EvalStats stats = evaluate_policy(ckpt.net, env, o.spec.eval_episodes, o.seed_base);
    std::printf("episodes %d  win_rate %.4f  avg_reward %.4f  avg_winning_steps %s\n",
                stats.episodes, stats.win_rate(), stats.avg_reward(),
                steps_or_dash(stats.avg_winning_steps()).c_str());
    return 0;
}

int run_selftest_cmd() {
    std::vector<SelftestResult> results = run_selftests();
    for (const SelftestResult& r : results)
        std::printf("%-24s %s  %s\n", r.name.c_str(), r.passed ? "PASS" : "FAIL",
                    r.detail.c_str());
    return all_passed(results) ? 0 : 2;
}

} // namespace

int cli_main(int argc, const char* const* argv) {
    CLI::App app{"IDEM-DQN gridworld workbench"};
    app.require_subcommand(1);

    CliOptions opts;
    opts.spec.outdir.clear(); // subcommands pick their own default
    CLI::App* compare = app.add_subcommand("compare", "train DQN and IDEM-DQN on a static map");
    add_common_options(compare, opts);
    CLI::App* dynamic = app.add_subcommand("dynamic", "comparison with scheduled map changes");
    add_common_options(dynamic, opts);
    add_dynamic_options(dynamic, opts);
    CLI::App* ablation = app.add_subcommand("ablation", "IDEM grid sweep over lr x beta1");
    add_common_options(ablation, opts);
    ablation->add_option("--lrs", opts.lrs, "learning-rate axis")->delimiter(',');
    ablation->add_option("--beta1s", opts.beta1s, "beta1 axis")->delimiter(',');
    CLI::App* evaluate = app.add_subcommand("eval", "greedy evaluation of a saved checkpoint");
    add_common_options(evaluate, opts);
    evaluate->add_option("--checkpoint", opts.checkpoint_path, "checkpoint file");
    CLI::App* selftest =
        app.add_subcommand("selftest", "run the numerical and statistical invariant checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (compare->parsed())
            return run_compare(opts, false);
        if (dynamic->parsed())
            return run_compare(opts, true);
        if (ablation->parsed())
            return run_ablation_cmd(opts);
        if (evaluate->parsed())
            return run_eval(opts);
        if (selftest->parsed())
            return run_selftest_cmd();
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const MapError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 1;
}

} // namespace idem
