#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "idem/checkpoint.hpp"
#include "idem/cli.hpp"
#include "idem/csv.hpp"
#include "idem/experiment.hpp"
#include "idem/svg.hpp"

using namespace idem;
namespace fs = std::filesystem;
using json = nlohmann::json;

TEST_SUITE_BEGIN("harness");

namespace {

fs::path fresh_dir(const std::string& tag) {
    static int counter = 0;
    fs::path dir = fs::temp_directory_path() /
                   ("idemdqn_test_" + tag + "_" + std::to_string(counter++));
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    REQUIRE(is);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

// minimal RFC-4180 reader, independent of the writer
std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (quoted) {
            if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
                field += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            row.push_back(field);
            field.clear();
        } else if (c == '\n') {
            row.push_back(field);
            field.clear();
            rows.push_back(row);
            row.clear();
        } else {
            field += c;
        }
    }
    if (!field.empty() || !row.empty()) {
        row.push_back(field);
        rows.push_back(row);
    }
    return rows;
}

// tag-balance scan; enough to catch malformed SVG output
bool well_formed_xml(const std::string& text) {
    std::vector<std::string> stack;
    std::size_t i = 0;
    while (i < text.size()) {
        if (text[i] != '<') {
            ++i;
            continue;
        }
        std::size_t end = text.find('>', i);
        if (end == std::string::npos)
            return false;
        std::string tag = text.substr(i + 1, end - i - 1);
        i = end + 1;
        if (tag.empty())
            return false;
        if (tag.front() == '?' || tag.front() == '!')
            continue;
        bool closing = tag.front() == '/';
        bool self_closing = tag.back() == '/';
        std::string name = tag.substr(closing ? 1 : 0);
        name = name.substr(0, name.find_first_of(" \t\n/"));
        if (closing) {
            if (stack.empty() || stack.back() != name)
                return false;
            stack.pop_back();
        } else if (!self_closing) {
            stack.push_back(name);
        }
    }
    return stack.empty();
}

ExperimentSpec tiny_spec(const std::string& tag) {
    ExperimentSpec spec;
    spec.name = tag;
    spec.env.map = "4x4";
    spec.config.episodes = 6;
    spec.config.batch_size = 16;
    spec.config.buffer_capacity = 64;
    spec.config.warmup = 16;
    spec.config.window = 10;
    spec.seeds = {1, 2};
    spec.eval_episodes = 25;
    spec.outdir = fresh_dir(tag).string();
    spec.threads = 2;
    return spec;
}

int cli(std::vector<std::string> args) {
    std::vector<const char*> argv;
    argv.push_back("idem");
    for (const std::string& a : args)
        argv.push_back(a.c_str());
    return cli_main(static_cast<int>(argv.size()), argv.data());
}

} // namespace

TEST_CASE("csv formatting basics") {
    CHECK(csv_double(0.25) == "0.25");
    CHECK(csv_double(1.0 / 3.0) == "0.333333333"); // 9 significant digits
    CHECK(csv_escape("plain") == "plain");
    CHECK(csv_escape("a,b") == "\"a,b\"");
    CHECK(csv_escape("say \"hi\"") == "\"say \"\"hi\"\"\"");
}

TEST_CASE("metrics csv writes nine columns and round-trips") {
    fs::path dir = fresh_dir("csv");
    std::vector<MetricsRecord> records = {
        {7, 0, 12, 1.0, true, 0.125, 1e-4, 0.5, false},
        {7, 1, 100, 0.0, false, 0.0625, 9.5e-5, 0.25, true},
    };
    fs::path path = dir / "metrics.csv";
    write_metrics_csv(records, path.string());

    auto rows = parse_csv(slurp(path));
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].size() == 9);
    CHECK(rows[0][0] == "seed");
    CHECK(rows[1] == std::vector<std::string>{"7", "0", "12", "1", "1", "0.125", "0.0001",
                                              "0.5", "0"});
    CHECK(rows[2][8] == "1");

    SUBCASE("empty record list leaves a header-only file") {
        write_metrics_csv({}, path.string());
        auto only = parse_csv(slurp(path));
        REQUIRE(only.size() == 1);
        CHECK(only[0].size() == 9);
    }
}

TEST_CASE("summary csv uses an empty field when nothing was won") {
    fs::path dir = fresh_dir("summary");
    SummaryRow row;
    row.variant = "dqn";
    row.avg_winning_steps = std::nullopt;
    row.win_rate = 0.0;
    row.avg_reward = 0.0;
    row.avg_loss = 0.5;
    row.n_seeds = 2;
    fs::path path = dir / "summary.csv";
    write_summary_csv({row}, path.string());
    auto rows = parse_csv(slurp(path));
    REQUIRE(rows.size() == 2);
    CHECK(rows[1][1] == "");
}

TEST_CASE("loss chart is valid xml with one polyline per series") {
    fs::path dir = fresh_dir("svg");
    fs::path path = dir / "loss.svg";
    std::vector<LossSeries> series = {
        {"dqn", {0.5, 0.4, 0.3, 0.35, 0.2}},
        {"idem", {0.5, 0.3, 0.2, 0.15, 0.1}},
    };
    emit_loss_chart(series, path.string());
    std::string svg = slurp(path);
    CHECK(well_formed_xml(svg));
    std::size_t count = 0, pos = 0;
    while ((pos = svg.find("<polyline", pos)) != std::string::npos) {
        ++count;
        pos += 9;
    }
    CHECK(count == 2);

    SUBCASE("constant series draws a horizontal line") {
        emit_loss_chart({{"flat", {0.25, 0.25, 0.25}}}, path.string());
        std::string flat = slurp(path);
        std::size_t start = flat.find("points=\"");
        REQUIRE(start != std::string::npos);
        std::string points = flat.substr(start + 8, flat.find('"', start + 8) - start - 8);
        // every 'x,y' pair shares one y coordinate
        std::istringstream is(points);
        std::string pair;
        std::string first_y;
        while (is >> pair) {
            std::string y = pair.substr(pair.find(',') + 1);
            if (first_y.empty())
                first_y = y;
            CHECK(y == first_y);
        }
    }

    SUBCASE("fewer than two points is an error") {
        CHECK_THROWS_AS(emit_loss_chart({{"dqn", {0.5}}}, path.string()),
                        std::invalid_argument);
    }
}

TEST_CASE("checkpoints round-trip bit-exactly") {
    fs::path dir = fresh_dir("ckpt");
    QNetwork net = init_network(16, 4, 12, 3);
    AdamState adam = AdamState::like(net, 0.85, 0.995, 1e-7);
    std::vector<int> states = {1, 5};
    std::vector<int> actions = {2, 0};
    std::vector<double> targets = {0.7, -0.3};
    for (int i = 0; i < 7; ++i)
        adam_step(net, adam, backward(net, states, actions, targets), 1e-3);

    fs::path path = dir / "net.qnet";
    save_checkpoint({net, adam}, path.string());
    Checkpoint loaded = load_checkpoint(path.string());
    CHECK(loaded.net.layer1.weights == net.layer1.weights);
    CHECK(loaded.net.layer1.biases == net.layer1.biases);
    CHECK(loaded.net.layer2.weights == net.layer2.weights);
    CHECK(loaded.net.layer2.biases == net.layer2.biases);
    CHECK(loaded.adam.t == adam.t);
    CHECK(loaded.adam.m_w1 == adam.m_w1);
    CHECK(loaded.adam.v_w2 == adam.v_w2);
    CHECK(loaded.adam.beta1 == adam.beta1);

    CHECK_THROWS(load_checkpoint((dir / "missing.qnet").string()));
}

TEST_CASE("comparison run writes the full output layout") {
    ExperimentSpec spec = tiny_spec("compare");
    ComparisonResult result = run_comparison(spec);
    CHECK(result.baseline.n_seeds == 2);
    CHECK(result.idem.n_seeds == 2);

    fs::path dir(spec.outdir);
    for (const char* name :
         {"config.json", "summary.json", "summary.csv", "loss.svg", "metrics_dqn_1.csv",
          "metrics_idem_1.csv", "metrics_dqn_2.csv", "metrics_idem_2.csv", "eval_dqn_1.csv",
          "eval_idem_2.csv", "losses_dqn_1.csv", "checkpoint_idem_2.qnet"})
        CHECK(fs::exists(dir / name));

    auto rows = parse_csv(slurp(dir / "metrics_dqn_1.csv"));
    CHECK(rows.size() == 1 + 6); // header + one row per episode
    CHECK(well_formed_xml(slurp(dir / "loss.svg")));
}

TEST_CASE("summary aggregation matches a re-aggregation of the written records") {
    ExperimentSpec spec = tiny_spec("reagg");
    spec.eval_episodes = 40;
    run_comparison(spec);
    fs::path dir(spec.outdir);
    json summary = json::parse(slurp(dir / "summary.json"));

    for (const std::string variant : {"dqn", "idem"}) {
        double win_sum = 0.0, reward_sum = 0.0, loss_sum = 0.0;
        for (const json& per_seed : summary["variants"][variant]["per_seed"]) {
            std::uint64_t seed = per_seed["seed"].get<std::uint64_t>();
            std::string tag = variant + "_" + std::to_string(seed);

            auto eval_rows = parse_csv(slurp(dir / ("eval_" + tag + ".csv")));
            REQUIRE(eval_rows.size() == 41u);
            int wins = 0;
            double reward = 0.0, win_steps = 0.0;
            for (std::size_t i = 1; i < eval_rows.size(); ++i) {
                reward += std::stod(eval_rows[i][3]);
                if (eval_rows[i][4] == "1") {
                    ++wins;
                    win_steps += std::stod(eval_rows[i][2]);
                }
            }
            double win_rate = wins / 40.0;
            CHECK(per_seed["win_rate"].get<double>() ==
                  doctest::Approx(win_rate).epsilon(1e-9));
            CHECK(per_seed["avg_reward"].get<double>() ==
                  doctest::Approx(reward / 40.0).epsilon(1e-9));
            if (wins > 0)
                CHECK(per_seed["avg_winning_steps"].get<double>() ==
                      doctest::Approx(win_steps / wins).epsilon(1e-9));
            else
                CHECK(per_seed["avg_winning_steps"].is_null());

            auto loss_rows = parse_csv(slurp(dir / ("losses_" + tag + ".csv")));
            double mean_loss = 0.0;
            for (std::size_t i = 1; i < loss_rows.size(); ++i)
                mean_loss += std::stod(loss_rows[i][1]);
            if (loss_rows.size() > 1) {
                mean_loss /= static_cast<double>(loss_rows.size() - 1);
                CHECK(per_seed["avg_loss"].get<double>() ==
                      doctest::Approx(mean_loss).epsilon(1e-9));
            }
            win_sum += per_seed["win_rate"].get<double>();
            reward_sum += per_seed["avg_reward"].get<double>();
            loss_sum += per_seed["avg_loss"].get<double>();
        }
        CHECK(summary["variants"][variant]["win_rate"].get<double>() ==
              doctest::Approx(win_sum / 2.0).epsilon(1e-12));
        CHECK(summary["variants"][variant]["avg_reward"].get<double>() ==
              doctest::Approx(reward_sum / 2.0).epsilon(1e-12));
        CHECK(summary["variants"][variant]["avg_loss"].get<double>() ==
              doctest::Approx(loss_sum / 2.0).epsilon(1e-12));
    }
}

TEST_CASE("reruns are byte-identical") {
    ExperimentSpec spec = tiny_spec("determinism_a");
    run_comparison(spec);
    ExperimentSpec again = spec;
    again.outdir = fresh_dir("determinism_b").string();
    run_comparison(again);

    int compared = 0;
    for (const auto& entry : fs::directory_iterator(spec.outdir)) {
        fs::path other = fs::path(again.outdir) / entry.path().filename();
        CAPTURE(entry.path().string());
        REQUIRE(fs::exists(other));
        CHECK(slurp(entry.path()) == slurp(other));
        ++compared;
    }
    CHECK(compared >= 18);
}

TEST_CASE("dynamic run with no reachable events reduces to the static one") {
    ExperimentSpec spec = tiny_spec("dyn_zero");
    spec.dynamic.enabled = true;
    spec.dynamic.gap_lo = 10000; // beyond the horizon: no events fire
    spec.dynamic.gap_hi = 20000;
    ComparisonResult dynamic_result = run_dynamic(spec);

    ExperimentSpec plain = tiny_spec("dyn_zero_plain");
    plain.dynamic = DynamicSchedule{};
    ComparisonResult static_result = run_comparison(plain);

    CHECK(dynamic_result.baseline.win_rate == static_result.baseline.win_rate);
    CHECK(dynamic_result.baseline.avg_loss == static_result.baseline.avg_loss);
    CHECK(dynamic_result.idem.win_rate == static_result.idem.win_rate);
    CHECK(dynamic_result.idem.avg_loss == static_result.idem.avg_loss);
}

TEST_CASE("dynamic run records change events and recovery stats") {
    ExperimentSpec spec = tiny_spec("dyn");
    spec.config.episodes = 40;
    spec.dynamic.enabled = true;
    spec.dynamic.gap_lo = 8;
    spec.dynamic.gap_hi = 12;
    run_dynamic(spec);

    fs::path dir(spec.outdir);
    auto rows = parse_csv(slurp(dir / "metrics_idem_1.csv"));
    int flagged = 0;
    for (std::size_t i = 1; i < rows.size(); ++i)
        flagged += rows[i][8] == "1" ? 1 : 0;
    CHECK(flagged >= 2);

    json summary = json::parse(slurp(dir / "summary.json"));
    REQUIRE(summary.contains("events"));
    const json& events = summary["events"]["idem_1"];
    CHECK(events.size() == static_cast<std::size_t>(flagged));
    for (const json& e : events) {
        CHECK((e["kind"] == "goal_relocation" || e["kind"] == "tile_stability_change"));
        CHECK(e["pre_change_win_rate"].get<double>() >= 0.0);
    }
}

TEST_CASE("a one-cell ablation equals the single run") {
    GridSpec grid;
    grid.learning_rates = {1e-3};
    grid.beta1_values = {0.9};
    grid.base = tiny_spec("ablation");
    grid.base.seeds = {3};
    std::vector<GridCell> cells = run_ablation(grid);
    REQUIRE(cells.size() == 1);
    CHECK(cells[0].error.empty());

    ExperimentSpec direct = grid.base;
    direct.config.eta0 = 1e-3;
    direct.config.beta1 = 0.9;
    ReplicaResult replica = run_replica(direct, Variant::Idem, 3, {});
    CHECK(cells[0].summary.win_rate == replica.summary.win_rate);
    CHECK(cells[0].summary.avg_loss == replica.summary.avg_loss);

    fs::path dir(grid.base.outdir);
    CHECK(fs::exists(dir / "ablation.csv"));
    auto rows = parse_csv(slurp(dir / "ablation.csv"));
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].size() == 8);
    CHECK(rows[1][7] == "ok");
}

TEST_CASE("ablation keeps going when a cell fails") {
    // goal relocation has no legal target on this map, so every scheduled
    // change throws and the cell is marked failed instead of aborting
    fs::path dir = fresh_dir("ablation_fail");
    fs::path map_file = dir / "stuck.txt";
    {
        std::ofstream os(map_file);
        os << "SGH\nHHH\nHHF\n";
    }
    GridSpec grid;
    grid.learning_rates = {1e-3};
    grid.beta1_values = {0.9};
    grid.base = tiny_spec("ablation_fail_run");
    grid.base.seeds = {3};
    grid.base.env.map = map_file.string();
    grid.base.config.episodes = 10;
    grid.base.dynamic.enabled = true;
    grid.base.dynamic.gap_lo = 2;
    grid.base.dynamic.gap_hi = 3;
    std::vector<GridCell> cells = run_ablation(grid);
    REQUIRE(cells.size() == 1);
    CHECK_FALSE(cells[0].error.empty());
    auto rows = parse_csv(slurp(fs::path(grid.base.outdir) / "ablation.csv"));
    REQUIRE(rows.size() == 2);
    CHECK(rows[1][7].substr(0, 5) == "error");
}

TEST_CASE("cli exit codes") {
    CHECK(cli({"compare", "--bogus"}) == 1);
    CHECK(cli({}) == 1);
    CHECK(cli({"eval", "--checkpoint", "/nonexistent/x.qnet"}) == 2);
    CHECK(cli({"compare", "--map", "nope.txt", "--episodes", "1", "--seeds", "1"}) == 1);
    CHECK(cli({"compare", "--epsilon", "7", "--episodes", "1", "--seeds", "1"}) == 1);
}

TEST_CASE("cli compare runs end to end and the config file wins over flags") {
    fs::path dir = fresh_dir("cli");
    fs::path config = dir / "config.json";
    {
        std::ofstream os(config);
        os << R"({"episodes": 3, "eval_episodes": 10})";
    }
    int code = cli({"compare", "--map", "4x4", "--episodes", "99", "--seeds", "1",
                    "--batch_size", "8", "--warmup", "8", "--capacity", "32",
                    "--eval_episodes", "5", "--threads", "1", "--out",
                    (dir / "run").string(), "--config", config.string()});
    CHECK(code == 0);
    json written = json::parse(slurp(dir / "run" / "config.json"));
    CHECK(written["episodes"].get<int>() == 3); // config overrode the flag
    CHECK(written["eval_episodes"].get<int>() == 10);

    auto rows = parse_csv(slurp(dir / "run" / "metrics_dqn_0.csv"));
    CHECK(rows.size() == 1 + 3);

    SUBCASE("eval subcommand reads the trained checkpoint") {
        int eval_code = cli({"eval", "--checkpoint",
                             (dir / "run" / "checkpoint_idem_0.qnet").string(), "--map", "4x4",
                             "--eval_episodes", "5"});
        CHECK(eval_code == 0);
    }
    SUBCASE("unknown config keys are rejected") {
        {
            std::ofstream os(config);
            os << R"({"episodess": 3})";
        }
        CHECK(cli({"compare", "--config", config.string()}) == 1);
    }
}

TEST_SUITE_END();
