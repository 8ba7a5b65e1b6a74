#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "idem/agent.hpp"
#include "idem/checkpoint.hpp"
#include "idem/experiment.hpp"
#include "idem/gridworld.hpp"
#include "idem/qnet.hpp"
#include "idem/replay.hpp"
#include "idem/selftest.hpp"

namespace py = pybind11;
using namespace idem;

PYBIND11_MODULE(_core, m) {
    m.doc() = "IDEM-DQN gridworld workbench: slippery-lake environment, weighted "
              "experience replay, two-layer Q-network, and experiment runners.";

    py::class_<std::mt19937_64>(m, "Rng")
        .def(py::init<std::uint64_t>(), py::arg("seed") = 0);

    py::enum_<Action>(m, "Action")
        .value("LEFT", Action::Left)
        .value("DOWN", Action::Down)
        .value("RIGHT", Action::Right)
        .value("UP", Action::Up);

    py::enum_<Cell>(m, "Cell")
        .value("START", Cell::Start)
        .value("FROZEN", Cell::Frozen)
        .value("HOLE", Cell::Hole)
        .value("GOAL", Cell::Goal);

    py::class_<GridMap>(m, "GridMap")
        .def_static("parse", &GridMap::parse, py::arg("text"))
        .def_static("builtin", &GridMap::builtin, py::arg("name"))
        .def_readonly("rows", &GridMap::rows)
        .def_readonly("cols", &GridMap::cols)
        .def("size", &GridMap::size)
        .def("at", &GridMap::at, py::arg("index"))
        .def("start_index", &GridMap::start_index)
        .def("goal_index", &GridMap::goal_index)
        .def("solvable", &GridMap::solvable);

    py::class_<SlipProbs>(m, "SlipProbs")
        .def(py::init([](double intended, double side1, double side2) {
                 return SlipProbs{intended, side1, side2};
             }),
             py::arg("intended"), py::arg("side1"), py::arg("side2"))
        .def_static("lateral", &SlipProbs::lateral, py::arg("s"))
        .def_static("uniform_third", &SlipProbs::uniform_third)
        .def_readwrite("intended", &SlipProbs::intended)
        .def_readwrite("side1", &SlipProbs::side1)
        .def_readwrite("side2", &SlipProbs::side2);

    py::class_<StepOutcome>(m, "StepOutcome")
        .def_readonly("next_state", &StepOutcome::next_state)
        .def_readonly("reward", &StepOutcome::reward)
        .def_readonly("done", &StepOutcome::done)
        .def_readonly("truncated", &StepOutcome::truncated);

    py::class_<Outcome>(m, "Outcome")
        .def_readonly("next_state", &Outcome::next_state)
        .def_readonly("probability", &Outcome::probability)
        .def_readonly("reward", &Outcome::reward)
        .def_readonly("done", &Outcome::done);

    py::enum_<ChangeEvent::Kind>(m, "ChangeKind")
        .value("GOAL_RELOCATION", ChangeEvent::Kind::GoalRelocation)
        .value("TILE_STABILITY_CHANGE", ChangeEvent::Kind::TileStabilityChange);

    py::class_<ChangeEvent>(m, "ChangeEvent")
        .def_readonly("kind", &ChangeEvent::kind)
        .def_readonly("episode_index", &ChangeEvent::episode_index)
        .def_readonly("old_goal", &ChangeEvent::old_goal)
        .def_readonly("new_goal", &ChangeEvent::new_goal)
        .def_readonly("tiles", &ChangeEvent::tiles)
        .def_readonly("slips", &ChangeEvent::slips);

    py::class_<GridWorld>(m, "GridWorld")
        .def(py::init<GridMap, bool, int, std::uint64_t>(), py::arg("map"),
             py::arg("slippery") = true, py::arg("max_steps") = 0, py::arg("seed") = 0)
        .def("reset", &GridWorld::reset)
        .def("seed", &GridWorld::seed, py::arg("value"))
        .def("step", &GridWorld::step, py::arg("action"))
        .def("transition_model", &GridWorld::transition_model, py::arg("state"),
             py::arg("action"))
        .def("state", &GridWorld::state)
        .def("set_state", &GridWorld::set_state, py::arg("index"))
        .def("steps_taken", &GridWorld::steps_taken)
        .def("terminated", &GridWorld::terminated)
        .def("max_steps", &GridWorld::max_steps)
        .def("slippery", &GridWorld::slippery)
        .def("n_states", &GridWorld::n_states)
        .def("map", &GridWorld::map, py::return_value_policy::reference_internal)
        .def("tile_slip", &GridWorld::tile_slip, py::return_value_policy::copy,
             py::arg("index"))
        .def("set_tile_slip", &GridWorld::set_tile_slip, py::arg("index"), py::arg("probs"))
        .def("apply", &GridWorld::apply, py::arg("event"))
        .def("inject_goal_relocation", &GridWorld::inject_goal_relocation, py::arg("rng"),
             py::arg("episode_index") = 0)
        .def("inject_tile_stability_change", &GridWorld::inject_tile_stability_change,
             py::arg("rng"), py::arg("fraction") = 0.25, py::arg("slip_lo") = 0.0,
             py::arg("slip_hi") = 0.5, py::arg("episode_index") = 0);

    m.def("encode_state", &encode_state, py::arg("index"), py::arg("n_states"));
    m.def("default_max_steps", &default_max_steps, py::arg("map"));

    py::class_<LayerParams>(m, "LayerParams")
        .def_readwrite("out_dim", &LayerParams::out)
        .def_readwrite("in_dim", &LayerParams::in)
        .def_readwrite("weights", &LayerParams::weights)
        .def_readwrite("biases", &LayerParams::biases);

    py::class_<QNetwork>(m, "QNetwork")
        .def_readwrite("layer1", &QNetwork::layer1)
        .def_readwrite("layer2", &QNetwork::layer2)
        .def("n_states", &QNetwork::n_states)
        .def("n_actions", &QNetwork::n_actions)
        .def("hidden", &QNetwork::hidden)
        .def("forward", &QNetwork::forward, py::arg("state_vec"))
        .def("q_values", &QNetwork::q_values, py::arg("state_index"));

    m.def("init_network", &init_network, py::arg("n_states"), py::arg("n_actions"),
          py::arg("hidden") = 50, py::arg("seed") = 0);

    py::class_<GradientSet>(m, "GradientSet")
        .def_readonly("w1", &GradientSet::w1)
        .def_readonly("b1", &GradientSet::b1)
        .def_readonly("w2", &GradientSet::w2)
        .def_readonly("b2", &GradientSet::b2)
        .def_readonly("loss", &GradientSet::loss);

    m.def(
        "backward",
        [](const QNetwork& net, const std::vector<int>& states, const std::vector<int>& actions,
           const std::vector<double>& targets) {
            return backward(net, states, actions, targets);
        },
        py::arg("net"), py::arg("states"), py::arg("actions"), py::arg("targets"));

    py::class_<AdamState>(m, "AdamState")
        .def_static("like", &AdamState::like, py::arg("net"), py::arg("beta1") = 0.9,
                    py::arg("beta2") = 0.999, py::arg("epsilon") = 1e-8)
        .def_readonly("t", &AdamState::t)
        .def_readonly("beta1", &AdamState::beta1)
        .def_readonly("beta2", &AdamState::beta2)
        .def_readonly("epsilon", &AdamState::epsilon);

    m.def("adam_step", &adam_step, py::arg("net"), py::arg("adam"), py::arg("grads"),
          py::arg("step_size"));
    m.def("sgd_step", &sgd_step, py::arg("net"), py::arg("grads"), py::arg("step_size"));

    py::enum_<ReplayMode>(m, "ReplayMode")
        .value("WEIGHTED", ReplayMode::Weighted)
        .value("UNIFORM", ReplayMode::Uniform);

    py::class_<Transition>(m, "Transition")
        .def(py::init([](int state, int action, double reward, int next_state, bool done) {
                 return Transition{state, action, reward, next_state, done, 0.0, 1.0};
             }),
             py::arg("state"), py::arg("action"), py::arg("reward"), py::arg("next_state"),
             py::arg("done"))
        .def_readwrite("state", &Transition::state)
        .def_readwrite("action", &Transition::action)
        .def_readwrite("reward", &Transition::reward)
        .def_readwrite("next_state", &Transition::next_state)
        .def_readwrite("done", &Transition::done)
        .def_readonly("td_error", &Transition::td_error)
        .def_readonly("weight", &Transition::weight);

    m.def("weight_of", &weight_of, py::arg("delta"), py::arg("lambda_"), py::arg("cap") = 50.0);
    m.def("adaptive_lr", &adaptive_lr, py::arg("eta0"), py::arg("kappa"),
          py::arg("mean_abs_delta"));

    py::class_<SampleBatch>(m, "SampleBatch")
        .def_readonly("indices", &SampleBatch::indices)
        .def_readonly("transitions", &SampleBatch::transitions);

    py::class_<ReplayBuffer>(m, "ReplayBuffer")
        .def(py::init<int, ReplayMode, double, double>(), py::arg("capacity") = 3000,
             py::arg("mode") = ReplayMode::Weighted, py::arg("lambda_") = 0.5,
             py::arg("exponent_cap") = 50.0)
        .def("push", &ReplayBuffer::push, py::arg("transition"), py::arg("delta_init"))
        .def("size", &ReplayBuffer::size)
        .def("capacity", &ReplayBuffer::capacity)
        .def("mode", &ReplayBuffer::mode)
        .def("at", &ReplayBuffer::at, py::return_value_policy::copy, py::arg("slot"))
        .def("probabilities", &ReplayBuffer::probabilities)
        .def("sample", &ReplayBuffer::sample, py::arg("batch_size"), py::arg("rng"))
        .def(
            "refresh_weights",
            [](ReplayBuffer& b, const std::vector<int>& slots,
               const std::vector<double>& deltas) { b.refresh_weights(slots, deltas); },
            py::arg("slots"), py::arg("deltas"))
        .def("dump_csv", [](const ReplayBuffer& b) {
            std::ostringstream os;
            b.dump_csv(os);
            return os.str();
        });

    py::enum_<Variant>(m, "Variant")
        .value("VANILLA_DQN", Variant::VanillaDqn)
        .value("IDEM", Variant::Idem);

    py::enum_<OptimizerKind>(m, "OptimizerKind")
        .value("ADAM", OptimizerKind::Adam)
        .value("SGD", OptimizerKind::Sgd);

    py::class_<AgentConfig>(m, "AgentConfig")
        .def(py::init<>())
        .def_readwrite("gamma", &AgentConfig::gamma)
        .def_readwrite("epsilon", &AgentConfig::epsilon)
        .def_readwrite("eta0", &AgentConfig::eta0)
        .def_readwrite("kappa", &AgentConfig::kappa)
        .def_readwrite("lambda_", &AgentConfig::lambda)
        .def_readwrite("window", &AgentConfig::window)
        .def_readwrite("batch_size", &AgentConfig::batch_size)
        .def_readwrite("buffer_capacity", &AgentConfig::buffer_capacity)
        .def_readwrite("warmup", &AgentConfig::warmup)
        .def_readwrite("episodes", &AgentConfig::episodes)
        .def_readwrite("variant", &AgentConfig::variant)
        .def_readwrite("optimizer", &AgentConfig::optimizer)
        .def_readwrite("beta1", &AgentConfig::beta1)
        .def_readwrite("beta2", &AgentConfig::beta2)
        .def_readwrite("eps_adam", &AgentConfig::eps_adam)
        .def_readwrite("hidden", &AgentConfig::hidden)
        .def_readwrite("seed", &AgentConfig::seed)
        .def_readwrite("target_sync_every", &AgentConfig::target_sync_every)
        .def_readwrite("exponent_cap", &AgentConfig::exponent_cap)
        .def("validate", &AgentConfig::validate);

    py::class_<TrainStepResult>(m, "TrainStepResult")
        .def_readonly("loss", &TrainStepResult::loss)
        .def_readonly("eta", &TrainStepResult::eta);

    py::class_<EpisodeResult>(m, "EpisodeResult")
        .def_readonly("steps", &EpisodeResult::steps)
        .def_readonly("ret", &EpisodeResult::ret)
        .def_readonly("win", &EpisodeResult::win)
        .def_readonly("mean_loss", &EpisodeResult::mean_loss)
        .def_readonly("eta_last", &EpisodeResult::eta_last)
        .def_readonly("train_steps", &EpisodeResult::train_steps);

    py::class_<EvalStats>(m, "EvalStats")
        .def_readonly("episodes", &EvalStats::episodes)
        .def_readonly("wins", &EvalStats::wins)
        .def_readonly("steps", &EvalStats::steps)
        .def_readonly("returns", &EvalStats::returns)
        .def("win_rate", &EvalStats::win_rate)
        .def("avg_reward", &EvalStats::avg_reward)
        .def("avg_winning_steps", &EvalStats::avg_winning_steps);

    py::class_<Agent>(m, "Agent")
        .def(py::init<const AgentConfig&, int, int>(), py::arg("config"), py::arg("n_states"),
             py::arg("n_actions") = kNumActions)
        .def("select_action", &Agent::select_action, py::arg("state"), py::arg("epsilon"),
             py::arg("rng"))
        .def("td_target", &Agent::td_target, py::arg("reward"), py::arg("next_state"),
             py::arg("done"))
        .def("td_error", &Agent::td_error, py::arg("transition"))
        .def("train_step", &Agent::train_step)
        .def("run_episode", &Agent::run_episode, py::arg("env"))
        .def("greedy_policy", &Agent::greedy_policy)
        .def("evaluate", &Agent::evaluate, py::arg("env"), py::arg("n_episodes"),
             py::arg("eval_seed"))
        .def("net", static_cast<const QNetwork& (Agent::*)() const>(&Agent::net),
             py::return_value_policy::reference_internal)
        .def("buffer", static_cast<const ReplayBuffer& (Agent::*)() const>(&Agent::buffer),
             py::return_value_policy::reference_internal)
        .def("loss_history", &Agent::loss_history)
        .def("last_eta", &Agent::last_eta)
        .def("train_steps", &Agent::train_steps);

    m.def("greedy_action", &greedy_action, py::arg("net"), py::arg("state"));
    m.def("evaluate_policy", &evaluate_policy, py::arg("net"), py::arg("env"),
          py::arg("n_episodes"), py::arg("eval_seed"));

    py::class_<Checkpoint>(m, "Checkpoint")
        .def_readwrite("net", &Checkpoint::net)
        .def_readwrite("adam", &Checkpoint::adam);
    m.def("save_checkpoint", &save_checkpoint, py::arg("checkpoint"), py::arg("path"));
    m.def("load_checkpoint", &load_checkpoint, py::arg("path"));

    py::class_<EnvSettings>(m, "EnvSettings")
        .def(py::init<>())
        .def_readwrite("map", &EnvSettings::map)
        .def_readwrite("slippery", &EnvSettings::slippery)
        .def_readwrite("max_steps", &EnvSettings::max_steps);

    py::class_<DynamicSchedule>(m, "DynamicSchedule")
        .def(py::init<>())
        .def_readwrite("enabled", &DynamicSchedule::enabled)
        .def_readwrite("gap_lo", &DynamicSchedule::gap_lo)
        .def_readwrite("gap_hi", &DynamicSchedule::gap_hi)
        .def_readwrite("tile_fraction", &DynamicSchedule::tile_fraction)
        .def_readwrite("slip_lo", &DynamicSchedule::slip_lo)
        .def_readwrite("slip_hi", &DynamicSchedule::slip_hi);

    py::class_<ExperimentSpec>(m, "ExperimentSpec")
        .def(py::init<>())
        .def_readwrite("name", &ExperimentSpec::name)
        .def_readwrite("env", &ExperimentSpec::env)
        .def_readwrite("config", &ExperimentSpec::config)
        .def_readwrite("seeds", &ExperimentSpec::seeds)
        .def_readwrite("eval_episodes", &ExperimentSpec::eval_episodes)
        .def_readwrite("outdir", &ExperimentSpec::outdir)
        .def_readwrite("dynamic", &ExperimentSpec::dynamic)
        .def_readwrite("threads", &ExperimentSpec::threads);

    py::class_<SeedSummary>(m, "SeedSummary")
        .def_readonly("seed", &SeedSummary::seed)
        .def_readonly("win_rate", &SeedSummary::win_rate)
        .def_readonly("avg_reward", &SeedSummary::avg_reward)
        .def_readonly("avg_winning_steps", &SeedSummary::avg_winning_steps)
        .def_readonly("avg_loss", &SeedSummary::avg_loss);

    py::class_<SummaryRow>(m, "SummaryRow")
        .def_readonly("variant", &SummaryRow::variant)
        .def_readonly("avg_winning_steps", &SummaryRow::avg_winning_steps)
        .def_readonly("win_rate", &SummaryRow::win_rate)
        .def_readonly("avg_reward", &SummaryRow::avg_reward)
        .def_readonly("avg_loss", &SummaryRow::avg_loss)
        .def_readonly("n_seeds", &SummaryRow::n_seeds)
        .def_readonly("per_seed", &SummaryRow::per_seed);

    py::class_<ComparisonResult>(m, "ComparisonResult")
        .def_readonly("baseline", &ComparisonResult::baseline)
        .def_readonly("idem", &ComparisonResult::idem);

    m.def("run_comparison", &run_comparison, py::arg("spec"),
          py::call_guard<py::gil_scoped_release>());
    m.def("run_dynamic", &run_dynamic, py::arg("spec"),
          py::call_guard<py::gil_scoped_release>());

    py::class_<GridSpec>(m, "GridSpec")
        .def(py::init<>())
        .def_readwrite("learning_rates", &GridSpec::learning_rates)
        .def_readwrite("beta1_values", &GridSpec::beta1_values)
        .def_readwrite("base", &GridSpec::base);

    py::class_<GridCell>(m, "GridCell")
        .def_readonly("lr", &GridCell::lr)
        .def_readonly("beta1", &GridCell::beta1)
        .def_readonly("summary", &GridCell::summary)
        .def_readonly("error", &GridCell::error);

    m.def("run_ablation", &run_ablation, py::arg("grid"),
          py::call_guard<py::gil_scoped_release>());

    py::class_<SelftestResult>(m, "SelftestResult")
        .def_readonly("name", &SelftestResult::name)
        .def_readonly("passed", &SelftestResult::passed)
        .def_readonly("detail", &SelftestResult::detail);
    m.def("run_selftests", &run_selftests, py::arg("seed") = 20240101,
          py::call_guard<py::gil_scoped_release>());

    py::register_exception<MapError>(m, "MapError", PyExc_ValueError);
}
