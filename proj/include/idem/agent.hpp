#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "idem/gridworld.hpp"
#include "idem/qnet.hpp"
#include "idem/replay.hpp"

namespace idem {

struct BufferBelowWarmup : std::logic_error {
    BufferBelowWarmup() : std::logic_error("replay buffer below warmup size") {}
};

enum class Variant { VanillaDqn, Idem };
enum class OptimizerKind { Adam, Sgd };
enum class TrainCadence { PerEpisode, PerStep };

const char* variant_name(Variant v);

struct AgentConfig {
    double gamma = 0.99;
    double epsilon = 0.1;
    double eta0 = 1e-4;   // base learning rate
    double kappa = 1.0;   // learning-rate decay factor
    double lambda = 0.5;  // replay weighting factor
    int window = 100;     // moving-average window of batch-mean |delta|
    int batch_size = 1000;
    int buffer_capacity = 3000;
    int warmup = 1000;
    int episodes = 3000;
    Variant variant = Variant::Idem;
    OptimizerKind optimizer = OptimizerKind::Adam;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps_adam = 1e-8;
    int hidden = 50;
    std::uint64_t seed = 0;
    int target_sync_every = 0; // 0 = single network, no target copies
    double exponent_cap = 50.0;
    // One batch update per finished episode matches the reference results;
    // PerStep trains after every environment step instead.
    TrainCadence cadence = TrainCadence::PerEpisode;

    void validate() const; // throws std::invalid_argument

    // the vanilla variant is uniform replay with a constant learning rate
    ReplayMode replay_mode() const {
        return variant == Variant::VanillaDqn ? ReplayMode::Uniform : ReplayMode::Weighted;
    }
    double effective_kappa() const { return variant == Variant::VanillaDqn ? 0.0 : kappa; }
};

// eta = eta0 * exp(-kappa * mean_abs_delta); in (0, eta0], continuous and
// strictly decreasing in the error average for kappa > 0.
double adaptive_lr(double eta0, double kappa, double mean_abs_delta);

// Ring of the last W batch-mean absolute TD errors.
class TDWindow {
public:
    explicit TDWindow(int capacity);
    void push(double abs_delta);
    double mean() const; // 0 while empty
    int size() const { return count_; }
    int capacity() const { return static_cast<int>(ring_.size()); }

private:
    std::vector<double> ring_;
    int next_ = 0;
    int count_ = 0;
};

struct TrainStepResult {
    double loss = 0.0;
    double eta = 0.0;
};

struct EpisodeResult {
    int steps = 0;
    double ret = 0.0;
    bool win = false;
    double mean_loss = 0.0; // over this episode's training steps, 0 if none ran
    double eta_last = 0.0;
    int train_steps = 0;
};

struct EvalStats {
    int episodes = 0;
    int wins = 0;
    std::vector<int> steps;
    std::vector<double> returns;

    double win_rate() const;
    double avg_reward() const;
    std::optional<double> avg_winning_steps() const; // empty when nothing was won
};

// Lowest-index argmax over the state's action values.
Action greedy_action(const QNetwork& net, int state);

// Greedy rollouts of a fixed network on a copy of the environment.
EvalStats evaluate_policy(const QNetwork& net, const GridWorld& env, int n_episodes,
                          std::uint64_t eval_seed);

class Agent {
public:
    Agent(const AgentConfig& cfg, int n_states, int n_actions = kNumActions);

    Action select_action(int state, double epsilon, std::mt19937_64& rng) const;
    double td_target(double reward, int next_state, bool done) const;
    double td_error(const Transition& t) const;
    TrainStepResult train_step();
    EpisodeResult run_episode(GridWorld& env);
    std::vector<Action> greedy_policy() const;

    // Greedy rollouts on a copy of the environment; never touches the
    // network, optimizer state, buffer, or training RNG.
    EvalStats evaluate(const GridWorld& env, int n_episodes, std::uint64_t eval_seed) const;

    const AgentConfig& config() const { return cfg_; }
    const QNetwork& net() const { return net_; }
    QNetwork& net() { return net_; }
    const AdamState& adam() const { return adam_; }
    ReplayBuffer& buffer() { return buffer_; }
    const ReplayBuffer& buffer() const { return buffer_; }
    const TDWindow& window() const { return window_; }
    const std::vector<double>& loss_history() const { return losses_; }
    double last_eta() const { return last_eta_; }
    long train_steps() const { return static_cast<long>(losses_.size()); }
    std::mt19937_64& rng() { return rng_; }

private:
    const QNetwork& target_net() const;

    AgentConfig cfg_;
    QNetwork net_;
    QNetwork target_;     // snapshot used only when target_sync_every > 0
    AdamState adam_;
    ReplayBuffer buffer_;
    TDWindow window_;
    std::mt19937_64 rng_;
    std::vector<double> losses_;
    double last_eta_;
};

} // namespace idem
