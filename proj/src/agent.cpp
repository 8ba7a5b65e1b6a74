#include "idem/agent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "idem/util.hpp"

namespace idem {

const char* variant_name(Variant v) {
    return v == Variant::VanillaDqn ? "dqn" : "idem";
}

void AgentConfig::validate() const {
    if (gamma < 0.0 || gamma >= 1.0)
        throw std::invalid_argument("gamma must lie in [0, 1)");
    if (epsilon < 0.0 || epsilon > 1.0)
        throw std::invalid_argument("epsilon must lie in [0, 1]");
    if (eta0 <= 0.0)
        throw std::invalid_argument("eta0 must be positive");
    if (kappa < 0.0)
        throw std::invalid_argument("kappa must be >= 0");
    if (lambda <= 0.0)
        throw std::invalid_argument("lambda must be positive");
    if (window < 1)
        throw std::invalid_argument("window must be >= 1");
    if (batch_size < 1)
        throw std::invalid_argument("batch size must be >= 1");
    if (buffer_capacity < 1)
        throw std::invalid_argument("buffer capacity must be >= 1");
    if (warmup < 1 || warmup > buffer_capacity)
        throw std::invalid_argument("warmup must lie in [1, buffer capacity]");
    if (episodes < 0)
        throw std::invalid_argument("episodes must be >= 0");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
        throw std::invalid_argument("adam decay rates must lie in [0, 1)");
    if (eps_adam <= 0.0)
        throw std::invalid_argument("eps_adam must be positive");
    if (hidden < 1)
        throw std::invalid_argument("hidden units must be >= 1");
    if (target_sync_every < 0)
        throw std::invalid_argument("target_sync_every must be >= 0");
    if (exponent_cap <= 0.0)
        throw std::invalid_argument("exponent cap must be positive");
}

double adaptive_lr(double eta0, double kappa, double mean_abs_delta) {
    if (eta0 <= 0.0)
        throw std::invalid_argument("eta0 must be positive");
    if (kappa < 0.0)
        throw std::invalid_argument("kappa must be >= 0");
    if (mean_abs_delta < 0.0)
        throw std::invalid_argument("mean absolute TD error must be >= 0");
    // clamp away from exp() underflow so the result stays strictly positive
    return std::max(eta0 * std::exp(-kappa * mean_abs_delta),
                    std::numeric_limits<double>::min());
}

TDWindow::TDWindow(int capacity) {
    if (capacity < 1)
        throw std::invalid_argument("window capacity must be >= 1");
    ring_.assign(static_cast<std::size_t>(capacity), 0.0);
}

void TDWindow::push(double abs_delta) {
    if (!(abs_delta >= 0.0))
        throw std::invalid_argument("window entries must be >= 0");
    ring_[static_cast<std::size_t>(next_)] = abs_delta;
    next_ = (next_ + 1) % capacity();
    count_ = std::min(count_ + 1, capacity());
}

double TDWindow::mean() const {
    if (count_ == 0)
        return 0.0;
    double sum = 0.0;
    for (int i = 0; i < count_; ++i)
        sum += ring_[static_cast<std::size_t>(i)];
    return sum / static_cast<double>(count_);
}

double EvalStats::win_rate() const {
    return episodes > 0 ? static_cast<double>(wins) / episodes : 0.0;
}

double EvalStats::avg_reward() const {
    if (returns.empty())
        return 0.0;
    return std::accumulate(returns.begin(), returns.end(), 0.0) /
           static_cast<double>(returns.size());
}

std::optional<double> EvalStats::avg_winning_steps() const {
    long total = 0;
    int n = 0;
    for (std::size_t i = 0; i < steps.size(); ++i) {
        if (returns[i] >= 1.0) {
            total += steps[i];
            ++n;
        }
    }
    if (n == 0)
        return std::nullopt;
    return static_cast<double>(total) / n;
}

Agent::Agent(const AgentConfig& cfg, int n_states, int n_actions)
    : cfg_(cfg),
      net_((cfg.validate(), init_network(n_states, n_actions, cfg.hidden, mix_seed(cfg.seed, 0x11)))),
      target_(net_),
      adam_(AdamState::like(net_, cfg.beta1, cfg.beta2, cfg.eps_adam)),
      buffer_(cfg.buffer_capacity, cfg.replay_mode(), cfg.lambda, cfg.exponent_cap),
      window_(cfg.window),
      rng_(mix_seed(cfg.seed, 0x12)),
      last_eta_(cfg.eta0) {}

const QNetwork& Agent::target_net() const {
    return cfg_.target_sync_every > 0 ? target_ : net_;
}

Action greedy_action(const QNetwork& net, int state) {
    std::vector<double> q = net.q_values(state);
    int best = 0;
    for (int a = 1; a < static_cast<int>(q.size()); ++a)
        if (q[static_cast<std::size_t>(a)] > q[static_cast<std::size_t>(best)])
            best = a; // ties keep the lowest action index
    return static_cast<Action>(best);
}

EvalStats evaluate_policy(const QNetwork& net, const GridWorld& env, int n_episodes,
                          std::uint64_t eval_seed) {
    if (n_episodes < 1)
        throw std::invalid_argument("evaluation needs at least one episode");
    GridWorld rollout = env;
    rollout.seed(eval_seed);

    EvalStats stats;
    stats.episodes = n_episodes;
    for (int e = 0; e < n_episodes; ++e) {
        int state = rollout.reset();
        int steps = 0;
        double ret = 0.0;
        bool win = false;
        for (;;) {
            StepOutcome out = rollout.step(greedy_action(net, state));
            ++steps;
            ret += out.reward;
            state = out.next_state;
            if (out.done || out.truncated) {
                win = out.done && out.reward >= 1.0;
                break;
            }
        }
        stats.wins += win ? 1 : 0;
        stats.steps.push_back(steps);
        stats.returns.push_back(ret);
    }
    return stats;
}

Action Agent::select_action(int state, double epsilon, std::mt19937_64& rng) const {
    if (epsilon < 0.0 || epsilon > 1.0)
        throw std::invalid_argument("epsilon must lie in [0, 1]");
    if (epsilon > 0.0) {
        double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        if (u < epsilon) {
            int a = std::uniform_int_distribution<int>(0, net_.n_actions() - 1)(rng);
            return static_cast<Action>(a);
        }
    }
    return greedy_action(net_, state);
}

double Agent::td_target(double reward, int next_state, bool done) const {
    if (done)
        return reward;
    return reward + cfg_.gamma * target_net().max_q(next_state);
}

double Agent::td_error(const Transition& t) const {
    return td_target(t.reward, t.next_state, t.done) - net_.q_value(t.state, t.action);
}

TrainStepResult Agent::train_step() {
    if (buffer_.size() < cfg_.warmup)
        throw BufferBelowWarmup();

    SampleBatch batch = buffer_.sample(cfg_.batch_size, rng_);
    const std::size_t n = batch.transitions.size();

    std::vector<int> states(n), actions(n);
    std::vector<double> targets(n);
    double abs_delta_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Transition& t = batch.transitions[i];
        states[i] = t.state;
        actions[i] = t.action;
        targets[i] = td_target(t.reward, t.next_state, t.done);
        abs_delta_sum += std::abs(targets[i] - net_.q_value(t.state, t.action));
    }
    window_.push(abs_delta_sum / static_cast<double>(n));
    double eta = adaptive_lr(cfg_.eta0, cfg_.effective_kappa(), window_.mean());

    GradientSet grads = backward(net_, states, actions, targets);
    if (cfg_.optimizer == OptimizerKind::Adam)
        adam_step(net_, adam_, grads, eta);
    else
        sgd_step(net_, grads, eta);

    if (buffer_.mode() == ReplayMode::Weighted) {
        // re-score what was just trained on under the updated parameters
        std::vector<double> fresh(n);
        for (std::size_t i = 0; i < n; ++i)
            fresh[i] = td_error(batch.transitions[i]);
        buffer_.refresh_weights(batch.indices, fresh);
    }

    if (cfg_.target_sync_every > 0 &&
        (static_cast<long>(losses_.size()) + 1) % cfg_.target_sync_every == 0)
        target_ = net_;

    losses_.push_back(grads.loss);
    last_eta_ = eta;
    return {grads.loss, eta};
}

EpisodeResult Agent::run_episode(GridWorld& env) {
    EpisodeResult result;
    double loss_sum = 0.0;
    int state = env.reset();
    for (;;) {
        Action action = select_action(state, cfg_.epsilon, rng_);
        StepOutcome out = env.step(action);
        Transition t{state, static_cast<int>(action), out.reward, out.next_state, out.done};
        buffer_.push(t, td_error(t));
        if (cfg_.cadence == TrainCadence::PerStep && buffer_.size() >= cfg_.warmup) {
            TrainStepResult ts = train_step();
            loss_sum += ts.loss;
            ++result.train_steps;
        }
        ++result.steps;
        result.ret += out.reward;
        state = out.next_state;
        if (out.done || out.truncated) {
            result.win = out.done && out.reward >= 1.0;
            break;
        }
    }
    if (cfg_.cadence == TrainCadence::PerEpisode && buffer_.size() >= cfg_.warmup) {
        TrainStepResult ts = train_step();
        loss_sum += ts.loss;
        ++result.train_steps;
    }
    result.mean_loss = result.train_steps > 0 ? loss_sum / result.train_steps : 0.0;
    result.eta_last = last_eta_;
    return result;
}

std::vector<Action> Agent::greedy_policy() const {
    std::vector<Action> policy;
    policy.reserve(static_cast<std::size_t>(net_.n_states()));
    for (int s = 0; s < net_.n_states(); ++s)
        policy.push_back(greedy_action(net_, s));
    return policy;
}

EvalStats Agent::evaluate(const GridWorld& env, int n_episodes, std::uint64_t eval_seed) const {
    return evaluate_policy(net_, env, n_episodes, eval_seed);
}

} // namespace idem
