#include "idem/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <boost/math/distributions/chi_squared.hpp>

#include "idem/agent.hpp"
#include "idem/gridworld.hpp"
#include "idem/qnet.hpp"
#include "idem/replay.hpp"
#include "idem/util.hpp"

namespace idem {

bool all_passed(const std::vector<SelftestResult>& results) {
    return std::all_of(results.begin(), results.end(),
                       [](const SelftestResult& r) { return r.passed; });
}

namespace {

double batch_loss(const QNetwork& net, const std::vector<int>& states,
                  const std::vector<int>& actions, const std::vector<double>& targets) {
    double loss = 0.0;
    for (std::size_t i = 0; i < states.size(); ++i) {
        double q = net.q_values(states[i])[static_cast<std::size_t>(actions[i])];
        double err = targets[i] - q;
        loss += err * err;
    }
    return loss / static_cast<double>(states.size());
}

// Central finite differences over every parameter of every tensor.
double max_gradient_error(QNetwork net, const std::vector<int>& states,
                          const std::vector<int>& actions, const std::vector<double>& targets) {
    const double h = 1e-5;
    GradientSet g = backward(net, states, actions, targets);
    std::vector<std::pair<std::vector<double>*, const std::vector<double>*>> tensors = {
        {&net.layer1.weights, &g.w1},
        {&net.layer1.biases, &g.b1},
        {&net.layer2.weights, &g.w2},
        {&net.layer2.biases, &g.b2},
    };
    double worst = 0.0;
    for (auto& [theta, grad] : tensors) {
        for (std::size_t i = 0; i < theta->size(); ++i) {
            double saved = (*theta)[i];
            (*theta)[i] = saved + h;
            double up = batch_loss(net, states, actions, targets);
            (*theta)[i] = saved - h;
            double down = batch_loss(net, states, actions, targets);
            (*theta)[i] = saved;
            double fd = (up - down) / (2.0 * h);
            double analytic = (*grad)[i];
            double denom = std::max({std::abs(fd), std::abs(analytic), 1e-6});
            worst = std::max(worst, std::abs(fd - analytic) / denom);
        }
    }
    return worst;
}

SelftestResult gradient_check(std::uint64_t seed) {
    std::mt19937_64 rng(mix_seed(seed, 1));
    double worst = 0.0;
    int trials = 0;
    while (trials < 100) {
        int n_states = std::uniform_int_distribution<int>(4, 32)(rng);
        int hidden = std::uniform_int_distribution<int>(3, 16)(rng);
        QNetwork net = init_network(n_states, kNumActions, hidden, rng());
        int batch = std::uniform_int_distribution<int>(1, 8)(rng);
        std::vector<int> states, actions;
        std::vector<double> targets;
        std::uniform_real_distribution<double> target_dist(-2.0, 2.0);
        for (int i = 0; i < batch; ++i) {
            states.push_back(std::uniform_int_distribution<int>(0, n_states - 1)(rng));
            actions.push_back(std::uniform_int_distribution<int>(0, kNumActions - 1)(rng));
            targets.push_back(target_dist(rng));
        }
        // keep pre-activations away from the rectifier kink, where central
        // differences are not meaningful
        bool near_kink = false;
        for (int s : states)
            for (int j = 0; j < net.hidden() && !near_kink; ++j)
                near_kink = std::abs(net.layer1.w(j, s) +
                                     net.layer1.biases[static_cast<std::size_t>(j)]) < 1e-3;
        if (near_kink)
            continue;
        worst = std::max(worst, max_gradient_error(net, states, actions, targets));
        ++trials;
    }
    std::ostringstream detail;
    detail << "max relative error " << worst << " over 100 pairs (tolerance 1e-4)";
    return {"gradient_check", worst <= 1e-4, detail.str()};
}

SelftestResult sampling_chisquare(std::uint64_t seed) {
    std::mt19937_64 rng(mix_seed(seed, 2));
    const int draws = 100000;
    double worst_p_margin = 1.0; // min of (threshold - stat)/threshold across vectors
    bool ok = true;
    std::ostringstream detail;

    std::vector<int> sizes = {2, 3, 5, 10, 30, 100, 300, 1000, 2000, 3000};
    while (sizes.size() < 20)
        sizes.push_back(std::uniform_int_distribution<int>(2, 3000)(rng));

    for (int size : sizes) {
        ReplayBuffer buffer(size, ReplayMode::Weighted, 1.0);
        std::uniform_real_distribution<double> delta(0.0, 1.5);
        for (int i = 0; i < size; ++i)
            buffer.push(Transition{i % 4, i % 4, 0.0, 0, false}, delta(rng));

        SampleBatch batch = buffer.sample(draws, rng);
        std::vector<int> counts(static_cast<std::size_t>(size), 0);
        for (int slot : batch.indices)
            ++counts[static_cast<std::size_t>(slot)];

        std::vector<double> p = buffer.probabilities();
        double stat = 0.0;
        for (int i = 0; i < size; ++i) {
            double expected = p[static_cast<std::size_t>(i)] * draws;
            double diff = counts[static_cast<std::size_t>(i)] - expected;
            stat += diff * diff / expected;
        }
        boost::math::chi_squared dist(size - 1);
        double threshold = boost::math::quantile(dist, 1.0 - 0.001);
        if (stat > threshold) {
            ok = false;
            detail << "size " << size << ": stat " << stat << " > " << threshold << "; ";
        }
        worst_p_margin = std::min(worst_p_margin, (threshold - stat) / threshold);
    }
    if (ok)
        detail << "20 weight vectors pass at significance 0.001 (min margin "
               << worst_p_margin << ")";
    return {"sampling_chisquare", ok, detail.str()};
}

SelftestResult env_slip_frequencies(std::uint64_t seed) {
    // interior tile of the 4x4 layout; action left realizes up/left/down
    GridWorld env(GridMap::builtin("4x4"), true, 1 << 30, mix_seed(seed, 3));
    const int n = 1000000;
    const int from = 9;
    int counts[3] = {0, 0, 0}; // up -> 5, left -> 8, down -> 13
    for (int i = 0; i < n; ++i) {
        env.set_state(from);
        StepOutcome out = env.step(Action::Left);
        if (out.next_state == 5)
            ++counts[0];
        else if (out.next_state == 8)
            ++counts[1];
        else if (out.next_state == 13)
            ++counts[2];
        else
            return {"env_slip_frequencies", false,
                    "unexpected next state " + std::to_string(out.next_state)};
    }
    double sigma3 = 3.0 * std::sqrt((1.0 / 3.0) * (2.0 / 3.0) / n);
    bool ok = true;
    std::ostringstream detail;
    detail << "frequencies";
    for (int c : counts) {
        double f = static_cast<double>(c) / n;
        detail << ' ' << f;
        ok = ok && std::abs(f - 1.0 / 3.0) <= sigma3;
    }
    detail << " vs 1/3 within 3 sigma = " << sigma3;
    return {"env_slip_frequencies", ok, detail.str()};
}

SelftestResult transition_sums(std::uint64_t) {
    bool ok = true;
    std::ostringstream detail;
    double worst = 0.0;
    for (const char* name : {"4x4", "8x8"}) {
        GridWorld env(GridMap::builtin(name), true);
        for (int s = 0; s < env.n_states(); ++s)
            for (int a = 0; a < kNumActions; ++a) {
                double total = 0.0;
                for (const Outcome& o : env.transition_model(s, static_cast<Action>(a)))
                    total += o.probability;
                worst = std::max(worst, std::abs(total - 1.0));
            }
    }
    ok = worst <= 1e-12;
    detail << "max |sum - 1| = " << worst << " over both standard maps";
    return {"transition_sums", ok, detail.str()};
}

SelftestResult closed_form_identities(std::uint64_t seed) {
    bool ok = true;
    std::ostringstream detail;
    auto expect = [&](const char* what, double got, double want) {
        double denom = std::max(std::abs(want), 1e-300);
        if (std::abs(got - want) / denom > 1e-12) {
            ok = false;
            detail << what << ": got " << got << ", want " << want << "; ";
        }
    };
    expect("weight_of(0, 0.7)", weight_of(0.0, 0.7), 1.0);
    expect("weight_of(ln 2, 1)", weight_of(std::log(2.0), 1.0), 2.0);
    expect("weight_of(-2, 0.5)", weight_of(-2.0, 0.5), std::exp(1.0));
    expect("adaptive_lr(3e-3, 2, 0)", adaptive_lr(3e-3, 2.0, 0.0), 3e-3);
    expect("adaptive_lr(1e-4, 1, ln 10)", adaptive_lr(1e-4, 1.0, std::log(10.0)), 1e-5);

    std::mt19937_64 rng(mix_seed(seed, 4));
    std::uniform_real_distribution<double> d(0.0, 5.0);
    for (int i = 0; i < 10 && ok; ++i) {
        double x = d(rng);
        double h = 1e-6;
        double slope = (adaptive_lr(1e-4, 1.0, x + h) - adaptive_lr(1e-4, 1.0, x)) / h;
        if (!(slope < 0.0)) {
            ok = false;
            detail << "adaptive_lr slope " << slope << " at " << x << " not negative; ";
        }
        if (adaptive_lr(1e-4, 1.0, x) > 1e-4 || adaptive_lr(1e-4, 1.0, x) <= 0.0) {
            ok = false;
            detail << "adaptive_lr left (0, eta0] at " << x << "; ";
        }
    }
    if (ok)
        detail << "all identities exact to 1e-12 relative; lr strictly decreasing";
    return {"closed_form_identities", ok, detail.str()};
}

} // namespace

std::vector<SelftestResult> run_selftests(std::uint64_t seed) {
    return {
        gradient_check(seed),
        sampling_chisquare(seed),
        env_slip_frequencies(seed),
        transition_sums(seed),
        closed_form_identities(seed),
    };
}

} // namespace idem
