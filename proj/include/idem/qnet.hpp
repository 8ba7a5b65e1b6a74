#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace idem {

struct DimensionMismatch : std::invalid_argument {
    explicit DimensionMismatch(const std::string& what) : std::invalid_argument(what) {}
};

struct NonFiniteGradient : std::runtime_error {
    NonFiniteGradient() : std::runtime_error("gradient contains a non-finite value") {}
};

struct LayerParams {
    int out = 0;
    int in = 0;
    std::vector<double> weights; // row-major, out x in
    std::vector<double> biases;  // out

    double& w(int r, int c) { return weights[static_cast<std::size_t>(r * in + c)]; }
    double w(int r, int c) const { return weights[static_cast<std::size_t>(r * in + c)]; }
};

// Two fully connected layers with a rectifier in between:
//   q = W2 * relu(W1 * x + b1) + b2
// Inputs are one-hot state encodings; q_values() exploits that to skip the
// first matrix product.
struct QNetwork {
    LayerParams layer1; // hidden x n_states
    LayerParams layer2; // n_actions x hidden

    int n_states() const { return layer1.in; }
    int n_actions() const { return layer2.out; }
    int hidden() const { return layer1.out; }

    std::vector<double> forward(const std::vector<double>& state_vec) const;
    std::vector<double> q_values(int state_index) const;

    // allocation-free single lookups for the training hot path
    double q_value(int state_index, int action) const;
    double max_q(int state_index) const;
};

// Weights uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)], biases zero.
QNetwork init_network(int n_states, int n_actions, int hidden = 50, std::uint64_t seed = 0);

struct GradientSet {
    std::vector<double> w1, b1, w2, b2;
    double loss = 0.0;
};

// Mean squared TD loss over the batch,
//   L = (1/B) sum_i (y_i - Q(s_i, a_i))^2,
// with the targets y treated as constants. Only the chosen action's output
// receives gradient.
GradientSet backward(const QNetwork& net, std::span<const int> states,
                     std::span<const int> actions, std::span<const double> targets);

struct AdamState {
    std::vector<double> m_w1, m_b1, m_w2, m_b2;
    std::vector<double> v_w1, v_b1, v_w2, v_b2;
    long t = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    static AdamState like(const QNetwork& net, double beta1 = 0.9, double beta2 = 0.999,
                          double epsilon = 1e-8);
};

// One Adam update with externally supplied step size.
void adam_step(QNetwork& net, AdamState& adam, const GradientSet& grads, double step_size);

// Plain gradient descent, theta -= step_size * g.
void sgd_step(QNetwork& net, const GradientSet& grads, double step_size);

} // namespace idem
