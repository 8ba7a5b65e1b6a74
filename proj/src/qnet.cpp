#include "idem/qnet.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace idem {

std::vector<double> QNetwork::forward(const std::vector<double>& state_vec) const {
    if (static_cast<int>(state_vec.size()) != n_states())
        throw DimensionMismatch("input length " + std::to_string(state_vec.size()) +
                                ", network expects " + std::to_string(n_states()));
    std::vector<double> h(static_cast<std::size_t>(hidden()));
    for (int j = 0; j < hidden(); ++j) {
        double z = layer1.biases[static_cast<std::size_t>(j)];
        for (int k = 0; k < n_states(); ++k)
            z += layer1.w(j, k) * state_vec[static_cast<std::size_t>(k)];
        h[static_cast<std::size_t>(j)] = z > 0.0 ? z : 0.0;
    }
    std::vector<double> q(static_cast<std::size_t>(n_actions()));
    for (int a = 0; a < n_actions(); ++a) {
        double z = layer2.biases[static_cast<std::size_t>(a)];
        for (int j = 0; j < hidden(); ++j)
            z += layer2.w(a, j) * h[static_cast<std::size_t>(j)];
        q[static_cast<std::size_t>(a)] = z;
    }
    return q;
}

std::vector<double> QNetwork::q_values(int state_index) const {
    if (state_index < 0 || state_index >= n_states())
        throw DimensionMismatch("state index " + std::to_string(state_index) +
                                " outside [0, " + std::to_string(n_states()) + ")");
    // one-hot input: the first layer reduces to one weight column
    std::vector<double> q(layer2.biases.begin(), layer2.biases.end());
    for (int j = 0; j < hidden(); ++j) {
        double z = layer1.w(j, state_index) + layer1.biases[static_cast<std::size_t>(j)];
        if (z > 0.0)
            for (int a = 0; a < n_actions(); ++a)
                q[static_cast<std::size_t>(a)] += layer2.w(a, j) * z;
    }
    return q;
}

double QNetwork::q_value(int state_index, int action) const {
    if (state_index < 0 || state_index >= n_states())
        throw DimensionMismatch("state index out of range");
    if (action < 0 || action >= n_actions())
        throw DimensionMismatch("action index out of range");
    double q = layer2.biases[static_cast<std::size_t>(action)];
    for (int j = 0; j < hidden(); ++j) {
        double z = layer1.w(j, state_index) + layer1.biases[static_cast<std::size_t>(j)];
        if (z > 0.0)
            q += layer2.w(action, j) * z;
    }
    return q;
}

double QNetwork::max_q(int state_index) const {
    if (state_index < 0 || state_index >= n_states())
        throw DimensionMismatch("state index out of range");
    constexpr int kStackActions = 16;
    if (n_actions() > kStackActions) {
        std::vector<double> q = q_values(state_index);
        return *std::max_element(q.begin(), q.end());
    }
    double acc[kStackActions];
    for (int a = 0; a < n_actions(); ++a)
        acc[a] = layer2.biases[static_cast<std::size_t>(a)];
    for (int j = 0; j < hidden(); ++j) {
        double z = layer1.w(j, state_index) + layer1.biases[static_cast<std::size_t>(j)];
        if (z > 0.0)
            for (int a = 0; a < n_actions(); ++a)
                acc[a] += layer2.w(a, j) * z;
    }
    double best = acc[0];
    for (int a = 1; a < n_actions(); ++a)
        best = std::max(best, acc[a]);
    return best;
}

QNetwork init_network(int n_states, int n_actions, int hidden, std::uint64_t seed) {
    if (n_states < 1 || n_actions < 1 || hidden < 1)
        throw std::invalid_argument("network dimensions must be >= 1");
    QNetwork net;
    net.layer1 = LayerParams{hidden, n_states,
                             std::vector<double>(static_cast<std::size_t>(hidden * n_states)),
                             std::vector<double>(static_cast<std::size_t>(hidden), 0.0)};
    net.layer2 = LayerParams{n_actions, hidden,
                             std::vector<double>(static_cast<std::size_t>(n_actions * hidden)),
                             std::vector<double>(static_cast<std::size_t>(n_actions), 0.0)};
    std::mt19937_64 rng(seed);
    auto fill = [&rng](LayerParams& layer) {
        double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (double& w : layer.weights)
            w = dist(rng);
    };
    fill(net.layer1);
    fill(net.layer2);
    return net;
}

GradientSet backward(const QNetwork& net, std::span<const int> states,
                     std::span<const int> actions, std::span<const double> targets) {
    const std::size_t batch = states.size();
    if (batch == 0)
        throw DimensionMismatch("empty batch");
    if (actions.size() != batch || targets.size() != batch)
        throw DimensionMismatch("batch arrays differ in length");

    const int n_states = net.n_states();
    const int n_actions = net.n_actions();
    const int hidden = net.hidden();

    GradientSet g;
    g.w1.assign(net.layer1.weights.size(), 0.0);
    g.b1.assign(net.layer1.biases.size(), 0.0);
    g.w2.assign(net.layer2.weights.size(), 0.0);
    g.b2.assign(net.layer2.biases.size(), 0.0);

    const double inv_batch = 1.0 / static_cast<double>(batch);
    std::vector<double> h(static_cast<std::size_t>(hidden));

    for (std::size_t i = 0; i < batch; ++i) {
        int s = states[i];
        int a = actions[i];
        double y = targets[i];
        if (s < 0 || s >= n_states)
            throw DimensionMismatch("state index out of range in batch");
        if (a < 0 || a >= n_actions)
            throw DimensionMismatch("action index out of range in batch");
        if (!std::isfinite(y))
            throw DimensionMismatch("non-finite target in batch");

        for (int j = 0; j < hidden; ++j) {
            double z = net.layer1.w(j, s) + net.layer1.biases[static_cast<std::size_t>(j)];
            h[static_cast<std::size_t>(j)] = z > 0.0 ? z : 0.0;
        }
        double q_sa = net.layer2.biases[static_cast<std::size_t>(a)];
        for (int j = 0; j < hidden; ++j)
            q_sa += net.layer2.w(a, j) * h[static_cast<std::size_t>(j)];

        double err = y - q_sa;
        g.loss += err * err * inv_batch;
        double dq = -2.0 * err * inv_batch; // dL/dQ(s,a)

        g.b2[static_cast<std::size_t>(a)] += dq;
        for (int j = 0; j < hidden; ++j) {
            double hj = h[static_cast<std::size_t>(j)];
            if (hj > 0.0) {
                g.w2[static_cast<std::size_t>(a * hidden + j)] += dq * hj;
                double dz = dq * net.layer2.w(a, j); // relu active, dh/dz = 1
                g.b1[static_cast<std::size_t>(j)] += dz;
                g.w1[static_cast<std::size_t>(j * n_states + s)] += dz;
            }
        }
    }
    return g;
}

AdamState AdamState::like(const QNetwork& net, double beta1, double beta2, double epsilon) {
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0 || epsilon <= 0.0)
        throw std::invalid_argument("adam constants outside their valid ranges");
    AdamState s;
    s.m_w1.assign(net.layer1.weights.size(), 0.0);
    s.m_b1.assign(net.layer1.biases.size(), 0.0);
    s.m_w2.assign(net.layer2.weights.size(), 0.0);
    s.m_b2.assign(net.layer2.biases.size(), 0.0);
    s.v_w1 = s.m_w1;
    s.v_b1 = s.m_b1;
    s.v_w2 = s.m_w2;
    s.v_b2 = s.m_b2;
    s.beta1 = beta1;
    s.beta2 = beta2;
    s.epsilon = epsilon;
    return s;
}

namespace {

void check_finite(const std::vector<double>& g) {
    for (double v : g)
        if (!std::isfinite(v))
            throw NonFiniteGradient();
}

void adam_update(std::vector<double>& theta, std::vector<double>& m, std::vector<double>& v,
                 const std::vector<double>& g, const AdamState& s, double step_size,
                 double bc1, double bc2) {
    for (std::size_t i = 0; i < theta.size(); ++i) {
        m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g[i];
        v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g[i] * g[i];
        double m_hat = m[i] / bc1;
        double v_hat = v[i] / bc2;
        theta[i] -= step_size * m_hat / (std::sqrt(v_hat) + s.epsilon);
    }
}

} // namespace

void adam_step(QNetwork& net, AdamState& adam, const GradientSet& grads, double step_size) {
    if (step_size <= 0.0)
        throw std::invalid_argument("step size must be positive");
    if (grads.w1.size() != net.layer1.weights.size() ||
        grads.b1.size() != net.layer1.biases.size() ||
        grads.w2.size() != net.layer2.weights.size() ||
        grads.b2.size() != net.layer2.biases.size())
        throw DimensionMismatch("gradient shapes do not match network");
    check_finite(grads.w1);
    check_finite(grads.b1);
    check_finite(grads.w2);
    check_finite(grads.b2);

    adam.t += 1;
    double bc1 = 1.0 - std::pow(adam.beta1, static_cast<double>(adam.t));
    double bc2 = 1.0 - std::pow(adam.beta2, static_cast<double>(adam.t));
    if (bc1 <= 0.0 || bc2 <= 0.0)
        throw std::invalid_argument("adam decay rates must lie in [0, 1)");
    adam_update(net.layer1.weights, adam.m_w1, adam.v_w1, grads.w1, adam, step_size, bc1, bc2);
    adam_update(net.layer1.biases, adam.m_b1, adam.v_b1, grads.b1, adam, step_size, bc1, bc2);
    adam_update(net.layer2.weights, adam.m_w2, adam.v_w2, grads.w2, adam, step_size, bc1, bc2);
    adam_update(net.layer2.biases, adam.m_b2, adam.v_b2, grads.b2, adam, step_size, bc1, bc2);
}

void sgd_step(QNetwork& net, const GradientSet& grads, double step_size) {
    if (step_size <= 0.0)
        throw std::invalid_argument("step size must be positive");
    check_finite(grads.w1);
    check_finite(grads.b1);
    check_finite(grads.w2);
    check_finite(grads.b2);
    auto apply = [step_size](std::vector<double>& theta, const std::vector<double>& g) {
        if (theta.size() != g.size())
            throw DimensionMismatch("gradient shapes do not match network");
        for (std::size_t i = 0; i < theta.size(); ++i)
            theta[i] -= step_size * g[i];
    };
    apply(net.layer1.weights, grads.w1);
    apply(net.layer1.biases, grads.b1);
    apply(net.layer2.weights, grads.w2);
    apply(net.layer2.biases, grads.b2);
}

} // namespace idem
