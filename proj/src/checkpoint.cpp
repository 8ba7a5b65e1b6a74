#include "idem/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace idem {

namespace {

constexpr const char* kTag = "idemq-checkpoint-v1";

void write_values(std::ostream& os, const std::vector<double>& values) {
    char buf[64];
    for (double v : values) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        os << buf << '\n';
    }
}

void read_values(std::istream& is, std::vector<double>& values, std::size_t n) {
    values.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        if (!(is >> values[i]))
            throw std::runtime_error("checkpoint truncated");
}

} // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw std::runtime_error("cannot write " + path);
    const QNetwork& net = ckpt.net;
    os << kTag << '\n';
    os << net.hidden() << ' ' << net.n_states() << ' ' << net.n_actions() << '\n';
    write_values(os, net.layer1.weights);
    write_values(os, net.layer1.biases);
    write_values(os, net.layer2.weights);
    write_values(os, net.layer2.biases);
    const AdamState& a = ckpt.adam;
    char buf[128];
    std::snprintf(buf, sizeof buf, "%ld %.17g %.17g %.17g", a.t, a.beta1, a.beta2, a.epsilon);
    os << buf << '\n';
    write_values(os, a.m_w1);
    write_values(os, a.v_w1);
    write_values(os, a.m_b1);
    write_values(os, a.v_b1);
    write_values(os, a.m_w2);
    write_values(os, a.v_w2);
    write_values(os, a.m_b2);
    write_values(os, a.v_b2);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw std::runtime_error("cannot read " + path);
    std::string tag;
    if (!(is >> tag) || tag != kTag)
        throw std::runtime_error(path + " is not a " + kTag + " file");
    int hidden = 0, n_states = 0, n_actions = 0;
    if (!(is >> hidden >> n_states >> n_actions) || hidden < 1 || n_states < 1 || n_actions < 1)
        throw std::runtime_error("checkpoint has invalid dimensions");

    Checkpoint ckpt;
    QNetwork& net = ckpt.net;
    net.layer1.out = hidden;
    net.layer1.in = n_states;
    net.layer2.out = n_actions;
    net.layer2.in = hidden;
    auto count_w1 = static_cast<std::size_t>(hidden) * static_cast<std::size_t>(n_states);
    auto count_w2 = static_cast<std::size_t>(n_actions) * static_cast<std::size_t>(hidden);
    read_values(is, net.layer1.weights, count_w1);
    read_values(is, net.layer1.biases, static_cast<std::size_t>(hidden));
    read_values(is, net.layer2.weights, count_w2);
    read_values(is, net.layer2.biases, static_cast<std::size_t>(n_actions));

    AdamState& a = ckpt.adam;
    if (!(is >> a.t >> a.beta1 >> a.beta2 >> a.epsilon))
        throw std::runtime_error("checkpoint truncated");
    read_values(is, a.m_w1, count_w1);
    read_values(is, a.v_w1, count_w1);
    read_values(is, a.m_b1, static_cast<std::size_t>(hidden));
    read_values(is, a.v_b1, static_cast<std::size_t>(hidden));
    read_values(is, a.m_w2, count_w2);
    read_values(is, a.v_w2, count_w2);
    read_values(is, a.m_b2, static_cast<std::size_t>(n_actions));
    read_values(is, a.v_b2, static_cast<std::size_t>(n_actions));
    return ckpt;
}

} // namespace idem
