#include "idem/replay.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace idem {

double weight_of(double delta, double lambda, double cap) {
    if (lambda <= 0.0)
        throw std::invalid_argument("lambda must be positive");
    if (cap <= 0.0)
        throw std::invalid_argument("exponent cap must be positive");
    if (!std::isfinite(delta))
        throw NonFiniteTDError();
    return std::exp(std::min(lambda * std::abs(delta), cap));
}

ReplayBuffer::ReplayBuffer(int capacity, ReplayMode mode, double lambda, double exponent_cap)
    : capacity_(capacity), mode_(mode), lambda_(lambda), cap_(exponent_cap) {
    if (capacity < 1)
        throw std::invalid_argument("capacity must be >= 1");
    if (lambda <= 0.0 || exponent_cap <= 0.0)
        throw std::invalid_argument("lambda and exponent cap must be positive");
    slots_.reserve(static_cast<std::size_t>(capacity));
}

int ReplayBuffer::push(Transition t, double delta_init) {
    if (!std::isfinite(delta_init))
        throw NonFiniteTDError();
    t.td_error = delta_init;
    t.weight = weight_of(delta_init, lambda_, cap_);
    int slot;
    if (size() < capacity_) {
        slot = size();
        slots_.push_back(t);
    } else {
        slot = cursor_; // overwrite the oldest entry
        slots_[static_cast<std::size_t>(slot)] = t;
    }
    cursor_ = (slot + 1) % capacity_;
    return slot;
}

const Transition& ReplayBuffer::at(int slot) const {
    if (slot < 0 || slot >= size())
        throw UnoccupiedSlot();
    return slots_[static_cast<std::size_t>(slot)];
}

std::vector<double> ReplayBuffer::probabilities() const {
    if (slots_.empty())
        throw EmptyBuffer();
    std::vector<double> p(slots_.size());
    if (mode_ == ReplayMode::Uniform) {
        std::fill(p.begin(), p.end(), 1.0 / static_cast<double>(slots_.size()));
        return p;
    }
    double total = 0.0;
    for (const Transition& t : slots_)
        total += t.weight;
    for (std::size_t i = 0; i < slots_.size(); ++i)
        p[i] = slots_[i].weight / total;
    return p;
}

SampleBatch ReplayBuffer::sample(int batch_size, std::mt19937_64& rng) const {
    if (slots_.empty())
        throw EmptyBuffer();
    if (batch_size < 1)
        throw std::invalid_argument("batch size must be >= 1");

    SampleBatch batch;
    batch.indices.reserve(static_cast<std::size_t>(batch_size));
    batch.transitions.reserve(static_cast<std::size_t>(batch_size));

    if (mode_ == ReplayMode::Uniform) {
        std::uniform_int_distribution<int> pick(0, size() - 1);
        for (int i = 0; i < batch_size; ++i)
            batch.indices.push_back(pick(rng));
    } else {
        std::vector<double> cumulative(slots_.size());
        double total = 0.0;
        for (std::size_t i = 0; i < slots_.size(); ++i) {
            total += slots_[i].weight;
            cumulative[i] = total;
        }
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        for (int i = 0; i < batch_size; ++i) {
            double u = unit(rng) * total;
            auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
            int slot = static_cast<int>(std::min<std::ptrdiff_t>(
                it - cumulative.begin(), static_cast<std::ptrdiff_t>(slots_.size()) - 1));
            batch.indices.push_back(slot);
        }
    }
    for (int slot : batch.indices)
        batch.transitions.push_back(slots_[static_cast<std::size_t>(slot)]);
    return batch;
}

void ReplayBuffer::refresh_weights(std::span<const int> slots, std::span<const double> deltas) {
    if (slots.size() != deltas.size())
        throw std::invalid_argument("slot and delta arrays differ in length");
    for (double d : deltas)
        if (!std::isfinite(d))
            throw NonFiniteTDError();
    for (int slot : slots)
        if (slot < 0 || slot >= size())
            throw UnoccupiedSlot();
    // duplicates resolve to the last delta given
    for (std::size_t i = 0; i < slots.size(); ++i) {
        Transition& t = slots_[static_cast<std::size_t>(slots[i])];
        t.td_error = deltas[i];
        t.weight = weight_of(deltas[i], lambda_, cap_);
    }
}

void ReplayBuffer::dump_csv(std::ostream& os) const {
    os << "slot,state,action,reward,next_state,done,td_error,weight\n";
    char buf[64];
    for (int i = 0; i < size(); ++i) {
        const Transition& t = slots_[static_cast<std::size_t>(i)];
        os << i << ',' << t.state << ',' << t.action << ',';
        std::snprintf(buf, sizeof buf, "%.9g", t.reward);
        os << buf << ',' << t.next_state << ',' << (t.done ? 1 : 0) << ',';
        std::snprintf(buf, sizeof buf, "%.9g", t.td_error);
        os << buf << ',';
        std::snprintf(buf, sizeof buf, "%.9g", t.weight);
        os << buf << '\n';
    }
}

} // namespace idem
