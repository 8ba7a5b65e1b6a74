#pragma once

#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace idem {

struct NonFiniteTDError : std::invalid_argument {
    NonFiniteTDError() : std::invalid_argument("TD error must be finite") {}
};

struct EmptyBuffer : std::logic_error {
    EmptyBuffer() : std::logic_error("replay buffer is empty") {}
};

struct UnoccupiedSlot : std::out_of_range {
    UnoccupiedSlot() : std::out_of_range("slot index refers to no stored transition") {}
};

struct Transition {
    int state = 0;
    int action = 0;
    double reward = 0.0;
    int next_state = 0;
    bool done = false;
    double td_error = 0.0;
    double weight = 1.0;
};

enum class ReplayMode { Weighted, Uniform };

// w = exp(min(lambda * |delta|, cap)); always >= 1, increasing in |delta|
// below the cap. The cap keeps early-training TD spikes from overflowing.
double weight_of(double delta, double lambda, double cap = 50.0);

struct SampleBatch {
    std::vector<int> indices;            // buffer slots, drawn with replacement
    std::vector<Transition> transitions; // copies taken at sampling time
};

// Capacity-bounded FIFO ring. Weighted mode samples transitions in
// proportion to their weights; Uniform mode ignores the weights.
class ReplayBuffer {
public:
    explicit ReplayBuffer(int capacity = 3000, ReplayMode mode = ReplayMode::Weighted,
                          double lambda = 0.5, double exponent_cap = 50.0);

    int push(Transition t, double delta_init);

    int size() const { return static_cast<int>(slots_.size()); }
    int capacity() const { return capacity_; }
    ReplayMode mode() const { return mode_; }
    double lambda() const { return lambda_; }
    double exponent_cap() const { return cap_; }
    const Transition& at(int slot) const;

    std::vector<double> probabilities() const;
    SampleBatch sample(int batch_size, std::mt19937_64& rng) const;
    void refresh_weights(std::span<const int> slots, std::span<const double> deltas);

    // Debug dump, one CSV row per occupied slot.
    void dump_csv(std::ostream& os) const;

private:
    std::vector<Transition> slots_;
    int capacity_;
    int cursor_ = 0; // next insert position once full
    ReplayMode mode_;
    double lambda_;
    double cap_;
};

} // namespace idem
