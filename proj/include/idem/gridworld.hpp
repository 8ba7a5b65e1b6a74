#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace idem {

enum class Cell : char { Start = 'S', Frozen = 'F', Hole = 'H', Goal = 'G' };

enum class Action : int { Left = 0, Down = 1, Right = 2, Up = 3 };

inline constexpr int kNumActions = 4;

const char* action_name(Action a);

struct MapError : std::runtime_error {
    enum class Kind {
        NonRectangular,
        InvalidCharacter,
        MissingStartOrGoal,
        DuplicateStartOrGoal,
        Unsolvable,
    };
    MapError(Kind k, const std::string& what) : std::runtime_error(what), kind(k) {}
    Kind kind;
};

// Rectangular lake layout, row-major. Valid maps have exactly one Start,
// exactly one Goal, and a traversable (non-Hole) path between them.
struct GridMap {
    int rows = 0;
    int cols = 0;
    std::vector<Cell> cells;

    int size() const { return rows * cols; }
    Cell at(int index) const { return cells[static_cast<std::size_t>(index)]; }
    int start_index() const;
    int goal_index() const;
    bool solvable() const;
    void validate() const; // throws MapError

    static GridMap parse(const std::string& text);
    static GridMap builtin(const std::string& name); // "4x4" or "8x8"
};

// Movement noise for one tile: the realized direction is the intended one or
// one of its two perpendicular neighbours.
struct SlipProbs {
    double intended = 1.0;
    double side1 = 0.0; // intended rotated one step counter-clockwise
    double side2 = 0.0; // intended rotated one step clockwise

    bool valid(double tol = 1e-12) const;
    static SlipProbs deterministic() { return {1.0, 0.0, 0.0}; }
    // p(side) = s for each perpendicular, p(intended) = 1 - 2s
    static SlipProbs lateral(double s) { return {1.0 - 2.0 * s, s, s}; }
    static SlipProbs uniform_third() { return {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}; }
};

struct StepOutcome {
    int next_state = 0;
    double reward = 0.0;
    bool done = false;
    bool truncated = false;
};

// One entry of the exact transition distribution for a (state, action) pair.
struct Outcome {
    int next_state;
    double probability;
    double reward;
    bool done;
};

struct ChangeEvent {
    enum class Kind { GoalRelocation, TileStabilityChange };
    Kind kind;
    int episode_index = 0;
    // GoalRelocation payload
    int old_goal = -1;
    int new_goal = -1;
    // TileStabilityChange payload (parallel arrays)
    std::vector<int> tiles;
    std::vector<SlipProbs> slips;
};

struct SteppedAfterTermination : std::logic_error {
    SteppedAfterTermination() : std::logic_error("step() called on a terminated episode") {}
};

struct NoValidRelocation : std::runtime_error {
    NoValidRelocation() : std::runtime_error("no goal relocation target keeps the map solvable") {}
};

// Step-limit convention of the reference layouts: 100 on 4x4, 200 on 8x8.
int default_max_steps(const GridMap& map);

// One-hot encoding over flat cell indices.
std::vector<double> encode_state(int index, int n_states);

class GridWorld {
public:
    explicit GridWorld(GridMap map, bool slippery = true, int max_steps = 0,
                       std::uint64_t seed = 0);

    int reset();
    void seed(std::uint64_t value);
    StepOutcome step(Action action);

    std::vector<Outcome> transition_model(int state, Action action) const;

    int state() const { return position_; }
    int steps_taken() const { return steps_; }
    bool terminated() const { return terminated_; }
    int max_steps() const { return max_steps_; }
    bool slippery() const { return slippery_; }
    int n_states() const { return map_.size(); }
    const GridMap& map() const { return map_; }
    const SlipProbs& tile_slip(int index) const;
    void set_tile_slip(int index, SlipProbs probs);

    // Diagnostic hook: teleports the agent without touching the step counter.
    void set_state(int index);

    // Dynamic mutations. make_* proposes an event against the current map,
    // apply() commits one; inject_* does both in one call.
    ChangeEvent make_goal_relocation(std::mt19937_64& rng, int episode_index = 0) const;
    ChangeEvent make_tile_stability_change(std::mt19937_64& rng, double fraction,
                                           double slip_lo, double slip_hi,
                                           int episode_index = 0) const;
    void apply(const ChangeEvent& event);
    ChangeEvent inject_goal_relocation(std::mt19937_64& rng, int episode_index = 0);
    ChangeEvent inject_tile_stability_change(std::mt19937_64& rng, double fraction = 0.25,
                                             double slip_lo = 0.0, double slip_hi = 0.5,
                                             int episode_index = 0);

private:
    int clamped_move(int state, Action direction) const;
    bool is_terminal_cell(int index) const;

    GridMap map_;
    std::vector<SlipProbs> slip_;
    bool slippery_;
    int max_steps_;
    int position_ = 0;
    int steps_ = 0;
    bool terminated_ = false;
    std::mt19937_64 rng_;
};

} // namespace idem
