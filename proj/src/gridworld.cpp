#include "idem/gridworld.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <sstream>

namespace idem {

const char* action_name(Action a) {
    switch (a) {
    case Action::Left: return "left";
    case Action::Down: return "down";
    case Action::Right: return "right";
    case Action::Up: return "up";
    }
    return "?";
}

namespace {

int find_unique(const GridMap& map, Cell kind) {
    int found = -1;
    for (int i = 0; i < map.size(); ++i) {
        if (map.at(i) != kind)
            continue;
        if (found >= 0)
            throw MapError(MapError::Kind::DuplicateStartOrGoal,
                           std::string("duplicate '") + static_cast<char>(kind) + "' cell");
        found = i;
    }
    if (found < 0)
        throw MapError(MapError::Kind::MissingStartOrGoal,
                       std::string("missing '") + static_cast<char>(kind) + "' cell");
    return found;
}

constexpr const char* k4x4 =
    "SFFF\n"
    "FHFH\n"
    "FFFH\n"
    "HFFG";

constexpr const char* k8x8 =
    "SFFFFFFF\n"
    "FFFFFFFF\n"
    "FFFHFFFF\n"
    "FFFFFHFF\n"
    "FFFHFFFF\n"
    "FHHFFFHF\n"
    "FHFFHFHF\n"
    "FFFHFFFG";

} // namespace

int GridMap::start_index() const { return find_unique(*this, Cell::Start); }

int GridMap::goal_index() const { return find_unique(*this, Cell::Goal); }

bool GridMap::solvable() const {
    int start = start_index();
    int goal = goal_index();
    std::vector<char> seen(static_cast<std::size_t>(size()), 0);
    std::queue<int> frontier;
    frontier.push(start);
    seen[static_cast<std::size_t>(start)] = 1;
    while (!frontier.empty()) {
        int cur = frontier.front();
        frontier.pop();
        if (cur == goal)
            return true;
        if (at(cur) == Cell::Hole)
            continue;
        int r = cur / cols, c = cur % cols;
        const int dr[] = {0, 1, 0, -1};
        const int dc[] = {-1, 0, 1, 0};
        for (int k = 0; k < 4; ++k) {
            int nr = r + dr[k], nc = c + dc[k];
            if (nr < 0 || nr >= rows || nc < 0 || nc >= cols)
                continue;
            int ni = nr * cols + nc;
            if (!seen[static_cast<std::size_t>(ni)]) {
                seen[static_cast<std::size_t>(ni)] = 1;
                frontier.push(ni);
            }
        }
    }
    return false;
}

void GridMap::validate() const {
    start_index();
    goal_index();
    if (!solvable())
        throw MapError(MapError::Kind::Unsolvable, "no path from start to goal");
}

GridMap GridMap::parse(const std::string& text) {
    GridMap map;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        if (map.cols == 0)
            map.cols = static_cast<int>(line.size());
        else if (static_cast<int>(line.size()) != map.cols)
            throw MapError(MapError::Kind::NonRectangular,
                           "row " + std::to_string(map.rows) + " has " +
                               std::to_string(line.size()) + " cells, expected " +
                               std::to_string(map.cols));
        for (char ch : line) {
            switch (ch) {
            case 'S': map.cells.push_back(Cell::Start); break;
            case 'F': map.cells.push_back(Cell::Frozen); break;
            case 'H': map.cells.push_back(Cell::Hole); break;
            case 'G': map.cells.push_back(Cell::Goal); break;
            default:
                throw MapError(MapError::Kind::InvalidCharacter,
                               std::string("invalid map character '") + ch + "'");
            }
        }
        ++map.rows;
    }
    if (map.size() < 2)
        throw MapError(MapError::Kind::MissingStartOrGoal, "map needs at least two cells");
    map.validate();
    return map;
}

GridMap GridMap::builtin(const std::string& name) {
    if (name == "4x4")
        return parse(k4x4);
    if (name == "8x8")
        return parse(k8x8);
    throw std::invalid_argument("unknown builtin map '" + name + "' (use 4x4 or 8x8)");
}

bool SlipProbs::valid(double tol) const {
    if (intended < -tol || side1 < -tol || side2 < -tol)
        return false;
    return std::abs(intended + side1 + side2 - 1.0) <= tol;
}

int default_max_steps(const GridMap& map) { return 25 * std::max(map.rows, map.cols); }

std::vector<double> encode_state(int index, int n_states) {
    if (index < 0 || index >= n_states)
        throw std::out_of_range("state index " + std::to_string(index) +
                                " outside [0, " + std::to_string(n_states) + ")");
    std::vector<double> v(static_cast<std::size_t>(n_states), 0.0);
    v[static_cast<std::size_t>(index)] = 1.0;
    return v;
}

GridWorld::GridWorld(GridMap map, bool slippery, int max_steps, std::uint64_t seed)
    : map_(std::move(map)),
      slippery_(slippery),
      max_steps_(max_steps > 0 ? max_steps : default_max_steps(map_)),
      rng_(seed) {
    map_.validate();
    slip_.assign(static_cast<std::size_t>(map_.size()),
                 slippery_ ? SlipProbs::uniform_third() : SlipProbs::deterministic());
    position_ = map_.start_index();
}

int GridWorld::reset() {
    position_ = map_.start_index();
    steps_ = 0;
    terminated_ = false;
    return position_;
}

void GridWorld::seed(std::uint64_t value) { rng_.seed(value); }

bool GridWorld::is_terminal_cell(int index) const {
    Cell c = map_.at(index);
    return c == Cell::Hole || c == Cell::Goal;
}

int GridWorld::clamped_move(int state, Action direction) const {
    int r = state / map_.cols, c = state % map_.cols;
    switch (direction) {
    case Action::Left: c -= 1; break;
    case Action::Down: r += 1; break;
    case Action::Right: c += 1; break;
    case Action::Up: r -= 1; break;
    }
    if (r < 0 || r >= map_.rows || c < 0 || c >= map_.cols)
        return state; // off-grid moves stay put
    return r * map_.cols + c;
}

const SlipProbs& GridWorld::tile_slip(int index) const {
    return slip_.at(static_cast<std::size_t>(index));
}

void GridWorld::set_tile_slip(int index, SlipProbs probs) {
    if (!probs.valid())
        throw std::invalid_argument("slip probabilities must be a distribution");
    slip_.at(static_cast<std::size_t>(index)) = probs;
}

void GridWorld::set_state(int index) {
    if (index < 0 || index >= map_.size())
        throw std::out_of_range("state index out of range");
    position_ = index;
    terminated_ = is_terminal_cell(index);
}

StepOutcome GridWorld::step(Action action) {
    if (terminated_)
        throw SteppedAfterTermination();

    const SlipProbs& slip = slippery_ ? slip_[static_cast<std::size_t>(position_)]
                                      : SlipProbs::deterministic();
    Action realized = action;
    if (slippery_) {
        double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng_);
        int a = static_cast<int>(action);
        if (u < slip.intended)
            realized = action;
        else if (u < slip.intended + slip.side1)
            realized = static_cast<Action>((a + 3) % 4);
        else
            realized = static_cast<Action>((a + 1) % 4);
    }

    StepOutcome out;
    out.next_state = clamped_move(position_, realized);
    out.reward = map_.at(out.next_state) == Cell::Goal ? 1.0 : 0.0;
    out.done = is_terminal_cell(out.next_state);
    ++steps_;
    out.truncated = !out.done && steps_ >= max_steps_;
    position_ = out.next_state;
    terminated_ = out.done || out.truncated;
    return out;
}

std::vector<Outcome> GridWorld::transition_model(int state, Action action) const {
    if (state < 0 || state >= map_.size())
        throw std::out_of_range("state index out of range");

    if (is_terminal_cell(state))
        return {Outcome{state, 1.0, 0.0, true}}; // absorbing

    const SlipProbs& slip = slippery_ ? slip_[static_cast<std::size_t>(state)]
                                      : SlipProbs::deterministic();
    int a = static_cast<int>(action);
    const Action dirs[3] = {action, static_cast<Action>((a + 3) % 4),
                            static_cast<Action>((a + 1) % 4)};
    const double probs[3] = {slip.intended, slip.side1, slip.side2};

    std::vector<Outcome> merged;
    for (int k = 0; k < 3; ++k) {
        if (probs[k] == 0.0)
            continue;
        int target = clamped_move(state, dirs[k]);
        auto it = std::find_if(merged.begin(), merged.end(),
                               [target](const Outcome& o) { return o.next_state == target; });
        if (it != merged.end()) {
            it->probability += probs[k];
        } else {
            merged.push_back(Outcome{target, probs[k],
                                     map_.at(target) == Cell::Goal ? 1.0 : 0.0,
                                     is_terminal_cell(target)});
        }
    }
    std::sort(merged.begin(), merged.end(),
              [](const Outcome& a_, const Outcome& b_) { return a_.next_state < b_.next_state; });
    return merged;
}

ChangeEvent GridWorld::make_goal_relocation(std::mt19937_64& rng, int episode_index) const {
    std::vector<int> candidates;
    for (int i = 0; i < map_.size(); ++i)
        if (map_.at(i) == Cell::Frozen)
            candidates.push_back(i);
    int old_goal = map_.goal_index();

    constexpr int kRetryBudget = 100;
    for (int attempt = 0; attempt < kRetryBudget && !candidates.empty(); ++attempt) {
        std::size_t pick = std::uniform_int_distribution<std::size_t>(
            0, candidates.size() - 1)(rng);
        int target = candidates[pick];
        GridMap trial = map_;
        trial.cells[static_cast<std::size_t>(old_goal)] = Cell::Frozen;
        trial.cells[static_cast<std::size_t>(target)] = Cell::Goal;
        if (trial.solvable()) {
            ChangeEvent ev;
            ev.kind = ChangeEvent::Kind::GoalRelocation;
            ev.episode_index = episode_index;
            ev.old_goal = old_goal;
            ev.new_goal = target;
            return ev;
        }
    }
    throw NoValidRelocation();
}

ChangeEvent GridWorld::make_tile_stability_change(std::mt19937_64& rng, double fraction,
                                                  double slip_lo, double slip_hi,
                                                  int episode_index) const {
    if (fraction < 0.0 || fraction > 1.0)
        throw std::invalid_argument("fraction must lie in [0, 1]");
    if (slip_lo < 0.0 || slip_hi > 0.5 || slip_lo > slip_hi)
        throw std::invalid_argument("slip range must satisfy 0 <= lo <= hi <= 0.5");

    std::vector<int> frozen;
    for (int i = 0; i < map_.size(); ++i)
        if (map_.at(i) == Cell::Frozen)
            frozen.push_back(i);

    auto count = static_cast<std::size_t>(
        std::lround(fraction * static_cast<double>(frozen.size())));

    // partial Fisher-Yates, then sorted so the payload order is stable
    for (std::size_t i = 0; i < count && i < frozen.size(); ++i) {
        std::size_t j = std::uniform_int_distribution<std::size_t>(i, frozen.size() - 1)(rng);
        std::swap(frozen[i], frozen[j]);
    }
    frozen.resize(std::min(count, frozen.size()));
    std::sort(frozen.begin(), frozen.end());

    ChangeEvent ev;
    ev.kind = ChangeEvent::Kind::TileStabilityChange;
    ev.episode_index = episode_index;
    for (int tile : frozen) {
        double s = slip_lo == slip_hi
                       ? slip_lo
                       : std::uniform_real_distribution<double>(slip_lo, slip_hi)(rng);
        ev.tiles.push_back(tile);
        ev.slips.push_back(SlipProbs::lateral(s));
    }
    return ev;
}

void GridWorld::apply(const ChangeEvent& event) {
    if (event.kind == ChangeEvent::Kind::GoalRelocation) {
        map_.cells.at(static_cast<std::size_t>(event.old_goal)) = Cell::Frozen;
        map_.cells.at(static_cast<std::size_t>(event.new_goal)) = Cell::Goal;
        map_.validate();
    } else {
        if (event.tiles.size() != event.slips.size())
            throw std::invalid_argument("tile/slip payload length mismatch");
        for (std::size_t i = 0; i < event.tiles.size(); ++i)
            set_tile_slip(event.tiles[i], event.slips[i]);
    }
}

ChangeEvent GridWorld::inject_goal_relocation(std::mt19937_64& rng, int episode_index) {
    ChangeEvent ev = make_goal_relocation(rng, episode_index);
    apply(ev);
    return ev;
}

ChangeEvent GridWorld::inject_tile_stability_change(std::mt19937_64& rng, double fraction,
                                                    double slip_lo, double slip_hi,
                                                    int episode_index) {
    ChangeEvent ev = make_tile_stability_change(rng, fraction, slip_lo, slip_hi, episode_index);
    apply(ev);
    return ev;
}

} // namespace idem
