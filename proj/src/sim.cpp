#include "firecast/sim.hpp"

#include <algorithm>

namespace firecast {

std::string SimParams::validate() const {
    if (width < 1 || height < 1) return "width/height must be at least 1";
    if (density < 0.0 || density > 100.0) return "density must be in [0, 100]";
    if (q_th <= 0.0) return "q_th must be positive";
    if (q_die <= 0.0) return "q_die must be positive";
    if (lambda <= 0.0 || lambda > 1.0) return "lambda must be in (0, 1]";
    if (radius_r < 1) return "radius_r must be at least 1";
    if (n_seeds < 1) return "n_seeds must be at least 1";
    if (max_steps < 0) return "max_steps must be non-negative";
    return {};
}

SimState init_forest(const SimParams& params, std::mt19937_64& rng) {
    if (auto err = params.validate(); !err.empty()) throw ConfigError("init_forest: " + err);

    SimState s;
    s.width = params.width;
    s.height = params.height;
    s.states.assign(static_cast<std::size_t>(params.width) * params.height, CellState::Empty);
    s.heat.assign(s.states.size(), 0.0);
    s.step_index = 0;

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<std::size_t> trees;
    for (std::size_t i = 0; i < s.states.size(); ++i) {
        if (unit(rng) < params.density / 100.0) {
            s.states[i] = CellState::Tree;
            trees.push_back(i);
        }
    }
    if (static_cast<int>(trees.size()) < params.n_seeds)
        throw DataError("init_forest: fewer tree cells than n_seeds");

    // n_seeds distinct tree cells, uniform without replacement
    for (int k = 0; k < params.n_seeds; ++k) {
        std::uniform_int_distribution<std::size_t> pick(k, trees.size() - 1);
        std::swap(trees[static_cast<std::size_t>(k)], trees[pick(rng)]);
        const std::size_t idx = trees[static_cast<std::size_t>(k)];
        s.states[idx] = CellState::Fire;
        s.heat[idx] = params.i_seed * params.q_th;
    }
    return s;
}

SimState step(const SimState& state, const SimParams& params) {
    SimState next = state; // double buffer: all reads from `state`
    const int w = state.width, h = state.height, r = params.radius_r;

#pragma omp parallel for
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t idx = static_cast<std::size_t>(y) * w + x;
            switch (state.states[idx]) {
                case CellState::Tree: {
                    double gain = 0.0;
                    for (int dy = -r; dy <= r; ++dy) {
                        const int ny = y + dy;
                        if (ny < 0 || ny >= h) continue;
                        for (int dx = -r; dx <= r; ++dx) {
                            const int nx = x + dx;
                            if (nx < 0 || nx >= w || (dx == 0 && dy == 0)) continue;
                            const std::size_t n = static_cast<std::size_t>(ny) * w + nx;
                            if (is_burning(state.states[n])) gain += state.heat[n];
                        }
                    }
                    const double q = state.heat[idx] + params.lambda * gain;
                    next.heat[idx] = q;
                    if (q > params.q_th) next.states[idx] = CellState::Fire;
                    break;
                }
                case CellState::Fire:
                case CellState::Ember: {
                    // Fire converts to Ember and decays in the same step.
                    const double q = state.heat[idx] - params.q_die;
                    if (q <= 0.0) {
                        next.states[idx] = CellState::BurnedOut;
                        next.heat[idx] = 0.0;
                    } else {
                        next.states[idx] = CellState::Ember;
                        next.heat[idx] = q;
                    }
                    break;
                }
                case CellState::Empty:
                case CellState::BurnedOut:
                    break;
            }
        }
    }
    next.step_index = state.step_index + 1;
    return next;
}

std::vector<SimState> run(const SimParams& params) {
    std::mt19937_64 rng(params.rng_seed);
    std::vector<SimState> trajectory;
    trajectory.push_back(init_forest(params, rng));
    while (trajectory.back().step_index < params.max_steps && any_burning(trajectory.back()))
        trajectory.push_back(step(trajectory.back(), params));
    return trajectory;
}

std::vector<std::uint8_t> burning_mask(const SimState& state) {
    std::vector<std::uint8_t> mask(state.states.size(), 0);
    for (std::size_t i = 0; i < state.states.size(); ++i)
        mask[i] = is_burning(state.states[i]) ? 1 : 0;
    return mask;
}

bool any_burning(const SimState& state) {
    return std::any_of(state.states.begin(), state.states.end(),
                       [](CellState s) { return is_burning(s); });
}

double burned_fraction(const SimState& state) {
    std::size_t occupied = 0, ignited = 0;
    for (CellState s : state.states) {
        if (s == CellState::Empty) continue;
        ++occupied;
        if (s != CellState::Tree) ++ignited;
    }
    return occupied == 0 ? 0.0 : static_cast<double>(ignited) / static_cast<double>(occupied);
}

} // namespace firecast
