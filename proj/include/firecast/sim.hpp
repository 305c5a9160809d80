#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "firecast/errors.hpp"

namespace firecast {

enum class CellState : std::uint8_t { Empty = 0, Tree = 1, Fire = 2, Ember = 3, BurnedOut = 4 };

inline bool is_burning(CellState s) { return s == CellState::Fire || s == CellState::Ember; }

struct SimParams {
    int width = 251;
    int height = 251;
    double density = 76.0; // percent of cells occupied by trees
    double i_seed = 2.0;   // seed intensity multiplier
    double q_th = 100.0;   // ignition threshold
    double lambda = 0.3;   // heat transfer efficiency
    double q_die = 40.0;   // ember heat loss per step
    int radius_r = 1;      // Chebyshev neighborhood radius
    int n_seeds = 1;
    int max_steps = 200;
    std::uint64_t rng_seed = 0;

    // Returns an error message naming the offending field, empty if valid.
    std::string validate() const;
};

struct SimState {
    int width = 0;
    int height = 0;
    std::vector<CellState> states; // row-major, (0,0) top-left
    std::vector<double> heat;
    int step_index = 0;

    CellState cell(int x, int y) const { return states[static_cast<std::size_t>(y) * width + x]; }
    double q(int x, int y) const { return heat[static_cast<std::size_t>(y) * width + x]; }
    std::size_t cells() const { return states.size(); }
};

SimState init_forest(const SimParams& params, std::mt19937_64& rng);

SimState step(const SimState& state, const SimParams& params);

// Trajectory including the initial state; stops at extinction or max_steps.
std::vector<SimState> run(const SimParams& params);

std::vector<std::uint8_t> burning_mask(const SimState& state);

bool any_burning(const SimState& state);

double burned_fraction(const SimState& state); // ever-ignited cells / tree-occupied cells

} // namespace firecast
