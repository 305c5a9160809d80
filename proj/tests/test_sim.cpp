#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <set>

#include "firecast/sim.hpp"

using namespace firecast;

namespace {

// Fully deterministic hand-built state: lone fire seed in the middle of a
// 3x3 all-tree forest.
SimState seed_center_3x3(const SimParams& p) {
    SimState s;
    s.width = 3;
    s.height = 3;
    s.states.assign(9, CellState::Tree);
    s.heat.assign(9, 0.0);
    s.states[4] = CellState::Fire;
    s.heat[4] = p.i_seed * p.q_th;
    return s;
}

int count_state(const SimState& s, CellState c) {
    int n = 0;
    for (CellState v : s.states) n += (v == c);
    return n;
}

} // namespace

TEST_CASE("validate names the offending field") {
    SimParams p;
    p.density = 120.0;
    CHECK(p.validate().find("density") != std::string::npos);
    p = SimParams{};
    p.lambda = 0.0;
    CHECK(p.validate().find("lambda") != std::string::npos);
    p = SimParams{};
    CHECK(p.validate().empty());
}

TEST_CASE("init_forest: seeds carry i_seed * q_th heat and sit on trees") {
    SimParams p;
    p.width = 20;
    p.height = 20;
    p.density = 80.0;
    p.n_seeds = 3;
    std::mt19937_64 rng(5);
    SimState s = init_forest(p, rng);
    int fires = 0;
    for (int y = 0; y < p.height; ++y) {
        for (int x = 0; x < p.width; ++x) {
            if (s.cell(x, y) == CellState::Fire) {
                ++fires;
                CHECK(s.q(x, y) == doctest::Approx(p.i_seed * p.q_th));
            } else {
                CHECK(s.q(x, y) == 0.0);
            }
        }
    }
    CHECK(fires == 3);
}

TEST_CASE("init_forest: tree density matches a binomial oracle within 1%") {
    SimParams p;
    p.width = 200;
    p.height = 200;
    p.density = 76.0;
    std::mt19937_64 rng(11);
    SimState s = init_forest(p, rng);
    const int occupied = count_state(s, CellState::Tree) + count_state(s, CellState::Fire);
    const double frac = static_cast<double>(occupied) / 40000.0;
    // binomial(40000, 0.76): sd of the fraction is ~0.0021, 1% is ~4.7 sd
    CHECK(frac == doctest::Approx(0.76).epsilon(0.01));
}

TEST_CASE("init_forest: throws when n_seeds exceeds tree count") {
    SimParams p;
    p.width = 3;
    p.height = 3;
    p.density = 10.0;
    p.n_seeds = 9;
    std::mt19937_64 rng(1);
    CHECK_THROWS_AS(init_forest(p, rng), DataError);
}

TEST_CASE("step hand case: heat accumulation, strict threshold, decay") {
    SimParams p;
    p.q_th = 100.0;
    p.i_seed = 2.0;
    p.lambda = 0.3;
    p.q_die = 40.0;
    SimState s0 = seed_center_3x3(p);

    SimState s1 = step(s0, p);
    // every neighbor gains 0.3 * 200 = 60 <= 100: no ignition yet
    CHECK(count_state(s1, CellState::Fire) == 0);
    CHECK(s1.cell(0, 0) == CellState::Tree);
    CHECK(s1.q(0, 0) == doctest::Approx(60.0));
    // the seed decays to an ember at 160
    CHECK(s1.cell(1, 1) == CellState::Ember);
    CHECK(s1.q(1, 1) == doctest::Approx(160.0));

    SimState s2 = step(s1, p);
    // neighbors reach 60 + 0.3*160 = 108 > 100: all eight ignite
    CHECK(count_state(s2, CellState::Fire) == 8);
    CHECK(s2.q(0, 1) == doctest::Approx(108.0));
    CHECK(s2.q(1, 1) == doctest::Approx(120.0));

    SimState s3 = step(s2, p);
    // fires become embers immediately and lose q_die the same step
    CHECK(count_state(s3, CellState::Fire) == 0);
    CHECK(count_state(s3, CellState::Ember) == 9);
    CHECK(s3.q(0, 1) == doctest::Approx(68.0));
}

TEST_CASE("step hand case: exact extinction sequence of a 3x3 run") {
    SimParams p;
    p.q_die = 90.0; // seed at 200 survives exactly two decays
    SimState s = seed_center_3x3(p);
    s = step(s, p);
    CHECK(s.cell(1, 1) == CellState::Ember);
    CHECK(s.q(1, 1) == doctest::Approx(110.0));
    s = step(s, p);
    CHECK(s.q(1, 1) == doctest::Approx(20.0));
    s = step(s, p);
    CHECK(s.cell(1, 1) == CellState::BurnedOut);
    CHECK(s.q(1, 1) == 0.0);
    CHECK_FALSE(any_burning(s));
}

TEST_CASE("threshold is strict: q exactly q_th does not ignite") {
    SimParams p;
    p.q_th = 60.0;
    p.i_seed = 200.0 / 60.0; // seed heat 200, neighbors gain 0.3 * 200 = 60 exactly
    p.lambda = 0.3;
    SimState s0 = seed_center_3x3(p);
    SimState s1 = step(s0, p);
    CHECK(count_state(s1, CellState::Fire) == 0);
    CHECK(s1.q(0, 0) == doctest::Approx(60.0));

    p.q_th = 59.0;
    p.i_seed = 200.0 / 59.0; // same seed heat, now strictly above threshold
    SimState t1 = step(seed_center_3x3(p), p);
    CHECK(count_state(t1, CellState::Fire) == 8);
}

TEST_CASE("front locality: fire cannot outrun radius_r cells per step") {
    SimParams p;
    p.width = 41;
    p.height = 41;
    p.density = 100.0;
    p.radius_r = 1;
    p.lambda = 1.0; // fast spread to stress the bound
    p.rng_seed = 3;
    SimParams init_p = p;
    init_p.n_seeds = 1;
    std::mt19937_64 rng(7);
    SimState s = init_forest(init_p, rng);
    int sx = -1, sy = -1;
    for (int y = 0; y < p.height; ++y)
        for (int x = 0; x < p.width; ++x)
            if (s.cell(x, y) == CellState::Fire) { sx = x; sy = y; }
    REQUIRE(sx >= 0);
    for (int t = 1; t <= 12; ++t) {
        s = step(s, p);
        for (int y = 0; y < p.height; ++y) {
            for (int x = 0; x < p.width; ++x) {
                if (s.cell(x, y) == CellState::Tree || s.cell(x, y) == CellState::Empty) continue;
                const int cheb = std::max(std::abs(x - sx), std::abs(y - sy));
                CHECK(cheb <= t * p.radius_r);
            }
        }
    }
}

TEST_CASE("invariants over a stochastic run") {
    SimParams p;
    p.width = 64;
    p.height = 64;
    p.density = 80.0;
    p.n_seeds = 2;
    p.max_steps = 120;
    p.rng_seed = 42;
    auto traj = run(p);
    REQUIRE(traj.size() >= 2);
    CHECK(traj.front().step_index == 0);
    for (std::size_t t = 1; t < traj.size(); ++t) {
        const SimState& prev = traj[t - 1];
        const SimState& cur = traj[t];
        CHECK(cur.step_index == static_cast<int>(t));
        for (int y = 0; y < p.height; ++y) {
            for (int x = 0; x < p.width; ++x) {
                const CellState a = prev.cell(x, y), b = cur.cell(x, y);
                // Empty and BurnedOut are absorbing
                if (a == CellState::Empty) CHECK(b == CellState::Empty);
                if (a == CellState::BurnedOut) CHECK(b == CellState::BurnedOut);
                // no spontaneous ignition: a new fire needs a burning neighbor
                if (a == CellState::Tree && b == CellState::Fire) {
                    bool neighbor = false;
                    for (int dy = -1; dy <= 1; ++dy)
                        for (int dx = -1; dx <= 1; ++dx) {
                            const int nx = x + dx, ny = y + dy;
                            if ((dx | dy) == 0 || nx < 0 || ny < 0 || nx >= p.width ||
                                ny >= p.height)
                                continue;
                            neighbor = neighbor || is_burning(prev.cell(nx, ny));
                        }
                    CHECK(neighbor);
                }
                // embers decay by exactly q_die until burnout
                if (is_burning(a)) {
                    if (b == CellState::Ember)
                        CHECK(cur.q(x, y) == doctest::Approx(prev.q(x, y) - p.q_die));
                    else
                        CHECK(b == CellState::BurnedOut);
                }
            }
        }
        // ever-burned count is monotone
        int prev_burned = 0, cur_burned = 0;
        for (std::size_t i = 0; i < prev.states.size(); ++i) {
            prev_burned += (prev.states[i] != CellState::Tree && prev.states[i] != CellState::Empty);
            cur_burned += (cur.states[i] != CellState::Tree && cur.states[i] != CellState::Empty);
        }
        CHECK(cur_burned >= prev_burned);
    }
    // trajectory ends at extinction or the step cap
    const SimState& last = traj.back();
    CHECK((!any_burning(last) || last.step_index == p.max_steps));
}

TEST_CASE("percolation: dense forests burn far more than sparse ones") {
    auto mean_burned = [](double density) {
        double acc = 0;
        const int reps = 5;
        for (int i = 0; i < reps; ++i) {
            SimParams p;
            p.width = 101;
            p.height = 101;
            p.density = density;
            p.max_steps = 300;
            p.rng_seed = 100 + static_cast<std::uint64_t>(i);
            auto traj = run(p);
            acc += burned_fraction(traj.back());
        }
        return acc / reps;
    };
    const double sparse = mean_burned(40.0);
    const double dense = mean_burned(90.0);
    CHECK(dense > sparse + 0.2);
}

TEST_CASE("determinism: identical seeds give bit-identical trajectories") {
    SimParams p;
    p.width = 48;
    p.height = 48;
    p.max_steps = 60;
    p.rng_seed = 9;
    auto a = run(p);
    auto b = run(p);
    REQUIRE(a.size() == b.size());
    for (std::size_t t = 0; t < a.size(); ++t) {
        CHECK(a[t].states == b[t].states);
        CHECK(a[t].heat == b[t].heat);
    }
}

TEST_CASE("burned_fraction counts ever-ignited over occupied") {
    SimState s;
    s.width = 2;
    s.height = 2;
    s.states = {CellState::Empty, CellState::Tree, CellState::Ember, CellState::BurnedOut};
    s.heat.assign(4, 0.0);
    CHECK(burned_fraction(s) == doctest::Approx(2.0 / 3.0));
}
