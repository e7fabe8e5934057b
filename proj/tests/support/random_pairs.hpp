#pragma once

#include <algorithm>
#include <random>
#include <vector>

#include "cbilab/paths.hpp"
#include "cbilab/rng.hpp"

namespace cbilab::testing {

struct StepPair {
    SteppedPath f;
    SteppedPath g;
};

// Random admissible pair: f with upward jumps and slopes of either sign on
// [0, x_max], g with positive slopes and upward jumps on [0, horizon], and
// f(0) + g(0) >= 0.
inline StepPair random_pair(std::uint64_t seed, double horizon, double x_max = 4.0,
                            bool strictly_increasing_g = true) {
    Stream rng(seed, 99);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> count(2, 8);

    auto breakpoints = [&](double span, int n) {
        std::vector<double> t{0.0};
        for (int i = 0; i < n; ++i) t.push_back(span * u(rng));
        std::sort(t.begin(), t.end());
        t.erase(std::unique(t.begin(), t.end()), t.end());
        return t;
    };

    const auto fx = breakpoints(x_max, count(rng));
    std::vector<double> fv, fs;
    double level = -0.5 + 2.0 * u(rng);
    for (std::size_t i = 0; i < fx.size(); ++i) {
        if (i > 0) level += fs.back() * (fx[i] - fx[i - 1]) + u(rng);
        fv.push_back(level);
        fs.push_back(-1.0 + 2.0 * u(rng));
    }
    SteppedPath f(fx, fv, fs, x_max);

    const auto gt = breakpoints(horizon, count(rng));
    std::vector<double> gv, gs;
    double g_level = std::max(0.0, -fv.front()) + u(rng);
    for (std::size_t i = 0; i < gt.size(); ++i) {
        if (i > 0) g_level += gs.back() * (gt[i] - gt[i - 1]) + 0.5 * u(rng);
        gv.push_back(g_level);
        gs.push_back(strictly_increasing_g ? 0.2 + 0.8 * u(rng) : 0.0);
    }
    SteppedPath g(gt, gv, gs, horizon);
    return {std::move(f), std::move(g)};
}

}  // namespace cbilab::testing
