// MSN works on any Objective, not only networks: here it minimizes a
// 20-dimensional sphere directly over the parameter vector.

#include <iostream>
#include <random>

#include "msn.hpp"

int main() {
    msn::Objective sphere;
    sphere.name = "sphere";
    sphere.dimension = 20;
    sphere.evaluate = [](std::span<const double> x) {
        double s = 0.0;
        for (double v : x) s += (v - 1.0) * (v - 1.0);
        return -s;
    };
    sphere.initialize = [](msn::RngHandle rng) {
        auto engine = rng.engine();
        std::uniform_real_distribution<double> u(-5.0, 5.0);
        msn::ParameterVector x(20);
        for (auto& v : x) v = u(engine);
        return x;
    };
    sphere.target_reward = 0.0;

    msn::MsnConfig config;
    config.min_distance = 1.0;

    // Parallel evaluation gives the same result as a serial run with the same seed.
    msn::RunOptions options;
    options.threads = 4;
    const auto result = msn::run(sphere, config, {1e-3, 3000}, 42, options);
    std::cout << msn::to_string(result.cause) << " after " << result.steps << " generations, loss "
              << -result.best.reward << '\n';
}
