// Evolve the weights of a small network so that it maps a fixed origin onto
// the minimum of the Ackley function, then print the generation trace.

#include <iostream>
#include <memory>

#include "msn.hpp"

int main() {
    const auto& ackley = msn::benchmark_by_name("ackley");
    auto net = std::make_shared<const msn::Network>(msn::task1_network_spec());
    const std::uint64_t seed = 1;
    const msn::Objective objective = msn::make_task1_objective(ackley, net, seed);

    msn::MsnConfig config;  // defaults: pool 50, 4 anchors, 8 probes each
    const msn::RunResult result = msn::run(objective, config, {0.06, 5000}, seed);

    msn::write_trace_csv(std::cout, result);
    const auto point = msn::task1_point(*net, ackley, seed, result.best.params);
    std::cerr << msn::to_string(result.cause) << " after " << result.steps << " generations ("
              << result.evaluations << " evaluations); network output (" << point[0] << ", " << point[1]
              << "), f = " << -result.best.reward << '\n';
}
