#ifndef MSN_OBJECTIVES_HPP
#define MSN_OBJECTIVES_HPP

// Benchmark surfaces, the network-wrapped 2-D task, the full-batch
// classification task, and positional (optionally parallel) pool evaluation.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <exception>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "msn/errors.hpp"
#include "msn/network.hpp"
#include "msn/vecmath.hpp"

namespace msn {

/// Axis-aligned box used for sampling origins (not for clipping).
struct Bounds {
    double x_min, x_max, y_min, y_max;
    friend bool operator==(const Bounds&, const Bounds&) = default;
};

struct BenchmarkFunction {
    std::string name;
    double (*evaluate)(double x, double y) = nullptr;
    Bounds bounds{};
    double optimum_value = 0.0;
    std::array<double, 2> optimum_location{};

    double operator()(double x, double y) const { return evaluate(x, y); }
};

namespace functions {

// Constants follow the Surjanovic & Bingham virtual library defaults.

inline double ackley(double x, double y) {
    constexpr double a = 20.0, b = 0.2, c = 2.0 * std::numbers::pi;
    const double r = std::sqrt(0.5 * (x * x + y * y));
    return -a * std::exp(-b * r) - std::exp(0.5 * (std::cos(c * x) + std::cos(c * y))) + a + std::numbers::e;
}

inline double rastrigin(double x, double y) {
    constexpr double tau = 2.0 * std::numbers::pi;
    return 20.0 + (x * x - 10.0 * std::cos(tau * x)) + (y * y - 10.0 * std::cos(tau * y));
}

inline double rosenbrock(double x, double y) { return 100.0 * (y - x * x) * (y - x * x) + (x - 1.0) * (x - 1.0); }

inline double schwefel(double x, double y) {
    return 418.9829 * 2.0 - x * std::sin(std::sqrt(std::abs(x))) - y * std::sin(std::sqrt(std::abs(y)));
}

inline double bukin6(double x, double y) {
    return 100.0 * std::sqrt(std::abs(y - 0.01 * x * x)) + 0.01 * std::abs(x + 10.0);
}

inline double easom(double x, double y) {
    const double dx = x - std::numbers::pi, dy = y - std::numbers::pi;
    return -std::cos(x) * std::cos(y) * std::exp(-(dx * dx + dy * dy));
}

inline double eggholder(double x, double y) {
    return -(y + 47.0) * std::sin(std::sqrt(std::abs(y + x / 2.0 + 47.0))) -
           x * std::sin(std::sqrt(std::abs(x - (y + 47.0))));
}

}  // namespace functions

/// All seven surfaces with their origin-sampling limits and known optima.
inline const std::vector<BenchmarkFunction>& benchmark_registry() {
    static const std::vector<BenchmarkFunction> registry = [] {
        std::vector<BenchmarkFunction> fs{
            {"ackley", functions::ackley, {-5, 5, -5, 5}, 0.0, {0.0, 0.0}},
            {"rastrigin", functions::rastrigin, {-5.2, 5.2, -5.2, 5.2}, 0.0, {0.0, 0.0}},
            {"rosenbrock", functions::rosenbrock, {-2, 2, -2, 2}, 0.0, {1.0, 1.0}},
            {"schwefel", functions::schwefel, {-500, 500, -500, 500}, 0.0, {420.9687, 420.9687}},
            {"bukin6", functions::bukin6, {-15, -5, -3, 3}, 0.0, {-10.0, 1.0}},
            {"easom", functions::easom, {-20, 20, -20, 20}, -1.0, {std::numbers::pi, std::numbers::pi}},
            {"eggholder", functions::eggholder, {-512, 512, -512, 512}, -959.6407, {512.0, 404.2319}},
        };
        for (const auto& f : fs) {
            const double at = f(f.optimum_location[0], f.optimum_location[1]);
            if (std::abs(at - f.optimum_value) > 1e-3) {
                throw std::logic_error("benchmark '" + f.name + "' optimum does not evaluate to its stored value");
            }
        }
        return fs;
    }();
    return registry;
}

inline const BenchmarkFunction& benchmark_by_name(std::string_view name) {
    const auto& reg = benchmark_registry();
    auto it = std::find_if(reg.begin(), reg.end(), [&](const auto& f) { return f.name == name; });
    if (it == reg.end()) throw ArgumentError("unknown benchmark function '" + std::string(name) + "'");
    return *it;
}

inline double eval_function(const BenchmarkFunction& f, double x, double y) { return f(x, y); }

/// Maps a parameter vector to a reward (higher is better).
/// `evaluate` must be safe to call concurrently.
struct Objective {
    std::string name;
    std::size_t dimension = 0;
    std::function<double(std::span<const double>)> evaluate;
    std::function<ParameterVector(RngHandle)> initialize;
    /// Reward at the known optimum, when there is one.
    std::optional<double> target_reward;
    double default_tolerance = 0.0;
    /// Secondary metric (training accuracy for classification).
    std::function<double(std::span<const double>)> auxiliary;
};

struct TerminationRule {
    std::optional<double> target_tolerance;
    std::size_t max_steps = 5000;
};

/// True once `best_reward` is within `tolerance` of the objective's target.
inline bool target_reached(const Objective& objective, const TerminationRule& rule, double best_reward) {
    if (!objective.target_reward || !rule.target_tolerance) return false;
    return *objective.target_reward - best_reward <= *rule.target_tolerance;
}

namespace detail {

inline Objective network_objective_base(std::shared_ptr<const Network> net, std::string name) {
    Objective obj;
    obj.name = std::move(name);
    obj.dimension = net->parameter_count();
    obj.initialize = [net](RngHandle rng) { return net->initialize(rng); };
    return obj;
}

}  // namespace detail

/// Uniform draw inside `bounds`, keyed by `origin_seed`.
inline std::array<double, 2> sample_origin(const Bounds& bounds, std::uint64_t origin_seed) {
    auto engine = RngHandle{origin_seed, 0x6f726967696eULL}.engine();
    std::uniform_real_distribution<double> ux(bounds.x_min, bounds.x_max);
    std::uniform_real_distribution<double> uy(bounds.y_min, bounds.y_max);
    const double x = ux(engine);
    return {x, uy(engine)};
}

/// The network maps a frozen origin to a point; reward = -f(point).
/// Outputs are not clipped to the function bounds.
inline Objective make_task1_objective(const BenchmarkFunction& f, std::shared_ptr<const Network> net,
                                      std::uint64_t origin_seed, double tolerance = 0.06) {
    if (net->input_size() != 2 || net->output_size() != 2) {
        throw BuildError(0, "task-1 network must map 2 inputs to 2 outputs");
    }
    const auto origin = sample_origin(f.bounds, origin_seed);
    Objective obj = detail::network_objective_base(net, f.name);
    auto fn = f.evaluate;
    obj.evaluate = [net, fn, origin](std::span<const double> params) {
        thread_local Workspace ws;
        thread_local std::vector<double> out;
        net->forward(params, origin, ws, out);
        return -fn(out[0], out[1]);
    };
    obj.target_reward = -f.optimum_value;
    obj.default_tolerance = tolerance;
    return obj;
}

/// Network output for the frozen origin of a task-1 objective.
inline std::array<double, 2> task1_point(const Network& net, const BenchmarkFunction& f, std::uint64_t origin_seed,
                                         std::span<const double> params) {
    const auto origin = sample_origin(f.bounds, origin_seed);
    const auto out = net.forward(params, origin);
    return {out[0], out[1]};
}

namespace detail {

inline std::vector<double> batch_logits(const Network& net, const Dataset& data, std::span<const double> params) {
    thread_local Workspace ws;
    thread_local std::vector<double> out;
    const std::size_t classes = data.num_classes;
    std::vector<double> logits(data.size() * classes);
    for (std::size_t i = 0; i < data.size(); ++i) {
        net.forward(params, data.input(i), ws, out);
        std::copy(out.begin(), out.end(), logits.begin() + static_cast<std::ptrdiff_t>(i * classes));
    }
    return logits;
}

}  // namespace detail

/// Full-batch objective: reward = -mean cross-entropy over the whole set.
/// `auxiliary` reports training accuracy.
inline Objective make_classification_objective(std::shared_ptr<const Network> net,
                                               std::shared_ptr<const Dataset> data) {
    if (data->size() == 0) throw ArgumentError("classification objective: empty dataset");
    data->validate();
    if (net->output_size() != data->num_classes) {
        throw DimensionError("classification objective: network yields " + std::to_string(net->output_size()) +
                             " logits for " + std::to_string(data->num_classes) + " classes");
    }
    if (net->input_size() != data->sample_shape.size()) {
        throw DimensionError("classification objective: network input does not match sample size");
    }
    Objective obj = detail::network_objective_base(net, "classification");
    obj.evaluate = [net, data](std::span<const double> params) {
        const auto logits = detail::batch_logits(*net, *data, params);
        return -cross_entropy(logits, data->num_classes, data->labels);
    };
    obj.auxiliary = [net, data](std::span<const double> params) {
        const auto logits = detail::batch_logits(*net, *data, params);
        return accuracy(logits, data->num_classes, data->labels);
    };
    return obj;
}

/// Evaluates every member, results stored positionally. With `threads` > 1 the
/// members are split across workers; the result does not depend on scheduling.
/// Throws EvaluationError for the lowest failing slot.
inline std::vector<double> evaluate_all(const Objective& objective, std::span<const ParameterVector> members,
                                        unsigned threads = 1) {
    std::vector<double> rewards(members.size());
    std::vector<std::exception_ptr> errors(members.size());
    auto work = [&](std::size_t begin, std::size_t stride) {
        for (std::size_t i = begin; i < members.size(); i += stride) {
            try {
                rewards[i] = objective.evaluate(members[i]);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t workers = std::min<std::size_t>(std::max(1u, threads), members.size());
    if (workers <= 1) {
        work(0, 1);
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w, workers);
    }
    for (std::size_t i = 0; i < members.size(); ++i) {
        if (errors[i]) {
            try {
                std::rethrow_exception(errors[i]);
            } catch (const std::exception& e) {
                throw EvaluationError(i, std::string("objective threw: ") + e.what());
            } catch (...) {
                throw EvaluationError(i, "objective threw a non-standard exception");
            }
        }
        if (!std::isfinite(rewards[i])) throw EvaluationError(i, "objective returned a non-finite reward");
    }
    return rewards;
}

}  // namespace msn

#endif  // MSN_OBJECTIVES_HPP
