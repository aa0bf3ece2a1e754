#ifndef MSN_BASELINES_HPP
#define MSN_BASELINES_HPP

// Comparator optimizers sharing MSN's Objective interface and budget: one
// optimization step always costs pool_size objective evaluations.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "msn/errors.hpp"
#include "msn/msn.hpp"
#include "msn/objectives.hpp"
#include "msn/vecmath.hpp"

namespace msn {

enum class BaselineKind { random_search, simulated_annealing, evolution_strategies };

NLOHMANN_JSON_SERIALIZE_ENUM(BaselineKind, {{BaselineKind::random_search, "random_search"},
                                            {BaselineKind::simulated_annealing, "simulated_annealing"},
                                            {BaselineKind::evolution_strategies, "evolution_strategies"}})

struct AnnealingParams {
    double initial_temperature = 1.0;
    double cooling_rate = 0.995;
    double proposal_std = 0.1;
};

/// (mu + lambda) evolution strategy.
struct EsParams {
    std::size_t mu = 10;
    std::size_t lambda_offspring = 40;
    double sigma_init = 0.5;
    double sigma_decay = 0.999;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(AnnealingParams, initial_temperature, cooling_rate, proposal_std)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(EsParams, mu, lambda_offspring, sigma_init, sigma_decay)

struct BaselineConfig {
    BaselineKind kind = BaselineKind::random_search;
    std::size_t pool_size = 50;
    AnnealingParams sa;
    EsParams es;

    void validate() const {
        if (pool_size == 0) throw ArgumentError("BaselineConfig: pool_size must be >= 1");
        if (kind == BaselineKind::simulated_annealing) {
            if (!(sa.initial_temperature > 0.0)) throw ArgumentError("BaselineConfig: temperature must be > 0");
            if (!(sa.cooling_rate > 0.0 && sa.cooling_rate <= 1.0)) {
                throw ArgumentError("BaselineConfig: cooling_rate must lie in (0, 1]");
            }
            if (!(sa.proposal_std >= 0.0)) throw ArgumentError("BaselineConfig: proposal_std must be >= 0");
        }
        if (kind == BaselineKind::evolution_strategies) {
            if (es.mu == 0 || es.mu > es.lambda_offspring) {
                throw ArgumentError("BaselineConfig: ES needs 1 <= mu <= lambda_offspring");
            }
            if (es.mu + es.lambda_offspring != pool_size) {
                throw ArgumentError("BaselineConfig: ES needs mu + lambda_offspring == pool_size");
            }
            if (!(es.sigma_init >= 0.0)) throw ArgumentError("BaselineConfig: sigma_init must be >= 0");
        }
    }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(BaselineConfig, kind, pool_size, sa, es)

struct BaselineState {
    std::vector<ParameterVector> population;  ///< ES pool awaiting evaluation.
    ParameterVector current;                  ///< SA chain position.
    double current_reward = -std::numeric_limits<double>::infinity();
    double temperature = 0.0;
    double sigma = 0.0;
    Sample best;
    double generation_best = -std::numeric_limits<double>::infinity();
    std::size_t generation = 0;
    std::size_t evaluations = 0;
    RngHandle rng;
};

inline BaselineState init_baseline(const BaselineConfig& config, const Objective& objective, std::uint64_t seed) {
    config.validate();
    BaselineState state;
    state.rng = RngHandle{seed, 0};
    state.temperature = config.sa.initial_temperature;
    state.sigma = config.es.sigma_init;
    const RngHandle init = state.rng.derive(0x696e6974ULL);
    if (config.kind == BaselineKind::simulated_annealing) {
        state.current = objective.initialize(init.derive(0));
    } else if (config.kind == BaselineKind::evolution_strategies) {
        for (std::size_t i = 0; i < config.pool_size; ++i) state.population.push_back(objective.initialize(init.derive(i)));
    }
    return state;
}

namespace detail {

inline void track_best(BaselineState& state, const ParameterVector& params, double reward) {
    state.generation_best = std::max(state.generation_best, reward);
    if (reward > state.best.reward) state.best = {params, reward};
}

inline double checked_eval(const Objective& objective, const ParameterVector& params, std::size_t slot) {
    double r;
    try {
        r = objective.evaluate(params);
    } catch (const std::exception& e) {
        throw EvaluationError(slot, std::string("objective threw: ") + e.what());
    }
    if (!std::isfinite(r)) throw EvaluationError(slot, "objective returned a non-finite reward");
    return r;
}

}  // namespace detail

/// Fresh initializations every step; only the best ever seen is kept.
inline void random_search_step(const BaselineConfig& config, BaselineState& state, const Objective& objective,
                               unsigned threads = 1) {
    state.generation_best = -std::numeric_limits<double>::infinity();
    const RngHandle gen = state.rng.derive(state.generation);
    std::vector<ParameterVector> batch;
    batch.reserve(config.pool_size);
    for (std::size_t i = 0; i < config.pool_size; ++i) batch.push_back(objective.initialize(gen.derive(i)));
    const auto rewards = evaluate_all(objective, batch, threads);
    for (std::size_t i = 0; i < batch.size(); ++i) detail::track_best(state, batch[i], rewards[i]);
    state.evaluations += batch.size();
    ++state.generation;
}

/// Metropolis probability of accepting a reward change `delta` at `temperature`.
inline double acceptance_probability(double delta, double temperature) {
    if (delta >= 0.0) return 1.0;
    if (temperature <= 0.0) return 0.0;
    return std::exp(delta / temperature);
}

/// Accept test against a uniform draw u in [0, 1).
inline bool metropolis_accept(double delta, double temperature, double u) {
    return delta >= 0.0 || u < acceptance_probability(delta, temperature);
}

/// pool_size Metropolis proposals (gaussian moves on every coordinate), then
/// one cooling step. The very first proposal of a run is the initial point.
inline void simulated_annealing_step(const BaselineConfig& config, BaselineState& state, const Objective& objective) {
    state.generation_best = -std::numeric_limits<double>::infinity();
    auto engine = state.rng.derive(state.generation).engine();
    std::normal_distribution<double> noise(0.0, config.sa.proposal_std);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t i = 0; i < config.pool_size; ++i) {
        if (state.evaluations == 0) {
            state.current_reward = detail::checked_eval(objective, state.current, i);
            detail::track_best(state, state.current, state.current_reward);
            ++state.evaluations;
            continue;
        }
        ParameterVector proposal = state.current;
        if (config.sa.proposal_std > 0.0) {
            for (auto& v : proposal) v += noise(engine);
        }
        const double reward = detail::checked_eval(objective, proposal, i);
        ++state.evaluations;
        state.generation_best = std::max(state.generation_best, reward);
        if (metropolis_accept(reward - state.current_reward, state.temperature, unit(engine))) {
            state.current = std::move(proposal);
            state.current_reward = reward;
            detail::track_best(state, state.current, reward);
        }
    }
    state.temperature *= config.sa.cooling_rate;
    ++state.generation;
}

/// Evaluates the pool, keeps the mu best as parents and refills with
/// lambda_offspring gaussian mutants of uniformly chosen parents. Parents
/// survive unchanged (plus-selection); sigma decays once per step.
inline void evolution_strategies_step(const BaselineConfig& config, BaselineState& state, const Objective& objective,
                                      unsigned threads = 1) {
    state.generation_best = -std::numeric_limits<double>::infinity();
    const auto rewards = evaluate_all(objective, state.population, threads);
    state.evaluations += state.population.size();
    for (std::size_t i = 0; i < rewards.size(); ++i) detail::track_best(state, state.population[i], rewards[i]);

    const auto ranked = rank_by_reward(rewards);
    std::vector<ParameterVector> next;
    next.reserve(config.pool_size);
    for (std::size_t i = 0; i < config.es.mu; ++i) next.push_back(state.population[ranked[i]]);

    const RngHandle gen = state.rng.derive(state.generation);
    for (std::size_t o = 0; o < config.es.lambda_offspring && next.size() < config.pool_size; ++o) {
        auto engine = gen.derive(o).engine();
        std::uniform_int_distribution<std::size_t> pick(0, config.es.mu - 1);
        ParameterVector child = next[pick(engine)];
        if (state.sigma > 0.0) {
            std::normal_distribution<double> noise(0.0, state.sigma);
            for (auto& v : child) v += noise(engine);
        }
        next.push_back(std::move(child));
    }
    state.population = std::move(next);
    state.sigma *= config.es.sigma_decay;
    ++state.generation;
}

inline void baseline_step(const BaselineConfig& config, BaselineState& state, const Objective& objective,
                          unsigned threads = 1) {
    switch (config.kind) {
        case BaselineKind::random_search: random_search_step(config, state, objective, threads); break;
        case BaselineKind::simulated_annealing: simulated_annealing_step(config, state, objective); break;
        case BaselineKind::evolution_strategies: evolution_strategies_step(config, state, objective, threads); break;
    }
}

/// Same loop and termination semantics as msn::run.
inline RunResult run_baseline(const Objective& objective, const BaselineConfig& config,
                              const TerminationRule& termination, std::uint64_t seed, const RunOptions& options = {}) {
    BaselineState state = init_baseline(config, objective, seed);
    RunResult result;
    for (std::size_t g = 1; g <= termination.max_steps; ++g) {
        try {
            baseline_step(config, state, objective, options.threads);
        } catch (EvaluationError& e) {
            e.generation = g;
            throw;
        }
        GenerationRecord rec{g, state.generation_best, state.best.reward, 0.0, 0, 0.0, false};
        result.trace.push_back(rec);
        result.steps = g;
        if (target_reached(objective, termination, state.best.reward)) {
            result.cause = TerminationCause::target_reached;
            break;
        }
        if (options.stop && options.stop(rec, state.best)) {
            result.cause = TerminationCause::caller_stop;
            break;
        }
    }
    result.evaluations = state.evaluations;
    result.best = state.best;
    return result;
}

}  // namespace msn

#endif  // MSN_BASELINES_HPP
