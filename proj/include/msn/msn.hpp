#ifndef MSN_MSN_HPP
#define MSN_MSN_HPP

// Multiple Search Neuroevolution.
//
// Each generation the evaluated pool is recomposed as
//   [elite] + anchors + probes_per_anchor probes per anchor + blends
// where the anchors are the best samples that are mutually at least
// `min_distance` apart (Canberra). A single scalar, integrity, controls both
// the perturbation radius and how many coordinates each probe or blend
// touches. Integrity drops by `step_size` whenever a generation fails to beat
// the elite by the relative margin `min_entropy`; after `patience` such
// failures it resets to 1 and the elite is reinserted as an anchor
// (backtracking). When fewer than `num_anchors` anchors can be admitted the
// effective lr and alpha grow by `expansion_factor` (radial expansion).
//
// Rewards are maximized. Every random draw for pool slot s of generation g
// comes from the substream seed.derive(g).derive(s), so the result is
// independent of evaluation order.

#include <algorithm>
#include <cassert>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "msn/errors.hpp"
#include "msn/objectives.hpp"
#include "msn/vecmath.hpp"

namespace msn {

enum class NoiseKind { uniform, gaussian };

NLOHMANN_JSON_SERIALIZE_ENUM(NoiseKind, {{NoiseKind::uniform, "uniform"}, {NoiseKind::gaussian, "gaussian"}})

struct MsnConfig {
    std::size_t pool_size = 50;
    std::size_t num_anchors = 4;
    std::size_t probes_per_anchor = 8;

    double step_size = 0.05;
    double min_entropy = 0.01;
    double lr = 0.5;
    double lambda = 5.0;
    double alpha = 0.05;
    double beta = 0.29;
    double min_distance = 3.0;
    std::size_t patience = 20;
    double expansion_factor = 1.1;

    /// Radial expansion never pushes the effective lr above lr * lr_cap_factor.
    double lr_cap_factor = 100.0;
    NoiseKind noise = NoiseKind::uniform;

    void validate() const {
        auto fail = [](const std::string& what) { throw ArgumentError("MsnConfig: " + what); };
        if (num_anchors == 0 || probes_per_anchor == 0) fail("num_anchors and probes_per_anchor must be >= 1");
        if (pool_size < num_anchors * probes_per_anchor + 1) {
            fail("pool_size " + std::to_string(pool_size) + " is below num_anchors * probes_per_anchor + 1 = " +
                 std::to_string(num_anchors * probes_per_anchor + 1));
        }
        if (!(step_size > 0.0 && step_size <= 1.0)) fail("step_size must lie in (0, 1]");
        if (!(min_entropy >= 0.0)) fail("min_entropy must be >= 0");
        if (!(lr > 0.0)) fail("lr must be > 0");
        if (!(lambda > 0.0)) fail("lambda must be > 0");
        if (!(alpha > 0.0 && alpha <= 1.0)) fail("alpha must lie in (0, 1]");
        if (!(beta > 0.0)) fail("beta must be > 0");
        if (!(min_distance > 0.0)) fail("min_distance must be > 0");
        if (patience == 0) fail("patience must be >= 1");
        if (!(expansion_factor > 1.0)) fail("expansion_factor must be > 1");
        if (!(lr_cap_factor >= 1.0)) fail("lr_cap_factor must be >= 1");
    }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(MsnConfig, pool_size, num_anchors, probes_per_anchor, step_size,
                                                min_entropy, lr, lambda, alpha, beta, min_distance, patience,
                                                expansion_factor, lr_cap_factor, noise)

struct Sample {
    ParameterVector params;
    double reward = -std::numeric_limits<double>::infinity();
};

struct MsnState {
    double integrity = 1.0;
    Sample elite;  ///< Historical best; reward is -inf until the first step.
    std::vector<ParameterVector> anchors;
    double effective_lr = 0.0;
    double effective_alpha = 0.0;
    std::size_t fail_count = 0;
    std::size_t generation = 0;
    RngHandle rng;
    bool backtracked = false;  ///< Whether the most recent step backtracked.
    std::size_t admitted_anchors = 0;

    [[nodiscard]] bool has_elite() const noexcept { return !elite.params.empty(); }
};

inline MsnState init_state(const MsnConfig& config, std::uint64_t seed) {
    config.validate();
    MsnState state;
    state.effective_lr = config.lr;
    state.effective_alpha = config.alpha;
    state.rng = RngHandle{seed, 0};
    return state;
}

enum class Role { initial, elite, anchor, probe, blend };

struct RoleTag {
    Role role = Role::initial;
    std::size_t anchor_index = 0;  ///< Meaningful for probes only.
    friend bool operator==(const RoleTag&, const RoleTag&) = default;
};

struct Pool {
    std::vector<ParameterVector> members;
    std::vector<RoleTag> roles;

    [[nodiscard]] std::size_t size() const noexcept { return members.size(); }
};

/// Perturbation magnitude: (tanh(lambda * (1 - integrity) - 2.5) + 1) * lr.
inline double search_radius(double integrity, double lambda, double effective_lr) {
    const double p = 1.0 - integrity;
    return (std::tanh(lambda * p - 2.5) + 1.0) * effective_lr;
}

/// Fraction alpha / (1 + beta / p) with p = 1 - integrity (zero when p = 0).
inline double selection_fraction(double integrity, double alpha, double beta) {
    const double p = 1.0 - integrity;
    if (p <= 0.0) return 0.0;
    return alpha / (1.0 + beta / p);
}

/// Number of coordinates a probe perturbs or a blend replaces; at least one.
inline std::size_t num_selections(double integrity, double alpha, double beta, std::size_t n_params) {
    const double k = std::round(selection_fraction(integrity, alpha, beta) * static_cast<double>(n_params));
    return std::clamp<std::size_t>(static_cast<std::size_t>(k), 1, std::max<std::size_t>(n_params, 1));
}

inline Pool init_pool(const MsnConfig& config, const std::function<ParameterVector(RngHandle)>& initialize,
                      RngHandle rng) {
    config.validate();
    Pool pool;
    pool.members.reserve(config.pool_size);
    const RngHandle base = rng.derive(0x696e6974ULL);
    for (std::size_t i = 0; i < config.pool_size; ++i) pool.members.push_back(initialize(base.derive(i)));
    pool.roles.assign(config.pool_size, RoleTag{});
    return pool;
}

inline Pool init_pool(const MsnConfig& config, const Network& net, RngHandle rng) {
    return init_pool(config, [&net](RngHandle r) { return net.initialize(r); }, rng);
}

inline Pool init_pool(const MsnConfig& config, const Objective& objective, RngHandle rng) {
    return init_pool(config, objective.initialize, rng);
}

/// Slot indices sorted by reward descending, ties to the lower index.
inline std::vector<std::size_t> rank_by_reward(std::span<const double> rewards) {
    std::vector<std::size_t> order(rewards.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rewards[a] > rewards[b]; });
    return order;
}

/// Greedy reductive selection. Walks samples best-first; the best is always
/// admitted, any later one only if it is at least `min_distance` from every
/// anchor admitted so far. Returns slot indices in admission order.
inline std::vector<std::size_t> select_anchors(std::span<const ParameterVector> samples, std::span<const double> rewards,
                                               std::size_t max_anchors, double min_distance) {
    if (samples.size() != rewards.size()) throw DimensionError("select_anchors: samples and rewards differ in length");
    std::vector<std::size_t> anchors;
    if (samples.empty() || max_anchors == 0) return anchors;
    for (std::size_t idx : rank_by_reward(rewards)) {
        const bool separated = std::all_of(anchors.begin(), anchors.end(), [&](std::size_t a) {
            return canberra_at_least(samples[idx], samples[a], min_distance);
        });
        if (separated) anchors.push_back(idx);
        if (anchors.size() == max_anchors) break;
    }
    return anchors;
}

/// Clone of `anchor` with exactly k distinct coordinates shifted by noise of
/// scale `radius` (uniform in (-radius, radius), or gaussian with sd radius).
inline ParameterVector spawn_probe(std::span<const double> anchor, double radius, std::size_t k, Engine& engine,
                                   NoiseKind noise = NoiseKind::uniform) {
    ParameterVector probe(anchor.begin(), anchor.end());
    const auto picks = choose_indices(probe.size(), std::min(k, probe.size()), engine);
    std::uniform_real_distribution<double> uniform(-radius, radius);
    std::normal_distribution<double> gaussian(0.0, radius);
    for (std::size_t i : picks) {
        double delta;
        if (noise == NoiseKind::uniform) {
            do {
                delta = uniform(engine);
            } while (radius > 0.0 && std::abs(delta) >= radius);
        } else {
            delta = gaussian(engine);
        }
        probe[i] += delta;
    }
    return probe;
}

/// Crossover. The basis is a uniformly chosen anchor; the donor is a uniformly
/// chosen pool member that differs from the basis. k coordinates of the basis
/// are overwritten with the donor's values. If every pool member equals the
/// basis the blend is the basis itself.
inline ParameterVector make_blend(std::span<const ParameterVector> anchors, std::span<const ParameterVector> pool,
                                  std::size_t k, Engine& engine) {
    if (anchors.empty()) throw ArgumentError("make_blend: no anchors");
    std::uniform_int_distribution<std::size_t> pick_anchor(0, anchors.size() - 1);
    const ParameterVector& basis = anchors[pick_anchor(engine)];
    std::vector<std::size_t> donors;
    for (std::size_t j = 0; j < pool.size(); ++j) {
        if (pool[j].size() != basis.size()) throw DimensionError("make_blend: pool member length mismatch");
        if (pool[j] != basis) donors.push_back(j);
    }
    ParameterVector blend = basis;
    if (donors.empty()) return blend;
    std::uniform_int_distribution<std::size_t> pick_donor(0, donors.size() - 1);
    const ParameterVector& donor = pool[donors[pick_donor(engine)]];
    for (std::size_t i : choose_indices(blend.size(), std::min(k, blend.size()), engine)) blend[i] = donor[i];
    return blend;
}

/// Judges the generation against the historical elite. A relative gain of at
/// least min_entropy keeps integrity; anything less lowers it by step_size and
/// counts a failure. The first generation (no elite yet) always counts as gain.
inline void update_integrity(MsnState& state, const MsnConfig& config, double gen_best_reward) {
    constexpr double eps = 1e-8;
    bool improved = !state.has_elite();
    if (!improved) {
        const double ratio =
            (gen_best_reward - state.elite.reward) / std::max(std::abs(state.elite.reward), eps);
        improved = ratio >= config.min_entropy;
    }
    if (improved) {
        state.fail_count = 0;
    } else {
        state.integrity = std::max(0.0, state.integrity - config.step_size);
        ++state.fail_count;
    }
}

/// Resets integrity and the failure counter. The caller reinserts the elite
/// as an anchor (see insert_elite_anchor).
inline void backtrack(MsnState& state, const MsnConfig& config) {
    assert(state.fail_count >= config.patience);
    (void)config;
    state.integrity = 1.0;
    state.fail_count = 0;
    state.backtracked = true;
}

/// Puts `elite` at the front of `anchors` without a distance check. An equal
/// anchor already present is moved rather than duplicated; the lowest-ranked
/// anchor is dropped when that would exceed `max_anchors`.
inline void insert_elite_anchor(std::vector<ParameterVector>& anchors, const ParameterVector& elite,
                                std::size_t max_anchors) {
    auto same = std::find(anchors.begin(), anchors.end(), elite);
    if (same != anchors.end()) {
        std::rotate(anchors.begin(), same, same + 1);
        return;
    }
    anchors.insert(anchors.begin(), elite);
    if (anchors.size() > max_anchors) anchors.pop_back();
}

/// Grows effective lr and alpha when fewer than N anchors were admitted,
/// otherwise relaxes them one step back toward the configured values.
inline void radial_expansion(MsnState& state, const MsnConfig& config, std::size_t admitted_anchors) {
    const double lr_cap = config.lr * config.lr_cap_factor;
    if (admitted_anchors < config.num_anchors) {
        state.effective_lr = std::min(state.effective_lr * config.expansion_factor, lr_cap);
        state.effective_alpha = std::min(state.effective_alpha * config.expansion_factor, 1.0);
    } else {
        state.effective_lr = std::max(state.effective_lr / config.expansion_factor, config.lr);
        state.effective_alpha = std::max(state.effective_alpha / config.expansion_factor, config.alpha);
    }
}

/// One generation: consumes the evaluated pool and returns the next one.
inline std::pair<MsnState, Pool> step(const MsnConfig& config, MsnState state, const Pool& pool,
                                      std::span<const double> rewards) {
    if (rewards.size() != pool.size()) {
        throw ArgumentError("step: " + std::to_string(rewards.size()) + " rewards for a pool of " +
                            std::to_string(pool.size()));
    }
    if (pool.size() == 0) throw ArgumentError("step: empty pool");
    for (std::size_t i = 0; i < rewards.size(); ++i) {
        if (!std::isfinite(rewards[i])) throw EvaluationError(i, "non-finite reward");
    }

    const auto ranked = rank_by_reward(rewards);
    const std::size_t best = ranked.front();

    update_integrity(state, config, rewards[best]);
    if (rewards[best] > state.elite.reward) state.elite = {pool.members[best], rewards[best]};

    state.backtracked = false;
    if (state.fail_count >= config.patience) backtrack(state, config);

    const auto admitted = select_anchors(pool.members, rewards, config.num_anchors, config.min_distance);
    state.admitted_anchors = admitted.size();
    state.anchors.clear();
    for (std::size_t idx : admitted) state.anchors.push_back(pool.members[idx]);
    if (state.backtracked) insert_elite_anchor(state.anchors, state.elite.params, config.num_anchors);

    radial_expansion(state, config, admitted.size());

    const std::size_t n = state.elite.params.size();
    const double radius = search_radius(state.integrity, config.lambda, state.effective_lr);
    const std::size_t k = num_selections(state.integrity, state.effective_alpha, config.beta, n);
    const RngHandle gen_rng = state.rng.derive(state.generation);

    Pool next;
    next.members.reserve(config.pool_size);
    next.roles.reserve(config.pool_size);
    auto push = [&](ParameterVector v, RoleTag tag) {
        if (next.members.size() < config.pool_size) {
            next.members.push_back(std::move(v));
            next.roles.push_back(tag);
        }
    };

    push(state.elite.params, {Role::elite, 0});
    for (const auto& a : state.anchors) push(a, {Role::anchor, 0});
    for (std::size_t a = 0; a < state.anchors.size(); ++a) {
        for (std::size_t m = 0; m < config.probes_per_anchor && next.members.size() < config.pool_size; ++m) {
            auto engine = gen_rng.derive(next.members.size()).engine();
            push(spawn_probe(state.anchors[a], radius, k, engine, config.noise), {Role::probe, a});
        }
    }
    while (next.members.size() < config.pool_size) {
        auto engine = gen_rng.derive(next.members.size()).engine();
        push(make_blend(state.anchors, pool.members, k, engine), {Role::blend, 0});
    }

    ++state.generation;
    return {std::move(state), std::move(next)};
}

enum class TerminationCause { target_reached, max_steps, caller_stop, failed };

NLOHMANN_JSON_SERIALIZE_ENUM(TerminationCause, {{TerminationCause::target_reached, "target_reached"},
                                                {TerminationCause::max_steps, "max_steps"},
                                                {TerminationCause::caller_stop, "caller_stop"},
                                                {TerminationCause::failed, "failed"}})

inline const char* to_string(TerminationCause c) {
    switch (c) {
        case TerminationCause::target_reached: return "target_reached";
        case TerminationCause::max_steps: return "max_steps";
        case TerminationCause::caller_stop: return "caller_stop";
        case TerminationCause::failed: return "failed";
    }
    return "unknown";
}

struct GenerationRecord {
    std::size_t generation = 0;
    double best_reward = 0.0;
    double elite_reward = 0.0;
    double integrity = 0.0;
    std::size_t num_anchors = 0;
    double effective_lr = 0.0;
    bool backtracked = false;
};

struct RunResult {
    std::vector<GenerationRecord> trace;
    std::size_t steps = 0;
    TerminationCause cause = TerminationCause::max_steps;
    Sample best;
    std::size_t evaluations = 0;
};

struct RunOptions {
    unsigned threads = 1;
    /// Checked after every generation; returning true ends the run.
    std::function<bool(const GenerationRecord&, const Sample& elite)> stop;
};

/// Runs evaluate -> step until the target is reached, max_steps generations
/// have been evaluated, or options.stop asks to finish. Evaluation errors are
/// rethrown as EvaluationError tagged with the generation.
inline RunResult run(const Objective& objective, const MsnConfig& config, const TerminationRule& termination,
                     std::uint64_t seed, const RunOptions& options = {}) {
    MsnState state = init_state(config, seed);
    Pool pool = init_pool(config, objective, state.rng);
    RunResult result;
    if (termination.max_steps == 0) return result;

    for (std::size_t g = 1; g <= termination.max_steps; ++g) {
        std::vector<double> rewards;
        try {
            rewards = evaluate_all(objective, pool.members, options.threads);
        } catch (EvaluationError& e) {
            e.generation = g;
            throw;
        }
        result.evaluations += pool.size();
        const double gen_best = *std::max_element(rewards.begin(), rewards.end());
        std::tie(state, pool) = step(config, std::move(state), pool, rewards);

        GenerationRecord rec{g, gen_best, state.elite.reward, state.integrity, state.anchors.size(),
                             state.effective_lr, state.backtracked};
        result.trace.push_back(rec);
        result.steps = g;
        if (target_reached(objective, termination, state.elite.reward)) {
            result.cause = TerminationCause::target_reached;
            break;
        }
        if (options.stop && options.stop(rec, state.elite)) {
            result.cause = TerminationCause::caller_stop;
            break;
        }
    }
    result.best = state.elite;
    return result;
}

/// Per-generation trace as CSV:
/// generation,best_reward,elite_reward,integrity,num_anchors,effective_lr
inline void write_trace_csv(std::ostream& os, const RunResult& result) {
    const auto old_precision = os.precision(std::numeric_limits<double>::max_digits10);
    os << "generation,best_reward,elite_reward,integrity,num_anchors,effective_lr\n";
    for (const auto& r : result.trace) {
        os << r.generation << ',' << r.best_reward << ',' << r.elite_reward << ',' << r.integrity << ','
           << r.num_anchors << ',' << r.effective_lr << '\n';
    }
    os.precision(old_precision);
}

}  // namespace msn

#endif  // MSN_MSN_HPP
