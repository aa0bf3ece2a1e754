#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <memory>
#include <random>

#include "msn/msn.hpp"
#include "msn/objectives.hpp"

using namespace msn;

namespace {

Objective constant_objective(std::size_t dim, double value = 0.0) {
    Objective obj;
    obj.name = "constant";
    obj.dimension = dim;
    obj.evaluate = [value](std::span<const double>) { return value; };
    obj.initialize = [dim](RngHandle rng) { return xavier_normal_init(dim, dim, dim, rng); };
    return obj;
}

Objective sphere_objective(std::size_t dim) {
    Objective obj = constant_objective(dim);
    obj.evaluate = [](std::span<const double> x) {
        double s = 0.0;
        for (double v : x) s += (v - 0.5) * (v - 0.5);
        return -s;
    };
    obj.target_reward = 0.0;
    return obj;
}

std::vector<double> random_rewards(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 engine(seed);
    std::normal_distribution<double> g;
    std::vector<double> r(n);
    for (auto& v : r) v = g(engine);
    return r;
}

std::size_t count_role(const Pool& pool, Role role) {
    return static_cast<std::size_t>(
        std::count_if(pool.roles.begin(), pool.roles.end(), [&](const RoleTag& t) { return t.role == role; }));
}

bool relative_close(double got, double want, double rel) { return std::abs(got - want) <= rel * std::abs(want); }

}  // namespace

TEST(SearchRadius, HandValues) {
    EXPECT_TRUE(relative_close(search_radius(1.0, 5.0, 1.0), std::tanh(-2.5) + 1.0, 1e-9));
    EXPECT_NEAR(search_radius(1.0, 5.0, 1.0), 0.013386, 5e-7);
    EXPECT_NEAR(search_radius(0.0, 5.0, 1.0), 1.986614, 5e-7);
    EXPECT_NEAR(search_radius(0.0, 5.0, 0.5), 0.993307, 5e-7);
    EXPECT_TRUE(relative_close(search_radius(0.0, 5.0, 0.5), 0.5 * search_radius(0.0, 5.0, 1.0), 1e-12));
}

TEST(SearchRadius, StrictlyIncreasingInPAndBounded) {
    const double lambda = 5.0, lr = 0.7;
    const double lo = lr * (std::tanh(-2.5) + 1.0), hi = lr * (std::tanh(lambda - 2.5) + 1.0);
    double prev = -1.0;
    for (int i = 0; i <= 10000; ++i) {
        const double p = i / 10000.0;
        const double r = search_radius(1.0 - p, lambda, lr);
        ASSERT_GT(r, prev);
        ASSERT_GE(r, lo - 1e-15);
        ASSERT_LE(r, hi + 1e-15);
        prev = r;
    }
}

TEST(NumSelections, HandValues) {
    EXPECT_EQ(num_selections(1.0, 0.05, 0.29, 771), 1u);
    EXPECT_EQ(num_selections(1.0, 0.9, 5.0, 771), 1u);
    EXPECT_EQ(num_selections(0.0, 0.05, 0.29, 10000), 388u);
    EXPECT_EQ(num_selections(0.5, 0.05, 0.29, 10000), 316u);
    EXPECT_TRUE(relative_close(selection_fraction(0.0, 0.05, 0.29), 0.05 / 1.29, 1e-9));
    EXPECT_TRUE(relative_close(selection_fraction(0.5, 0.05, 0.29), 0.05 / 1.58, 1e-9));
    EXPECT_EQ(num_selections(0.0, 1.0, 0.001, 10), 10u);
}

TEST(NumSelections, IncreasingAndSaturating) {
    const double alpha = 0.05, beta = 0.29;
    double prev = -1.0;
    for (int i = 0; i <= 10000; ++i) {
        const double p = i / 10000.0;
        const double f = selection_fraction(1.0 - p, alpha, beta);
        if (i > 0) {
            ASSERT_GT(f, prev);
            ASSERT_LT(f, alpha);
        }
        ASSERT_GE(num_selections(1.0 - p, alpha, beta, 771), 1u);
        prev = f;
    }
}

TEST(InitPool, IndependentAndDeterministic) {
    const MsnConfig config;
    const Network net = build(task1_network_spec());
    const Pool a = init_pool(config, net, {1, 0});
    const Pool b = init_pool(config, net, {1, 0});
    ASSERT_EQ(a.size(), 50u);
    EXPECT_EQ(a.members, b.members);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a.members[i].size(), 643u);
        for (std::size_t j = i + 1; j < a.size(); ++j) EXPECT_GT(canberra_distance(a.members[i], a.members[j]), 0.0);
    }
}

TEST(InitPool, UndersizedPoolRejected) {
    MsnConfig config;
    config.pool_size = 3;
    EXPECT_THROW(config.validate(), ArgumentError);
    EXPECT_THROW(init_pool(config, build(task1_network_spec()), {1, 0}), ArgumentError);
    config.pool_size = 33;
    EXPECT_NO_THROW(config.validate());
}

TEST(SelectAnchors, IdenticalSamplesGiveOneAnchor) {
    const std::vector<ParameterVector> samples(6, ParameterVector{1.0, -2.0, 3.0});
    const std::vector<double> rewards{0.1, 0.5, 0.2, 0.9, 0.0, 0.3};
    EXPECT_EQ(select_anchors(samples, rewards, 4, 3.0), (std::vector<std::size_t>{3}));
}

TEST(SelectAnchors, ZeroDistanceIsTopN) {
    const std::vector<ParameterVector> samples(6, ParameterVector{1.0});
    const std::vector<double> rewards{0.1, 0.5, 0.2, 0.9, 0.5, 0.3};
    // ties resolve to the lower slot
    EXPECT_EQ(select_anchors(samples, rewards, 4, 0.0), (std::vector<std::size_t>{3, 1, 4, 5}));
}

TEST(SelectAnchors, HandTrace) {
    const std::vector<ParameterVector> samples{{1.1, 1.0}, {0.9, 1.0}, {0.0, 0.0}};
    ASSERT_NEAR(canberra_distance(samples[0], samples[1]), 0.1, 1e-12);
    ASSERT_NEAR(canberra_distance(samples[0], samples[2]), 2.0, 1e-12);
    ASSERT_NEAR(canberra_distance(samples[1], samples[2]), 2.0, 1e-12);
    const std::vector<double> rewards{5, 4, 3};
    EXPECT_EQ(select_anchors(samples, rewards, 2, 1.0), (std::vector<std::size_t>{0, 2}));
}

TEST(SelectAnchors, PairwiseSeparation) {
    const Pool pool = init_pool(MsnConfig{}, build(task1_network_spec()), {8, 0});
    const auto rewards = random_rewards(pool.size(), 8);
    for (double d : {1.0, 100.0, 300.0, 450.0}) {
        const auto idx = select_anchors(pool.members, rewards, 4, d);
        ASSERT_FALSE(idx.empty());
        EXPECT_EQ(idx.front(), rank_by_reward(rewards).front());
        for (std::size_t i = 0; i < idx.size(); ++i) {
            for (std::size_t j = i + 1; j < idx.size(); ++j) {
                EXPECT_GE(canberra_distance(pool.members[idx[i]], pool.members[idx[j]]), d);
            }
        }
    }
}

TEST(SpawnProbe, VanishingRadius) {
    const ParameterVector anchor = xavier_normal_init(10, 10, 771, {1, 1});
    auto engine = RngHandle{2, 0}.engine();
    const auto probe = spawn_probe(anchor, 1e-12, 50, engine);
    for (std::size_t i = 0; i < anchor.size(); ++i) EXPECT_NEAR(probe[i], anchor[i], 1e-9);
}

TEST(SpawnProbe, SingleCoordinate) {
    const ParameterVector anchor = xavier_normal_init(10, 10, 771, {1, 1});
    for (std::uint64_t s = 0; s < 50; ++s) {
        auto engine = RngHandle{s, 3}.engine();
        const auto probe = spawn_probe(anchor, 0.3, 1, engine);
        std::size_t diffs = 0;
        for (std::size_t i = 0; i < anchor.size(); ++i) diffs += probe[i] != anchor[i];
        EXPECT_EQ(diffs, 1u);
    }
}

TEST(SpawnProbe, LocalityAudit) {
    const ParameterVector anchor = xavier_normal_init(100, 100, 10000, {1, 1});
    for (std::uint64_t s = 0; s < 100; ++s) {
        auto engine = RngHandle{s, 4}.engine();
        const auto probe = spawn_probe(anchor, 1.0, 388, engine);
        std::size_t diffs = 0;
        for (std::size_t i = 0; i < anchor.size(); ++i) {
            if (probe[i] != anchor[i]) {
                ++diffs;
                ASSERT_LT(std::abs(probe[i] - anchor[i]), 1.0);
            }
        }
        EXPECT_LE(diffs, 388u);
        EXPECT_GE(diffs, 380u);
    }
}

TEST(MakeBlend, IdenticalDonorIsNoOp) {
    const std::vector<ParameterVector> anchors{{1, 2, 3}};
    const std::vector<ParameterVector> pool(5, ParameterVector{1, 2, 3});
    auto engine = RngHandle{1, 0}.engine();
    EXPECT_EQ(make_blend(anchors, pool, 2, engine), anchors[0]);
}

TEST(MakeBlend, FullReplacementIsDonor) {
    const std::vector<ParameterVector> anchors{{1, 2, 3, 4}};
    const std::vector<ParameterVector> pool{{1, 2, 3, 4}, {5, 6, 7, 8}};
    auto engine = RngHandle{1, 0}.engine();
    EXPECT_EQ(make_blend(anchors, pool, 4, engine), pool[1]);
}

TEST(MakeBlend, CoordinateCount) {
    const std::vector<ParameterVector> anchors{{1, 1, 1, 1}};
    const std::vector<ParameterVector> pool{{1, 1, 1, 1}, {9, 9, 9, 9}};
    for (std::uint64_t s = 0; s < 30; ++s) {
        auto engine = RngHandle{s, 0}.engine();
        const auto blend = make_blend(anchors, pool, 2, engine);
        EXPECT_EQ(std::count(blend.begin(), blend.end(), 9.0), 2);
        EXPECT_EQ(std::count(blend.begin(), blend.end(), 1.0), 2);
    }
}

TEST(UpdateIntegrity, Examples) {
    MsnConfig config;
    config.min_entropy = 0.01;
    config.step_size = 0.1;
    MsnState state = init_state(config, 0);
    state.elite = {{0.0}, -100.0};
    state.integrity = 0.9;
    state.fail_count = 3;
    update_integrity(state, config, -98.9);
    EXPECT_DOUBLE_EQ(state.integrity, 0.9);
    EXPECT_EQ(state.fail_count, 0u);

    update_integrity(state, config, -100.0);
    EXPECT_NEAR(state.integrity, 0.8, 1e-12);
    EXPECT_EQ(state.fail_count, 1u);

    state.integrity = 0.05;
    update_integrity(state, config, -100.0);
    EXPECT_EQ(state.integrity, 0.0);
    EXPECT_EQ(state.fail_count, 2u);
}

TEST(UpdateIntegrity, ZeroEliteUsesEpsilonFloor) {
    MsnConfig config;
    MsnState state = init_state(config, 0);
    state.elite = {{0.0}, 0.0};
    update_integrity(state, config, 1e-9);  // ratio 0.1 >= 0.01
    EXPECT_EQ(state.fail_count, 0u);
    update_integrity(state, config, 0.0);
    EXPECT_EQ(state.fail_count, 1u);
}

TEST(Backtrack, ResetsAndInsertsElite) {
    MsnConfig config;
    config.patience = 10;
    MsnState state = init_state(config, 0);
    state.fail_count = 10;
    state.integrity = 0.3;
    backtrack(state, config);
    EXPECT_EQ(state.integrity, 1.0);
    EXPECT_EQ(state.fail_count, 0u);

    std::vector<ParameterVector> anchors{{1}, {2}, {3}, {4}};
    insert_elite_anchor(anchors, {9}, 4);
    EXPECT_EQ(anchors, (std::vector<ParameterVector>{{9}, {1}, {2}, {3}}));
    insert_elite_anchor(anchors, {2}, 4);
    EXPECT_EQ(anchors, (std::vector<ParameterVector>{{2}, {9}, {1}, {3}}));
    insert_elite_anchor(anchors, {2}, 4);
    EXPECT_EQ(anchors, (std::vector<ParameterVector>{{2}, {9}, {1}, {3}}));
    std::vector<ParameterVector> short_list{{5}};
    insert_elite_anchor(short_list, {6}, 4);
    EXPECT_EQ(short_list, (std::vector<ParameterVector>{{6}, {5}}));
}

TEST(RadialExpansion, ExpandCapAndRelax) {
    MsnConfig config;
    config.lr = 0.5;
    config.expansion_factor = 1.2;
    MsnState state = init_state(config, 0);
    radial_expansion(state, config, 2);
    EXPECT_NEAR(state.effective_lr, 0.6, 1e-12);
    EXPECT_NEAR(state.effective_alpha, config.alpha * 1.2, 1e-12);

    for (int i = 0; i < 100; ++i) radial_expansion(state, config, 2);
    EXPECT_DOUBLE_EQ(state.effective_lr, 100.0 * config.lr);
    EXPECT_DOUBLE_EQ(state.effective_alpha, 1.0);
    EXPECT_TRUE(std::isfinite(state.effective_lr));

    radial_expansion(state, config, 4);
    EXPECT_NEAR(state.effective_lr, 100.0 * config.lr / 1.2, 1e-9);
    for (int i = 0; i < 200; ++i) radial_expansion(state, config, 4);
    EXPECT_DOUBLE_EQ(state.effective_lr, config.lr);
    EXPECT_DOUBLE_EQ(state.effective_alpha, config.alpha);
}

TEST(Step, CompositionWithFourAnchors) {
    MsnConfig config;
    config.min_distance = 1.0;
    const Pool pool = init_pool(config, build(task1_network_spec()), {4, 0});
    const auto rewards = random_rewards(pool.size(), 4);
    const auto [state, next] = step(config, init_state(config, 4), pool, rewards);
    ASSERT_EQ(state.anchors.size(), 4u);
    EXPECT_EQ(next.size(), 50u);
    EXPECT_EQ(count_role(next, Role::elite), 1u);
    EXPECT_EQ(count_role(next, Role::anchor), 4u);
    EXPECT_EQ(count_role(next, Role::probe), 32u);
    EXPECT_EQ(count_role(next, Role::blend), 13u);
    EXPECT_EQ(next.roles.front().role, Role::elite);
    EXPECT_EQ(next.members.front(), pool.members[rank_by_reward(rewards).front()]);
}

TEST(Step, CompositionWithOneAnchor) {
    MsnConfig config;
    const Pool pool{std::vector<ParameterVector>(50, ParameterVector{0.5, -0.5, 1.0}),
                    std::vector<RoleTag>(50)};
    const auto [state, next] = step(config, init_state(config, 1), pool, random_rewards(50, 1));
    EXPECT_EQ(state.anchors.size(), 1u);
    EXPECT_EQ(count_role(next, Role::elite), 1u);
    EXPECT_EQ(count_role(next, Role::anchor), 1u);
    EXPECT_EQ(count_role(next, Role::probe), 8u);
    EXPECT_EQ(count_role(next, Role::blend), 40u);
}

TEST(Step, SmallPoolIsTruncatedToSize) {
    MsnConfig config;
    config.pool_size = 33;  // 1 + 4 + 32 = 37 would not fit
    config.min_distance = 1.0;
    const Pool pool = init_pool(config, build(task1_network_spec()), {4, 0});
    const auto [state, next] = step(config, init_state(config, 4), pool, random_rewards(33, 9));
    EXPECT_EQ(next.size(), 33u);
    EXPECT_EQ(count_role(next, Role::blend), 0u);
}

TEST(Step, Errors) {
    MsnConfig config;
    const Pool pool = init_pool(config, build(task1_network_spec()), {4, 0});
    auto rewards = random_rewards(pool.size(), 4);
    EXPECT_THROW(step(config, init_state(config, 4), pool, std::span(rewards).first(49)), ArgumentError);
    rewards[17] = std::numeric_limits<double>::quiet_NaN();
    try {
        step(config, init_state(config, 4), pool, rewards);
        FAIL() << "expected EvaluationError";
    } catch (const EvaluationError& e) {
        EXPECT_EQ(e.slot, 17u);
    }
}

TEST(Step, Deterministic) {
    MsnConfig config;
    const Pool pool = init_pool(config, build(task1_network_spec()), {6, 0});
    const auto rewards = random_rewards(pool.size(), 6);
    const auto a = step(config, init_state(config, 6), pool, rewards);
    const auto b = step(config, init_state(config, 6), pool, rewards);
    EXPECT_EQ(a.second.members, b.second.members);
    EXPECT_EQ(a.first.integrity, b.first.integrity);
}

// Drives the generation loop by hand and checks the per-step invariants.
TEST(Step, MechanismInvariantsOverARun) {
    MsnConfig config;
    config.min_distance = 2.0;
    config.patience = 5;
    auto net = std::make_shared<const Network>(task1_network_spec());
    const Objective obj = make_task1_objective(benchmark_by_name("rastrigin"), net, 3);
    MsnState state = init_state(config, 3);
    Pool pool = init_pool(config, obj, state.rng);
    double prev_elite = -std::numeric_limits<double>::infinity();
    std::size_t backtracks = 0;
    for (int g = 0; g < 150; ++g) {
        const auto rewards = evaluate_all(obj, pool.members);
        const Pool previous = pool;
        std::tie(state, pool) = step(config, std::move(state), pool, rewards);
        ASSERT_EQ(pool.size(), config.pool_size);
        ASSERT_EQ(pool.roles.size(), config.pool_size);
        ASSERT_GE(state.elite.reward, prev_elite);
        ASSERT_GE(state.integrity, 0.0);
        ASSERT_LE(state.integrity, 1.0);
        ASSERT_LT(state.fail_count, config.patience);
        prev_elite = state.elite.reward;
        backtracks += state.backtracked;

        // anchors (ignoring an elite inserted by backtracking) stay apart
        const std::size_t first = state.backtracked ? 1 : 0;
        for (std::size_t i = first; i < state.anchors.size(); ++i) {
            for (std::size_t j = i + 1; j < state.anchors.size(); ++j) {
                ASSERT_GE(canberra_distance(state.anchors[i], state.anchors[j]), config.min_distance);
            }
        }
        EXPECT_EQ(pool.members.front(), state.elite.params);

        const double radius = search_radius(state.integrity, config.lambda, state.effective_lr);
        const std::size_t k =
            num_selections(state.integrity, state.effective_alpha, config.beta, obj.dimension);
        for (std::size_t s = 0; s < pool.size(); ++s) {
            const auto& m = pool.members[s];
            if (pool.roles[s].role == Role::probe) {
                const auto& anchor = state.anchors[pool.roles[s].anchor_index];
                std::size_t diffs = 0;
                for (std::size_t i = 0; i < m.size(); ++i) {
                    if (m[i] != anchor[i]) {
                        ++diffs;
                        ASSERT_LT(std::abs(m[i] - anchor[i]), radius);
                    }
                }
                ASSERT_LE(diffs, k);
            } else if (pool.roles[s].role == Role::blend) {
                // every coordinate comes from the basis anchor or the donor
                bool found = false;
                for (const auto& a : state.anchors) {
                    for (const auto& d : previous.members) {
                        bool ok = true;
                        for (std::size_t i = 0; i < m.size() && ok; ++i) ok = m[i] == a[i] || m[i] == d[i];
                        if (ok) found = true;
                    }
                }
                ASSERT_TRUE(found);
            }
        }
    }
    EXPECT_GT(backtracks, 0u);
}

TEST(Run, ZeroBudget) {
    const auto result = run(sphere_objective(5), MsnConfig{}, {0.0, 0}, 1);
    EXPECT_TRUE(result.trace.empty());
    EXPECT_EQ(result.cause, TerminationCause::max_steps);
    EXPECT_EQ(result.steps, 0u);
}

TEST(Run, ConstantObjectiveSawtooth) {
    MsnConfig config;
    config.patience = 20;
    config.step_size = 0.04;
    const auto result = run(constant_objective(12), config, {std::nullopt, 125}, 2);
    ASSERT_EQ(result.trace.size(), 125u);
    EXPECT_EQ(result.cause, TerminationCause::max_steps);
    // generation 1 sets the elite; every later one fails, so backtracking fires
    // at generations 21, 41, 61, ...
    for (const auto& rec : result.trace) {
        const bool expect_bt = rec.generation > 1 && (rec.generation - 1) % 20 == 0;
        EXPECT_EQ(rec.backtracked, expect_bt) << rec.generation;
        const std::size_t fails = rec.generation == 1 ? 0 : (rec.generation - 1) % 20;
        EXPECT_NEAR(rec.integrity, std::max(0.0, 1.0 - 0.04 * static_cast<double>(fails)), 1e-12) << rec.generation;
    }
}

TEST(Run, EliteMonotoneAndDeterministicUnderThreads) {
    const Objective obj = sphere_objective(30);
    MsnConfig config;
    config.min_distance = 1.0;
    const auto serial = run(obj, config, {1e-6, 200}, 11);
    RunOptions options;
    options.threads = 4;
    const auto parallel = run(obj, config, {1e-6, 200}, 11, options);
    ASSERT_EQ(serial.trace.size(), parallel.trace.size());
    for (std::size_t i = 0; i < serial.trace.size(); ++i) {
        EXPECT_EQ(serial.trace[i].best_reward, parallel.trace[i].best_reward);
        EXPECT_EQ(serial.trace[i].integrity, parallel.trace[i].integrity);
        if (i > 0) EXPECT_GE(serial.trace[i].elite_reward, serial.trace[i - 1].elite_reward);
    }
    EXPECT_EQ(serial.best.params, parallel.best.params);
    EXPECT_EQ(serial.evaluations, serial.steps * config.pool_size);
    EXPECT_GT(serial.best.reward, serial.trace.front().elite_reward);
}

TEST(Run, CallerStop) {
    RunOptions options;
    options.stop = [](const GenerationRecord& r, const Sample&) { return r.generation == 7; };
    const auto result = run(sphere_objective(4), MsnConfig{}, {std::nullopt, 100}, 1, options);
    EXPECT_EQ(result.cause, TerminationCause::caller_stop);
    EXPECT_EQ(result.steps, 7u);
}

TEST(Run, ObjectiveErrorCarriesGeneration) {
    Objective obj = sphere_objective(4);
    auto calls = std::make_shared<int>(0);
    obj.evaluate = [calls](std::span<const double>) -> double {
        if (++*calls > 120) throw std::runtime_error("boom");
        return 0.0;
    };
    try {
        run(obj, MsnConfig{}, {std::nullopt, 10}, 1);
        FAIL() << "expected EvaluationError";
    } catch (const EvaluationError& e) {
        EXPECT_EQ(e.generation, 3u);
        EXPECT_EQ(e.slot, 20u);
    }
}

TEST(Run, AckleySeededRunReachesTarget) {
    auto net = std::make_shared<const Network>(task1_network_spec());
    const Objective obj = make_task1_objective(benchmark_by_name("ackley"), net, 0);
    const auto result = run(obj, MsnConfig{}, {0.06, 5000}, 0);
    EXPECT_EQ(result.cause, TerminationCause::target_reached);
    EXPECT_LE(-result.best.reward, 0.06);
}

TEST(Config, JsonRoundTripAndDefaults) {
    MsnConfig config;
    config.lr = 0.25;
    config.noise = NoiseKind::gaussian;
    const nlohmann::json j = config;
    const auto back = j.get<MsnConfig>();
    EXPECT_EQ(back.lr, 0.25);
    EXPECT_EQ(back.noise, NoiseKind::gaussian);
    const auto partial = nlohmann::json::parse(R"({"patience": 7})").get<MsnConfig>();
    EXPECT_EQ(partial.patience, 7u);
    EXPECT_EQ(partial.pool_size, 50u);
    EXPECT_EQ(partial.min_entropy, 0.01);
}

TEST(Trace, CsvHeader) {
    std::ostringstream os;
    write_trace_csv(os, run(sphere_objective(3), MsnConfig{}, {std::nullopt, 2}, 1));
    const auto text = os.str();
    EXPECT_EQ(text.substr(0, text.find('\n')), "generation,best_reward,elite_reward,integrity,num_anchors,effective_lr");
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
}
