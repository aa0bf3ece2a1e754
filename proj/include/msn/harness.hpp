#ifndef MSN_HARNESS_HPP
#define MSN_HARNESS_HPP

// Experiment runner: repeated seeded trials of one optimizer on one objective,
// aggregate statistics, speedup comparisons and CSV/JSON result files.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "msn/baselines.hpp"
#include "msn/data.hpp"
#include "msn/msn.hpp"
#include "msn/network.hpp"
#include "msn/objectives.hpp"

namespace msn {

inline constexpr int kResultsSchemaVersion = 1;

enum class TaskKind { benchmark, classification };

NLOHMANN_JSON_SERIALIZE_ENUM(TaskKind, {{TaskKind::benchmark, "benchmark"}, {TaskKind::classification, "classification"}})

/// What to optimize. Benchmark tasks wrap `function` in `network`; the
/// classification task trains `network` on MNIST files or on synthetic digits.
struct ObjectiveSpec {
    TaskKind kind = TaskKind::benchmark;
    std::string function = "ackley";
    NetworkSpec network = task1_network_spec();

    std::string train_images;
    std::string train_labels;
    std::size_t subset_size = 2000;
    std::size_t synthetic_samples = 500;
    std::size_t image_size = 8;
    std::size_t num_classes = 10;
    double noise = 0.1;
    double target_loss = 0.15;
    /// Stop once the elite's training accuracy reaches this value.
    std::optional<double> target_accuracy;

    [[nodiscard]] bool synthetic() const { return train_images.empty(); }
};

using OptimizerConfig = std::variant<MsnConfig, BaselineConfig>;

inline std::string optimizer_name(const OptimizerConfig& config) {
    if (std::holds_alternative<MsnConfig>(config)) return "msn";
    return nlohmann::json(std::get<BaselineConfig>(config).kind).get<std::string>();
}

inline std::size_t optimizer_pool_size(const OptimizerConfig& config) {
    return std::visit([](const auto& c) { return c.pool_size; }, config);
}

struct ExperimentConfig {
    OptimizerConfig optimizer = MsnConfig{};
    ObjectiveSpec objective;
    TerminationRule termination{0.06, 5000};
    std::size_t repetitions = 5;
    std::uint64_t base_seed = 0;
    unsigned threads = 1;

    void validate() const {
        if (repetitions == 0) throw ArgumentError("ExperimentConfig: repetitions must be >= 1");
        std::visit([](const auto& c) { c.validate(); }, optimizer);
        if (objective.kind == TaskKind::benchmark) benchmark_by_name(objective.function);
    }
};

struct TrialRecord {
    std::size_t trial = 0;
    std::uint64_t seed = 0;
    std::size_t steps = 0;
    TerminationCause cause = TerminationCause::max_steps;
    double final_reward = 0.0;
    std::size_t evaluations = 0;
    double wall_time_s = 0.0;
    std::optional<double> final_accuracy;
    std::string error;

    [[nodiscard]] bool converged() const { return cause == TerminationCause::target_reached; }
    friend bool operator==(const TrialRecord&, const TrialRecord&) = default;
};

struct Aggregate {
    std::size_t trials = 0;
    std::size_t successes = 0;
    std::size_t failures = 0;
    /// Mean steps over converged trials only; empty when none converged.
    std::optional<double> mean_steps;
    /// Median steps over all non-failed trials (capped trials count at their cap).
    std::optional<double> median_steps;
    friend bool operator==(const Aggregate&, const Aggregate&) = default;
};

struct ExperimentRecord {
    std::string optimizer;
    std::string objective;
    std::vector<TrialRecord> trials;
    Aggregate aggregate;
    /// Per-class sample counts of the training set (classification only).
    std::vector<std::size_t> class_counts;
    friend bool operator==(const ExperimentRecord&, const ExperimentRecord&) = default;
};

inline double median(std::vector<double> values) {
    if (values.empty()) throw ArgumentError("median of an empty set");
    std::sort(values.begin(), values.end());
    const std::size_t mid = values.size() / 2;
    return values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

inline Aggregate aggregate(const std::vector<TrialRecord>& trials) {
    Aggregate agg;
    agg.trials = trials.size();
    std::vector<double> converged, finished;
    for (const auto& t : trials) {
        if (t.cause == TerminationCause::failed) {
            ++agg.failures;
            continue;
        }
        finished.push_back(static_cast<double>(t.steps));
        if (t.converged()) {
            ++agg.successes;
            converged.push_back(static_cast<double>(t.steps));
        }
    }
    if (!converged.empty()) {
        double sum = 0.0;
        for (double s : converged) sum += s;
        agg.mean_steps = sum / static_cast<double>(converged.size());
    }
    if (!finished.empty()) agg.median_steps = median(finished);
    return agg;
}

namespace detail {

inline std::string objective_label(const ObjectiveSpec& spec) {
    if (spec.kind == TaskKind::benchmark) return spec.function;
    return spec.synthetic() ? "synthetic_digits" : "mnist";
}

struct TrialSetup {
    Objective objective;
    TerminationRule termination;
};

inline TrialSetup make_trial(const ExperimentConfig& config, std::uint64_t seed,
                             const std::shared_ptr<const Dataset>& dataset) {
    auto net = std::make_shared<const Network>(config.objective.network);
    if (config.objective.kind == TaskKind::benchmark) {
        return {make_task1_objective(benchmark_by_name(config.objective.function), net, seed,
                                     config.termination.target_tolerance.value_or(0.06)),
                config.termination};
    }
    Objective obj = make_classification_objective(net, dataset);
    obj.target_reward = -config.objective.target_loss;
    TerminationRule rule = config.termination;
    rule.target_tolerance = 0.0;
    return {std::move(obj), rule};
}

inline std::shared_ptr<const Dataset> load_task_dataset(const ObjectiveSpec& spec, std::uint64_t seed) {
    if (spec.kind != TaskKind::classification) return nullptr;
    if (spec.synthetic()) {
        return std::make_shared<const Dataset>(
            synthetic_digits(spec.synthetic_samples, spec.image_size, spec.num_classes, seed, spec.noise));
    }
    const Dataset full = load_mnist(spec.train_images, spec.train_labels);
    return std::make_shared<const Dataset>(subsample(full, std::min(spec.subset_size, full.size()), seed));
}

}  // namespace detail

/// Runs `repetitions` trials with seeds base_seed + i. A trial whose objective
/// fails is recorded as failed; the remaining trials still run.
inline ExperimentRecord run_experiment(const ExperimentConfig& config) {
    config.validate();
    ExperimentRecord record;
    record.optimizer = optimizer_name(config.optimizer);
    record.objective = detail::objective_label(config.objective);
    const auto dataset = detail::load_task_dataset(config.objective, config.base_seed);
    if (dataset) record.class_counts = class_counts(*dataset);

    for (std::size_t i = 0; i < config.repetitions; ++i) {
        TrialRecord trial;
        trial.trial = i;
        trial.seed = config.base_seed + i;
        const auto start = std::chrono::steady_clock::now();
        try {
            auto setup = detail::make_trial(config, trial.seed, dataset);
            RunOptions options;
            options.threads = config.threads;
            if (config.objective.target_accuracy && setup.objective.auxiliary) {
                const double wanted = *config.objective.target_accuracy;
                const auto& aux = setup.objective.auxiliary;
                options.stop = [wanted, &aux](const GenerationRecord&, const Sample& elite) {
                    return aux(elite.params) >= wanted;
                };
            }
            const RunResult result =
                std::visit(
                    [&](const auto& opt) {
                        if constexpr (std::is_same_v<std::decay_t<decltype(opt)>, MsnConfig>) {
                            return run(setup.objective, opt, setup.termination, trial.seed, options);
                        } else {
                            return run_baseline(setup.objective, opt, setup.termination, trial.seed, options);
                        }
                    },
                    config.optimizer);
            trial.steps = result.steps;
            trial.cause = result.cause;
            trial.final_reward = result.best.params.empty() ? -std::numeric_limits<double>::infinity()
                                                             : result.best.reward;
            trial.evaluations = result.evaluations;
            // Re-evaluate the elite so a reported success is checked independently of the run loop.
            if (result.cause == TerminationCause::target_reached &&
                !target_reached(setup.objective, setup.termination, setup.objective.evaluate(result.best.params))) {
                throw std::logic_error("elite does not reproduce the reported target on re-evaluation");
            }
            if (setup.objective.auxiliary && !result.best.params.empty()) {
                trial.final_accuracy = setup.objective.auxiliary(result.best.params);
            }
        } catch (const std::exception& e) {
            trial.cause = TerminationCause::failed;
            trial.error = e.what();
        }
        trial.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        record.trials.push_back(std::move(trial));
    }
    record.aggregate = aggregate(record.trials);
    return record;
}

struct ComparisonRow {
    std::string optimizer;
    Aggregate aggregate;
    /// mean_steps(row) / mean_steps(reference); empty if either has no converged trial.
    std::optional<double> speedup;
};

struct Comparison {
    std::string objective;
    std::string reference;
    std::vector<ComparisonRow> rows;
};

/// Speedup of each record relative to the first one (the reference).
inline Comparison compare_records(const std::vector<ExperimentRecord>& records) {
    if (records.size() < 2) throw ArgumentError("compare: need at least two experiments");
    Comparison table;
    table.objective = records.front().objective;
    table.reference = records.front().optimizer;
    const auto& ref = records.front().aggregate;
    for (const auto& rec : records) {
        if (rec.objective != table.objective) throw ArgumentError("compare: experiments use different objectives");
        ComparisonRow row{rec.optimizer, rec.aggregate, std::nullopt};
        if (ref.mean_steps && rec.aggregate.mean_steps && *ref.mean_steps > 0.0) {
            row.speedup = *rec.aggregate.mean_steps / *ref.mean_steps;
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

inline Comparison compare(const std::vector<ExperimentConfig>& configs) {
    if (configs.size() < 2) throw ArgumentError("compare: need at least two experiments");
    std::vector<ExperimentRecord> records;
    for (const auto& c : configs) records.push_back(run_experiment(c));
    return compare_records(records);
}

namespace detail {

inline std::string fmt_optional(const std::optional<double>& v, int precision = 6) {
    if (!v) return "";
    std::ostringstream os;
    os.precision(precision);
    os << *v;
    return os.str();
}

inline std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

}  // namespace detail

inline void print_comparison(std::ostream& os, const Comparison& table) {
    os << "objective: " << table.objective << " (reference: " << table.reference << ")\n";
    os << "optimizer,successes,trials,mean_steps,median_steps,speedup\n";
    for (const auto& row : table.rows) {
        os << row.optimizer << ',' << row.aggregate.successes << ',' << row.aggregate.trials << ','
           << (row.aggregate.mean_steps ? detail::fmt_optional(row.aggregate.mean_steps) : "no convergence") << ','
           << detail::fmt_optional(row.aggregate.median_steps) << ','
           << (row.speedup ? detail::fmt_optional(row.speedup, 3) : "undefined") << '\n';
    }
}

// Per-trial CSV columns. The aggregate follows as '#'-prefixed footer lines.
inline constexpr const char* kTrialCsvHeader =
    "trial,seed,steps,cause,final_reward,evaluations,wall_time_s,final_accuracy,error";

inline void write_csv(std::ostream& os, const ExperimentRecord& record) {
    const auto old_precision = os.precision(std::numeric_limits<double>::max_digits10);
    os << kTrialCsvHeader << '\n';
    for (const auto& t : record.trials) {
        os << t.trial << ',' << t.seed << ',' << t.steps << ',' << to_string(t.cause) << ',' << t.final_reward << ','
           << t.evaluations << ',' << t.wall_time_s << ','
           << detail::fmt_optional(t.final_accuracy, std::numeric_limits<double>::max_digits10) << ','
           << detail::csv_quote(t.error) << '\n';
    }
    if (!record.trials.empty()) {
        const auto& a = record.aggregate;
        os << "# optimizer=" << record.optimizer << ",objective=" << record.objective << '\n';
        os << "# trials=" << a.trials << ",successes=" << a.successes << ",failures=" << a.failures
           << ",mean_steps=" << detail::fmt_optional(a.mean_steps, 17)
           << ",median_steps=" << detail::fmt_optional(a.median_steps, 17) << '\n';
    }
    os.precision(old_precision);
}

}  // namespace msn

// JSON mappings live in the nlohmann namespace so optional fields serialize as null.
NLOHMANN_JSON_NAMESPACE_BEGIN
template <typename T>
struct adl_serializer<std::optional<T>> {
    static void to_json(json& j, const std::optional<T>& v) {
        if (v) {
            j = *v;
        } else {
            j = nullptr;
        }
    }
    static void from_json(const json& j, std::optional<T>& v) {
        if (j.is_null()) {
            v.reset();
        } else {
            v = j.get<T>();
        }
    }
};
NLOHMANN_JSON_NAMESPACE_END

namespace msn {

inline void to_json(nlohmann::json& j, const TrialRecord& t) {
    j = {{"trial", t.trial},
         {"seed", t.seed},
         {"steps", t.steps},
         {"cause", t.cause},
         {"final_reward", t.final_reward},
         {"evaluations", t.evaluations},
         {"wall_time_s", t.wall_time_s},
         {"final_accuracy", t.final_accuracy},
         {"error", t.error}};
}

inline void from_json(const nlohmann::json& j, TrialRecord& t) {
    j.at("trial").get_to(t.trial);
    j.at("seed").get_to(t.seed);
    j.at("steps").get_to(t.steps);
    j.at("cause").get_to(t.cause);
    j.at("final_reward").get_to(t.final_reward);
    j.at("evaluations").get_to(t.evaluations);
    j.at("wall_time_s").get_to(t.wall_time_s);
    j.at("final_accuracy").get_to(t.final_accuracy);
    j.at("error").get_to(t.error);
}

inline void to_json(nlohmann::json& j, const Aggregate& a) {
    j = {{"trials", a.trials},         {"successes", a.successes},       {"failures", a.failures},
         {"mean_steps", a.mean_steps}, {"median_steps", a.median_steps}};
}

inline void from_json(const nlohmann::json& j, Aggregate& a) {
    j.at("trials").get_to(a.trials);
    j.at("successes").get_to(a.successes);
    j.at("failures").get_to(a.failures);
    j.at("mean_steps").get_to(a.mean_steps);
    j.at("median_steps").get_to(a.median_steps);
}

inline void to_json(nlohmann::json& j, const ExperimentRecord& r) {
    j = {{"schema_version", kResultsSchemaVersion},
         {"optimizer", r.optimizer},
         {"objective", r.objective},
         {"trials", r.trials},
         {"aggregate", r.aggregate},
         {"class_counts", r.class_counts}};
}

inline void from_json(const nlohmann::json& j, ExperimentRecord& r) {
    if (j.at("schema_version").get<int>() != kResultsSchemaVersion) {
        throw ArgumentError("unsupported results schema version");
    }
    j.at("optimizer").get_to(r.optimizer);
    j.at("objective").get_to(r.objective);
    j.at("trials").get_to(r.trials);
    j.at("aggregate").get_to(r.aggregate);
    r.class_counts = j.value("class_counts", std::vector<std::size_t>{});
}

inline void to_json(nlohmann::json& j, const TerminationRule& t) {
    j = {{"target_tolerance", t.target_tolerance}, {"max_steps", t.max_steps}};
}

inline void from_json(const nlohmann::json& j, TerminationRule& t) {
    t.target_tolerance = j.value("target_tolerance", t.target_tolerance);
    t.max_steps = j.value("max_steps", t.max_steps);
}

inline void to_json(nlohmann::json& j, const ObjectiveSpec& s) {
    j = {{"kind", s.kind},
         {"function", s.function},
         {"network", s.network},
         {"train_images", s.train_images},
         {"train_labels", s.train_labels},
         {"subset_size", s.subset_size},
         {"synthetic_samples", s.synthetic_samples},
         {"image_size", s.image_size},
         {"num_classes", s.num_classes},
         {"noise", s.noise},
         {"target_loss", s.target_loss},
         {"target_accuracy", s.target_accuracy}};
}

inline void from_json(const nlohmann::json& j, ObjectiveSpec& s) {
    s.kind = j.value("kind", s.kind);
    s.function = j.value("function", s.function);
    if (j.contains("network")) j.at("network").get_to(s.network);
    s.train_images = j.value("train_images", s.train_images);
    s.train_labels = j.value("train_labels", s.train_labels);
    s.subset_size = j.value("subset_size", s.subset_size);
    s.synthetic_samples = j.value("synthetic_samples", s.synthetic_samples);
    s.image_size = j.value("image_size", s.image_size);
    s.num_classes = j.value("num_classes", s.num_classes);
    s.noise = j.value("noise", s.noise);
    s.target_loss = j.value("target_loss", s.target_loss);
    s.target_accuracy = j.value("target_accuracy", s.target_accuracy);
}

/// {"kind": "msn", ...MsnConfig} or {"kind": "random_search" | ..., ...BaselineConfig}
inline void to_json(nlohmann::json& j, const OptimizerConfig& o) {
    if (const auto* m = std::get_if<MsnConfig>(&o)) {
        j = *m;
        j["kind"] = "msn";
    } else {
        j = std::get<BaselineConfig>(o);
    }
}

inline void from_json(const nlohmann::json& j, OptimizerConfig& o) {
    if (j.value("kind", std::string("msn")) == "msn") {
        o = j.get<MsnConfig>();
    } else {
        o = j.get<BaselineConfig>();
    }
}

inline void to_json(nlohmann::json& j, const ExperimentConfig& c) {
    j = {{"optimizer", c.optimizer},   {"objective", c.objective}, {"termination", c.termination},
         {"repetitions", c.repetitions}, {"base_seed", c.base_seed}, {"threads", c.threads}};
}

inline void from_json(const nlohmann::json& j, ExperimentConfig& c) {
    if (j.contains("optimizer")) j.at("optimizer").get_to(c.optimizer);
    if (j.contains("objective")) j.at("objective").get_to(c.objective);
    if (j.contains("termination")) j.at("termination").get_to(c.termination);
    c.repetitions = j.value("repetitions", c.repetitions);
    c.base_seed = j.value("base_seed", c.base_seed);
    c.threads = j.value("threads", c.threads);
}

enum class ResultFormat { csv, json };

/// Writes the record to `path`; throws std::runtime_error naming the path on I/O failure.
inline void emit_results(const ExperimentRecord& record, ResultFormat format, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    if (format == ResultFormat::csv) {
        write_csv(out, record);
    } else {
        out << nlohmann::json(record).dump(2) << '\n';
    }
    out.flush();
    if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

inline ExperimentRecord read_json_record(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
    return nlohmann::json::parse(in).get<ExperimentRecord>();
}

}  // namespace msn

#endif  // MSN_HARNESS_HPP
