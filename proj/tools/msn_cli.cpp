// msn: run benchmark, training and comparison experiments from the command line.
//
//   msn bench   --function ackley --optimizer msn --reps 5 --out results.csv
//   msn train   --synthetic --max-steps 3000 --out train.json
//   msn train   --train-images train-images-idx3-ubyte --train-labels train-labels-idx1-ubyte
//   msn compare --function ackley --optimizer msn --optimizer random_search
//
// A --config file is a JSON ExperimentConfig. It may also hold an "optimizers"
// object keyed by optimizer name, consulted when --optimizer picks one.
// Exit status: 0 on success, 1 if any trial failed, 2 on bad usage or I/O.

#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "msn.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::string out_path;
    std::string format;
    std::optional<std::size_t> reps;
    std::optional<std::size_t> max_steps;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
};

nlohmann::json load_config_json(const std::string& path) {
    if (path.empty()) return nlohmann::json::object();
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config '" + path + "'");
    try {
        return nlohmann::json::parse(in, nullptr, true, true);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("config '" + path + "': " + e.what());
    }
}

msn::OptimizerConfig optimizer_for(const std::string& name, const nlohmann::json& doc,
                                   const msn::ExperimentConfig& base) {
    if (doc.contains("optimizers") && doc["optimizers"].contains(name)) {
        nlohmann::json j = doc["optimizers"][name];
        j["kind"] = name;
        return j.get<msn::OptimizerConfig>();
    }
    if (msn::optimizer_name(base.optimizer) == name) return base.optimizer;
    if (name == "msn") return msn::MsnConfig{};
    msn::BaselineConfig b;
    b.kind = nlohmann::json(name).get<msn::BaselineKind>();
    // Unknown enum strings silently map to the first value, so check the round trip.
    if (nlohmann::json(b.kind).get<std::string>() != name) {
        throw msn::ArgumentError("unknown optimizer '" + name + "'");
    }
    return b;
}

void apply_common(msn::ExperimentConfig& config, const CommonFlags& flags) {
    if (flags.reps) config.repetitions = *flags.reps;
    if (flags.max_steps) config.termination.max_steps = *flags.max_steps;
    if (flags.seed) config.base_seed = *flags.seed;
    if (flags.threads) config.threads = *flags.threads;
}

msn::ResultFormat format_for(const CommonFlags& flags) {
    std::string f = flags.format;
    if (f.empty()) f = flags.out_path.ends_with(".json") ? "json" : "csv";
    if (f == "csv") return msn::ResultFormat::csv;
    if (f == "json") return msn::ResultFormat::json;
    throw msn::ArgumentError("unknown format '" + f + "' (csv or json)");
}

void print_summary(const msn::ExperimentRecord& record) {
    const auto& a = record.aggregate;
    std::cout << record.optimizer << " on " << record.objective << ": " << a.successes << "/" << a.trials
              << " reached the target";
    if (a.median_steps) std::cout << ", median steps " << *a.median_steps;
    if (a.mean_steps) std::cout << ", mean steps (converged) " << *a.mean_steps;
    std::cout << '\n';
    for (const auto& t : record.trials) {
        std::cout << "  trial " << t.trial << " seed " << t.seed << ": " << msn::to_string(t.cause) << " after "
                  << t.steps << " steps, reward " << t.final_reward;
        if (t.final_accuracy) std::cout << ", accuracy " << *t.final_accuracy;
        if (!t.error.empty()) std::cout << ", error: " << t.error;
        std::cout << '\n';
    }
}

int finish(const msn::ExperimentRecord& record, const CommonFlags& flags) {
    print_summary(record);
    if (!flags.out_path.empty()) msn::emit_results(record, format_for(flags), flags.out_path);
    return record.aggregate.failures > 0 ? 1 : 0;
}

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--reps", flags.reps, "Trials per optimizer (default 5)");
    cmd->add_option("--max-steps", flags.max_steps, "Generation cap per trial (default 5000)");
    cmd->add_option("--seed", flags.seed, "Base seed; trial i uses seed + i");
    cmd->add_option("--threads", flags.threads, "Evaluation threads per trial");
    cmd->add_option("--config", flags.config_path, "JSON experiment config")->check(CLI::ExistingFile);
    cmd->add_option("--out", flags.out_path, "Write results to this file");
    cmd->add_option("--format", flags.format, "csv or json (default: from --out extension)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multiple Search Neuroevolution experiments"};
    app.require_subcommand(1);

    CommonFlags bench_flags;
    std::string bench_function;
    std::string bench_optimizer = "msn";
    std::optional<double> bench_tolerance;
    std::string trace_path;
    auto* bench = app.add_subcommand("bench", "Network-wrapped 2-D benchmark function");
    bench->add_option("--function", bench_function, "ackley, rastrigin, rosenbrock, schwefel, bukin6, easom, eggholder");
    bench->add_option("--optimizer", bench_optimizer, "msn, random_search, simulated_annealing, evolution_strategies");
    bench->add_option("--tolerance", bench_tolerance, "Success tolerance around the optimum (default 0.06)");
    bench->add_option("--trace", trace_path, "Per-generation CSV trace of the first trial (msn only)");
    add_common(bench, bench_flags);

    CommonFlags train_flags;
    std::string images, labels, network_path;
    std::optional<std::size_t> subset_size, samples, hidden;
    std::optional<double> target_loss, target_accuracy, noise;
    bool synthetic = false;
    auto* train = app.add_subcommand("train", "Classification by evolved network weights");
    train->add_option("--train-images", images, "IDX image file")->check(CLI::ExistingFile);
    train->add_option("--train-labels", labels, "IDX label file")->check(CLI::ExistingFile);
    train->add_option("--subset-size", subset_size, "Training subset drawn from the IDX files (default 2000)");
    train->add_option("--target-loss", target_loss, "Stop once training loss reaches this value (default 0.15)");
    train->add_option("--target-accuracy", target_accuracy, "Also stop once training accuracy reaches this value");
    train->add_flag("--synthetic", synthetic, "Use procedural digits instead of IDX files");
    train->add_option("--samples", samples, "Synthetic sample count (default 500)");
    train->add_option("--noise", noise, "Synthetic pixel noise (default 0.1)");
    train->add_option("--hidden", hidden, "Hidden units of the default dense network (default 32)");
    train->add_option("--network", network_path, "JSON network spec overriding the default")->check(CLI::ExistingFile);
    add_common(train, train_flags);

    CommonFlags compare_flags;
    std::string compare_function;
    std::vector<std::string> compare_optimizers;
    std::optional<double> compare_tolerance;
    auto* cmp = app.add_subcommand("compare", "Speedup table; the first optimizer is the reference");
    cmp->add_option("--function", compare_function, "Benchmark function");
    cmp->add_option("--optimizer", compare_optimizers, "Repeat for each optimizer")->required();
    cmp->add_option("--tolerance", compare_tolerance, "Success tolerance (default 0.06)");
    add_common(cmp, compare_flags);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*bench) {
            const auto doc = load_config_json(bench_flags.config_path);
            auto config = doc.get<msn::ExperimentConfig>();
            config.objective.kind = msn::TaskKind::benchmark;
            if (!bench_function.empty()) config.objective.function = bench_function;
            config.optimizer = optimizer_for(bench_optimizer, doc, config);
            if (bench_tolerance) config.termination.target_tolerance = *bench_tolerance;
            apply_common(config, bench_flags);
            const auto record = msn::run_experiment(config);
            if (!trace_path.empty()) {
                const auto* m = std::get_if<msn::MsnConfig>(&config.optimizer);
                if (!m) throw msn::ArgumentError("--trace needs --optimizer msn");
                auto net = std::make_shared<const msn::Network>(config.objective.network);
                const auto obj = msn::make_task1_objective(msn::benchmark_by_name(config.objective.function), net,
                                                           config.base_seed);
                std::ofstream out(trace_path);
                if (!out) throw std::runtime_error("cannot open '" + trace_path + "' for writing");
                msn::write_trace_csv(out, msn::run(obj, *m, config.termination, config.base_seed));
            }
            return finish(record, bench_flags);
        }
        if (*train) {
            const auto doc = load_config_json(train_flags.config_path);
            auto config = doc.get<msn::ExperimentConfig>();
            auto& obj = config.objective;
            obj.kind = msn::TaskKind::classification;
            if (!doc.contains("repetitions")) config.repetitions = 1;
            if (synthetic) {
                obj.train_images.clear();
                obj.train_labels.clear();
            } else if (!images.empty() || !labels.empty()) {
                if (images.empty() || labels.empty()) {
                    throw msn::ArgumentError("--train-images and --train-labels go together");
                }
                obj.train_images = images;
                obj.train_labels = labels;
            } else if (obj.train_images.empty()) {
                throw msn::ArgumentError("train needs --train-images/--train-labels or --synthetic");
            }
            if (subset_size) obj.subset_size = *subset_size;
            if (samples) obj.synthetic_samples = *samples;
            if (noise) obj.noise = *noise;
            if (target_loss) obj.target_loss = *target_loss;
            if (target_accuracy) obj.target_accuracy = *target_accuracy;
            const bool network_in_config = doc.contains("objective") && doc["objective"].contains("network");
            if (!network_path.empty()) {
                obj.network = load_config_json(network_path).get<msn::NetworkSpec>();
            } else if (!network_in_config) {
                obj.network = obj.synthetic()
                                  ? msn::dense_classifier_spec({1, obj.image_size, obj.image_size}, hidden.value_or(32),
                                                               obj.num_classes)
                                  : msn::mnist_cnn_spec();
            }
            apply_common(config, train_flags);
            return finish(msn::run_experiment(config), train_flags);
        }
        if (*cmp) {
            if (compare_optimizers.size() < 2) throw msn::ArgumentError("compare needs at least two --optimizer values");
            const auto doc = load_config_json(compare_flags.config_path);
            auto base = doc.get<msn::ExperimentConfig>();
            base.objective.kind = msn::TaskKind::benchmark;
            if (!compare_function.empty()) base.objective.function = compare_function;
            if (compare_tolerance) base.termination.target_tolerance = *compare_tolerance;
            apply_common(base, compare_flags);
            std::vector<msn::ExperimentRecord> records;
            for (const auto& name : compare_optimizers) {
                auto config = base;
                config.optimizer = optimizer_for(name, doc, base);
                records.push_back(msn::run_experiment(config));
                print_summary(records.back());
            }
            const auto table = msn::compare_records(records);
            msn::print_comparison(std::cout, table);
            if (!compare_flags.out_path.empty()) {
                std::ofstream out(compare_flags.out_path);
                if (!out) throw std::runtime_error("cannot open '" + compare_flags.out_path + "' for writing");
                msn::print_comparison(out, table);
            }
            for (const auto& r : records) {
                if (r.aggregate.failures > 0) return 1;
            }
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "msn: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
