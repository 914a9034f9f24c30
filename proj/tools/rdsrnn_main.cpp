#include "rdsrnn/error.hpp"
#include "rdsrnn/experiment.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdio>
#include <exception>

int main(int argc, char** argv) {
    CLI::App app{"Random dynamical systems and recurrent network experiments"};
    app.set_version_flag("--version", "rdsrnn 0.1.0");

    std::string experiment;
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;

    app.add_option("experiment", experiment,
                   "fern | fern-train | ou-counterexample | kalman-approx | contraction-report | memory-bank-demo")
        ->required();
    app.add_option("--config", config_path, "Experiment config (JSON); defaults are used when omitted")
        ->check(CLI::ExistingFile);
    app.add_option("--out", out_dir, "Output directory")->required();
    app.add_option("--seed", seed, "Override the config seed");
    app.add_option("--threads", threads, "Worker threads (0 = all cores)");

    CLI11_PARSE(app, argc, argv);

    try {
        const rdsrnn::ExperimentKind kind = rdsrnn::experiment_kind_from_string(experiment);
        rdsrnn::ExperimentConfig config = rdsrnn::default_config(kind);
        if (!config_path.empty()) {
            rdsrnn::Json doc = rdsrnn::read_json_file(config_path);
            if (!doc.is_object()) throw rdsrnn::ConfigurationError("config must be a JSON object");
            if (!doc.contains("experiment")) doc["experiment"] = experiment;
            if (doc.at("experiment") != experiment)
                throw rdsrnn::ConfigurationError(fmt::format("config is for '{}', not '{}'",
                                                             doc.at("experiment").get<std::string>(), experiment));
            config = rdsrnn::experiment_config_from_json(doc);
        }
        config.output_directory = out_dir;
        if (seed) config.seed = *seed;
        if (threads) config.threads = *threads;

        const rdsrnn::ExperimentResult result = rdsrnn::run_experiment(config);
        for (const std::string& line : result.messages) fmt::print("{}\n", line);
        for (const auto& file : result.files) fmt::print("wrote {}\n", file.string());
        return 0;
    } catch (const rdsrnn::Error& e) {
        fmt::print(stderr, "rdsrnn: {}\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        fmt::print(stderr, "rdsrnn: unexpected failure: {}\n", e.what());
        return 1;
    }
}
