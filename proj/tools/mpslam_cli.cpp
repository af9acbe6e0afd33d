#include <mpslam/errors.hpp>
#include <mpslam/experiment.hpp>
#include <mpslam/output.hpp>
#include <mpslam/scenario.hpp>

#include <CLI11.hpp>

#include <chrono>
#include <cstdint>
#include <iostream>
#include <optional>

namespace {

struct RunArgs {
    std::string scenario;
    std::string experiment = "E7";
    std::optional<int> mimo, coop, imu, fusion;
    std::size_t runs = 1;
    std::uint64_t seed = 1;
    std::string out;
    unsigned threads = 0;
    std::optional<std::size_t> particles;
    std::optional<int> steps;
};

int run(const RunArgs& args) {
    mpslam::ScenarioConfig config = mpslam::load_scenario_file(args.scenario);
    if (args.experiment == "custom") {
        if (!args.mimo || !args.coop || !args.imu || !args.fusion) {
            std::cerr << "error: --experiment custom requires --mimo, --coop, --imu and --fusion\n";
            return 2;
        }
        config.toggles = {*args.mimo != 0, *args.coop != 0, *args.imu != 0, *args.fusion != 0};
    } else {
        config.toggles = mpslam::ExperimentToggles::named(args.experiment);
        if (args.mimo) config.toggles.mimo = *args.mimo != 0;
        if (args.coop) config.toggles.coop = *args.coop != 0;
        if (args.imu) config.toggles.imu = *args.imu != 0;
        if (args.fusion) config.toggles.pva_fusion = *args.fusion != 0;
    }
    if (args.particles) config.model.particles = *args.particles;
    if (args.steps) config.steps = *args.steps;
    mpslam::validate_scenario(config);

    const auto start = std::chrono::steady_clock::now();
    const auto records = mpslam::run_experiment(config, args.runs, args.seed, args.threads);
    mpslam::write_experiment(args.out, config, {args.experiment, args.seed, args.runs}, records);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    for (const auto& r : records) {
        std::cout << "run " << r.run << ": final-quarter RMSE " << r.final_quarter_rmse() << " m, mean OSPA "
                  << r.mean_ospa() << " m, divergence flags " << r.divergence_count() << '\n';
    }
    std::cout << "wrote " << args.out << " in " << seconds << " s\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cooperative multipath SLAM simulator"};
    app.require_subcommand(1);

    RunArgs args;
    CLI::App* cmd = app.add_subcommand("run", "Run a seeded Monte-Carlo experiment and write CSV results");
    cmd->add_option("--scenario", args.scenario, "Scenario JSON file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--experiment", args.experiment, "E1..E7 or custom")
        ->check(CLI::IsMember({"E1", "E2", "E3", "E4", "E5", "E6", "E7", "custom"}));
    const auto bit = CLI::IsMember({0, 1});
    cmd->add_option("--mimo", args.mimo, "0|1")->check(bit);
    cmd->add_option("--coop", args.coop, "0|1")->check(bit);
    cmd->add_option("--imu", args.imu, "0|1")->check(bit);
    cmd->add_option("--fusion", args.fusion, "0|1")->check(bit);
    cmd->add_option("--runs", args.runs, "Number of runs")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", args.seed, "Master seed");
    cmd->add_option("--out", args.out, "Output directory")->required();
    cmd->add_option("--threads", args.threads, "Worker threads (0 = all cores)");
    cmd->add_option("--particles", args.particles, "Override the particle count")->check(CLI::PositiveNumber);
    cmd->add_option("--steps", args.steps, "Override the number of steps")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    try {
        return run(args);
    } catch (const mpslam::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
