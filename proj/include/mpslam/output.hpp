#pragma once

// CSV and metadata writers for experiment results.

#include <mpslam/experiment.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace mpslam {

/// Shortest text that round-trips the double ("%.17g").
std::string format_double(double v);

std::string estimates_csv(const RunRecord& record);
std::string vas_csv(const RunRecord& record);
std::string metrics_csv(const AggregateMetrics& metrics);
std::string cdf_csv(const AggregateMetrics& metrics);

struct ExperimentInfo {
    std::string experiment;
    std::uint64_t seed = 0;
    std::size_t runs = 0;
};

/// Metadata document: experiment, seed, run count, resolved scenario and
/// per-run diagnostics.
std::string metadata_json(const ScenarioConfig& config, const ExperimentInfo& info,
                          const std::vector<RunRecord>& records);

/// Writes estimates_run<k>.csv, vas_run<k>.csv, metrics.csv, cdf.csv and
/// metadata.json into `dir` (created if missing). Throws IoError.
void write_experiment(const std::filesystem::path& dir, const ScenarioConfig& config, const ExperimentInfo& info,
                      const std::vector<RunRecord>& records);

}  // namespace mpslam
