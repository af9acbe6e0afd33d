#pragma once

// Monte-Carlo simulation of complete runs: truth, measurement generation,
// filtering and per-step evaluation.

#include <mpslam/inference.hpp>
#include <mpslam/scenario.hpp>

#include <cstdint>
#include <vector>

namespace mpslam {

struct VaRecord {
    int step = 0;
    int bs = 0;
    std::uint64_t id = 0;
    Vec2 position = Vec2::Zero();
    double existence = 0.0;
};

/// Everything recorded for one simulated run. Per-step vectors have one
/// entry per step 1..N.
struct RunRecord {
    std::size_t run = 0;
    std::uint64_t seed = 0;
    ExperimentToggles toggles;
    int steps = 0;
    std::vector<std::vector<Vec2>> truth;      // [step][mt]
    std::vector<std::vector<Vec2>> estimate;   // [step][mt]
    std::vector<VaRecord> vas;                 // confirmed VAs, all steps
    std::vector<double> ospa;                  // per step, mean over (map, BS)
    std::vector<double> cardinality;           // per step, mean over (map, BS)
    std::vector<int> divergence;               // per step, number of flagged MTs
    int da_nonconverged = 0;

    double error(int step_index, std::size_t mt) const {
        return (estimate[static_cast<std::size_t>(step_index)][mt] - truth[static_cast<std::size_t>(step_index)][mt]).norm();
    }
    int divergence_count() const;
    /// MT position RMSE over the last quarter of the steps and all MTs.
    double final_quarter_rmse() const;
    double mean_ospa() const;
};

/// Simulates run `run` of the scenario with its own random streams derived
/// from (seed, run). Deterministic.
RunRecord simulate_run(const ScenarioConfig& config, std::size_t run, std::uint64_t seed);

/// Runs `runs` independent simulations on `threads` workers (0 = hardware
/// concurrency). Records are returned in run order.
std::vector<RunRecord> run_experiment(const ScenarioConfig& config, std::size_t runs, std::uint64_t seed,
                                      unsigned threads = 0);

/// Per-step aggregates over runs.
struct AggregateMetrics {
    std::vector<double> mospa;
    std::vector<double> rmse;
    std::vector<double> cardinality;
    std::vector<std::pair<double, double>> cdf;
};

AggregateMetrics aggregate(const std::vector<RunRecord>& records);

/// Positions of the reflected VAs of `bs` visible from `mt` (the BS itself excluded).
std::vector<Vec2> visible_vas(const Vec2& mt, const Vec2& bs, std::span<const Wall> walls);

}  // namespace mpslam
