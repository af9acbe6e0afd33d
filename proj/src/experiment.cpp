#include <mpslam/experiment.hpp>
#include <mpslam/errors.hpp>
#include <mpslam/metrics.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace mpslam {

int RunRecord::divergence_count() const {
    int total = 0;
    for (int d : divergence) total += d;
    return total;
}

double RunRecord::final_quarter_rmse() const {
    std::vector<double> errors;
    const int first = steps - steps / 4;
    for (int n = first; n < steps; ++n) {
        for (std::size_t i = 0; i < truth[static_cast<std::size_t>(n)].size(); ++i) errors.push_back(error(n, i));
    }
    return rmse(errors);
}

double RunRecord::mean_ospa() const {
    if (ospa.empty()) return 0.0;
    double sum = 0.0;
    for (double v : ospa) sum += v;
    return sum / static_cast<double>(ospa.size());
}

std::vector<Vec2> visible_vas(const Vec2& mt, const Vec2& bs, std::span<const Wall> walls) {
    std::vector<Vec2> out;
    for (const VirtualAnchor& a : single_bounce_anchors(bs, walls)) {
        if (a.wall && is_visible(mt, a.position, a.wall, walls)) out.push_back(a.position);
    }
    return out;
}

namespace {

void append_unique(std::vector<Vec2>& set, const std::vector<Vec2>& more) {
    for (const Vec2& p : more) {
        if (std::none_of(set.begin(), set.end(), [&](const Vec2& q) { return (p - q).norm() < 1e-9; })) {
            set.push_back(p);
        }
    }
}

}  // namespace

RunRecord simulate_run(const ScenarioConfig& config, std::size_t run, std::uint64_t seed) {
    validate_scenario(config);
    const std::size_t n_mt = config.mobile_terminals.size();
    const std::size_t n_bs = config.base_stations.size();
    const int steps = config.steps;

    std::vector<std::vector<MtState>> tracks;
    for (const auto& mt : config.mobile_terminals) tracks.push_back(generate_trajectory(mt.waypoints, steps, config.dt));

    // Separate streams per measurement type, so that experiments that differ
    // only in toggles see the same BS measurements.
    RandomStream rng_bs = rng_stream(seed, run, "bs-measurements");
    RandomStream rng_coop = rng_stream(seed, run, "coop-measurements");
    RandomStream rng_imu = rng_stream(seed, run, "imu");
    const SensorModel sensor(config.radio, config.model, config.toggles.mimo);

    std::vector<MtState> initial;
    std::vector<std::optional<double>> heading_obs;
    const double heading_noise = std::sqrt(config.model.generation_noise_scale) * deg2rad(config.model.imu_heading_std_deg);
    for (std::size_t i = 0; i < n_mt; ++i) {
        initial.push_back(tracks[i][0]);
        heading_obs.emplace_back(wrap_angle(tracks[i][0].heading + heading_noise * rng_imu.normal()));
    }
    Filter filter(config, initial, heading_obs, rng_stream(seed, run, "filter"));

    RunRecord rec;
    rec.run = run;
    rec.seed = seed;
    rec.toggles = config.toggles;
    rec.steps = steps;

    const OspaParams ospa_params;
    for (int n = 1; n <= steps; ++n) {
        const auto sn = static_cast<std::size_t>(n);
        StepInput input;
        input.bs.resize(n_mt);
        input.imu.resize(n_mt);
        input.coop.assign(n_mt, std::vector<std::vector<CoopMeasurement>>(n_mt));
        for (std::size_t i = 0; i < n_mt; ++i) {
            const MtState& truth = tracks[i][sn];
            for (std::size_t j = 0; j < n_bs; ++j) {
                std::vector<Measurement> z;
                for (const auto& m : generate_bs_measurements(truth, config.base_stations[j], config.walls, sensor, rng_bs)) {
                    z.push_back(m.z);
                }
                input.bs[i].push_back(std::move(z));
            }
            input.imu[i] = generate_imu(tracks[i][sn - 1], truth, config.dt, config.model, rng_imu);
        }
        for (std::size_t i = 0; i < n_mt; ++i) {
            for (std::size_t k = i + 1; k < n_mt; ++k) {
                for (const auto& m : generate_coop_measurements(tracks[i][sn], tracks[k][sn], config.walls, sensor, rng_coop)) {
                    input.coop[i][k].push_back(m.z);
                }
            }
        }

        const StepDiagnostics diag = filter.step(input);
        rec.da_nonconverged += diag.da_nonconverged;
        rec.divergence.push_back(static_cast<int>(std::count(diag.divergence.begin(), diag.divergence.end(), true)));

        std::vector<Vec2> truth_row, estimate_row;
        for (std::size_t i = 0; i < n_mt; ++i) {
            truth_row.push_back(tracks[i][sn].position);
            estimate_row.push_back(filter.estimate(i).position);
        }
        rec.truth.push_back(std::move(truth_row));
        rec.estimate.push_back(std::move(estimate_row));

        double ospa_sum = 0.0, card_sum = 0.0;
        int pairs = 0;
        for (std::size_t g = 0; g < filter.map_count(); ++g) {
            for (std::size_t j = 0; j < n_bs; ++j) {
                std::vector<Vec2> truth_set;
                for (std::size_t i = 0; i < n_mt; ++i) {
                    if (filter.map_of(i) != g) continue;
                    append_unique(truth_set, visible_vas(tracks[i][sn].position, config.base_stations[j].position, config.walls));
                }
                std::vector<Vec2> estimated;
                for (const VaEstimate& va : filter.confirmed(g, j)) {
                    estimated.push_back(va.position);
                    rec.vas.push_back({n, static_cast<int>(j), va.id, va.position, va.existence});
                }
                ospa_sum += ospa(estimated, truth_set, ospa_params);
                card_sum += cardinality_error(estimated.size(), truth_set.size());
                ++pairs;
            }
        }
        rec.ospa.push_back(pairs ? ospa_sum / pairs : 0.0);
        rec.cardinality.push_back(pairs ? card_sum / pairs : 0.0);
    }
    return rec;
}

std::vector<RunRecord> run_experiment(const ScenarioConfig& config, std::size_t runs, std::uint64_t seed,
                                      unsigned threads) {
    validate_scenario(config);
    std::vector<RunRecord> records(runs);
    if (threads == 0) threads = std::max(1U, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(runs, 1)));

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&]() {
        for (std::size_t k = next++; k < runs; k = next++) {
            try {
                records[k] = simulate_run(config, k, seed);
            } catch (...) {
                const std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
    return records;
}

AggregateMetrics aggregate(const std::vector<RunRecord>& records) {
    AggregateMetrics agg;
    if (records.empty()) return agg;
    const auto steps = static_cast<std::size_t>(records.front().steps);
    agg.mospa.assign(steps, 0.0);
    agg.rmse.assign(steps, 0.0);
    agg.cardinality.assign(steps, 0.0);
    std::vector<double> all_errors;
    for (std::size_t n = 0; n < steps; ++n) {
        std::vector<double> errors;
        for (const RunRecord& r : records) {
            agg.mospa[n] += r.ospa[n];
            agg.cardinality[n] += r.cardinality[n];
            for (std::size_t i = 0; i < r.truth[n].size(); ++i) errors.push_back(r.error(static_cast<int>(n), i));
        }
        agg.mospa[n] /= static_cast<double>(records.size());
        agg.cardinality[n] /= static_cast<double>(records.size());
        agg.rmse[n] = rmse(errors);
        all_errors.insert(all_errors.end(), errors.begin(), errors.end());
    }
    agg.cdf = error_cdf(all_errors);
    return agg;
}

}  // namespace mpslam
