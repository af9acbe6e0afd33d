#pragma once

#include <mpslam/angles.hpp>
#include <mpslam/geometry.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mpslam {

struct RadioParams {
    double carrier_frequency = 6e9;   // Hz
    double bandwidth = 500e6;         // Hz
    int subcarriers = 128;
    int bs_antennas = 4;
    int mt_antennas = 4;
    double snr_ref_db = 40.0;         // component SNR at 1 m LOS
    double bounce_loss_db = 3.0;      // per reflection
    double detection_threshold = 2.0; // gamma, normalized amplitude
    double max_distance = 70.0;       // d_max, m

    double wavelength() const { return kSpeedOfLight / carrier_frequency; }
    /// Root-mean-square bandwidth of a flat spectrum of width B: B / sqrt(12).
    double rms_bandwidth() const;
    /// Amplitude of a LOS component at 1 m.
    double reference_amplitude() const;

    bool operator==(const RadioParams&) const = default;
};

/// One column of the experiment table.
struct ExperimentToggles {
    bool mimo = true;
    bool coop = true;
    bool imu = true;
    bool pva_fusion = true;

    /// E1..E7; throws ValidationError for anything else.
    static ExperimentToggles named(std::string_view name);

    bool operator==(const ExperimentToggles&) const = default;
};

enum class DetectionMode { constant, amplitude };

struct ModelParams {
    DetectionMode detection_mode = DetectionMode::constant;
    double p_d = 0.98;
    double mu_fa = 5.0;
    double mu_n = 0.01;
    double p_s = 0.999;
    double p_cf = 0.5;
    double p_pr = 1e-3;
    double sigma_w = 1e-3;            // m/s^2, driving acceleration noise
    double sigma_a = 1e-3;            // m, VA regularization noise
    double amplitude_walk = 0.05;     // relative std of the PVA amplitude random walk
    double heading_diffusion_deg = 2.0;   // per-step heading diffusion without IMU
    double imu_heading_std_deg = 10.0;    // heading observation std
    double imu_accel_std = 1e-3;          // m/s^2
    double imu_gyro_std_deg = 0.05;       // deg/s
    double birth_half_width = 45.0;       // m, new-PVA prior square half width
    std::size_t particles = 10000;
    double generation_noise_scale = 1.0;  // variance multiplier for generated measurements
    double da_damping = 0.5;
    double da_tolerance = 1e-6;
    int da_max_iterations = 200;

    bool operator==(const ModelParams&) const = default;
};

struct BaseStationConfig {
    Vec2 position = Vec2::Zero();
    double orientation_deg = 0.0;

    double orientation() const { return deg2rad(orientation_deg); }
    bool operator==(const BaseStationConfig&) const = default;
};

struct Waypoint {
    Vec2 position = Vec2::Zero();
    double time = 0.0;  // s

    bool operator==(const Waypoint&) const = default;
};

struct MobileTerminalConfig {
    std::vector<Waypoint> waypoints;

    bool operator==(const MobileTerminalConfig&) const = default;
};

struct ScenarioConfig {
    std::vector<Wall> walls;
    std::vector<BaseStationConfig> base_stations;
    std::vector<MobileTerminalConfig> mobile_terminals;
    int steps = 400;
    double dt = 1.0;
    Vec2 map_center = Vec2::Zero();
    RadioParams radio;
    ModelParams model;
    ExperimentToggles toggles;
    std::uint64_t seed = 1;

    bool operator==(const ScenarioConfig&) const = default;
};

/// Ground-truth (or estimated) kinematic state of an MT.
struct MtState {
    Vec2 position = Vec2::Zero();
    Vec2 velocity = Vec2::Zero();
    double heading = 0.0;  // rad
};

/// Parses and validates a scenario document (JSON). Missing optional fields
/// take the default values above. Throws SchemaError or ValidationError.
ScenarioConfig load_scenario(std::string_view text);
ScenarioConfig load_scenario_file(const std::filesystem::path& path);

/// Writes every field, so that load_scenario(serialize_scenario(c)) == c.
std::string serialize_scenario(const ScenarioConfig& config);

/// Checks the invariants of an in-memory config (same checks as load_scenario).
void validate_scenario(const ScenarioConfig& config);

/// Samples the waypoint track at t = 0, dT, ..., steps*dT.
///
/// The velocity at step n is the mean waypoint velocity over the preceding
/// interval (the initial segment's velocity at n = 0) and positions are
/// integrated with the trapezoid rule, so consecutive states are exactly
/// consistent with constant acceleration over each interval. Heading follows
/// the velocity and is held while the speed is below 1e-9 m/s.
std::vector<MtState> generate_trajectory(std::span<const Waypoint> waypoints, int steps, double dt);

}  // namespace mpslam
