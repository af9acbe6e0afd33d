#pragma once

// Measurement models: Fisher-information noise levels, likelihood functions of
// BS-MT, MT-MT and IMU measurements, false alarms, and synthetic generation.

#include <mpslam/geometry.hpp>
#include <mpslam/random.hpp>
#include <mpslam/scenario.hpp>

#include <optional>
#include <vector>

namespace mpslam {

/// One multipath-component estimate of a BS-MT link. `aod` is absent on
/// single-antenna (SIMO) base stations.
struct Measurement {
    double distance = 0.0;         // m, [0, d_max]
    double aoa = 0.0;              // rad, MT frame
    std::optional<double> aod;     // rad, global frame
    double amplitude = 0.0;        // normalized, >= gamma
};

/// Measurement plus its generating anchor: index into
/// single_bounce_anchors(bs, walls), or -1 for a false alarm. Evaluation only.
struct LabeledMeasurement {
    Measurement z;
    int origin = -1;
};

struct CoopMeasurement {
    double distance = 0.0;
    double amplitude = 0.0;
};

struct LabeledCoopMeasurement {
    CoopMeasurement z;
    bool los = false;
};

struct ImuMeasurement {
    Vec2 acceleration = Vec2::Zero();  // m/s^2, body frame
    double turn_rate = 0.0;            // rad/s
    double heading = 0.0;              // rad, magnetometer-derived
};

double gaussian_pdf(double x, double mean, double sigma);

/// Distance std from the Fisher information of a delay estimate.
double sigma_d(double u, double beta_bw);

/// Squared aperture (in wavelengths) of `array` orthogonal to direction `phi`,
/// referenced to the centroid of the element projections.
double aperture_squared(double phi, const ArrayGeometry& array, double wavelength);

/// Angle std from the Fisher information of an array. Throws DomainError for
/// u <= 0 and DegenerateAperture when the aperture vanishes.
double sigma_angle(double u, double phi, const ArrayGeometry& array, double wavelength);

/// Scale of the normalized-amplitude estimate; u >= 0, M*H >= 1.
double sigma_u(double u, int subcarriers, int antennas);

/// Normalized amplitude of a path of length d with `bounces` reflections.
double amplitude_truth(double d, int bounces, const RadioParams& radio);

/// Marcum Q-function of order one.
double marcum_q1(double a, double b);

/// Probability that a Rician amplitude (noncentrality u, scale sigma) exceeds gamma.
double detection_prob(double u, double gamma, double sigma);

double rician_pdf(double z, double u, double sigma);
double log_rician_pdf(double z, double u, double sigma);

/// Rician density restricted to [gamma, inf) and renormalized to integrate to 1.
double truncated_rician_pdf(double z, double u, double sigma, double gamma);

/// Unit-scale Rayleigh density restricted to [gamma, inf), integrating to 1.
double truncated_rayleigh_pdf(double z, double gamma);

/// Draws from the Rician distribution conditioned on z >= gamma.
double sample_truncated_rician(double u, double sigma, double gamma, RandomStream& rng);

/// Draws from the unit-scale Rayleigh distribution conditioned on z >= gamma.
double sample_truncated_rayleigh(double gamma, RandomStream& rng);

/// Noise and detection model of one experiment configuration. Holds the array
/// geometries and precomputed aperture moments.
class SensorModel {
public:
    SensorModel(const RadioParams& radio, const ModelParams& model, bool mimo);

    const RadioParams& radio() const { return radio_; }
    const ModelParams& model() const { return model_; }
    bool uses_aod() const { return mimo_; }
    const ArrayGeometry& mt_array() const { return mt_array_; }
    const ArrayGeometry& bs_array() const { return bs_array_; }
    double beta_bw() const { return beta_bw_; }
    double gamma() const { return radio_.detection_threshold; }
    double max_distance() const { return radio_.max_distance; }

    double sigma_distance(double u) const;
    /// `phi` is the AoA in the MT frame.
    double sigma_aoa(double u, double phi) const;
    /// `phi` is the AoD relative to the BS array orientation.
    double sigma_aod(double u, double phi) const;
    double sigma_amplitude(double u) const;

    /// Q1(u/sigma_u, gamma/sigma_u): mass of the Rician amplitude above gamma.
    double amplitude_mass(double u) const;
    /// Constant p_d or the amplitude-driven Marcum-Q value, per the model.
    double detection_probability(double u) const;

    /// Density of the amplitude measurement given detection (truncated Rician).
    double amplitude_density(double z_u, double u) const;

    int antenna_product() const;

private:
    RadioParams radio_;
    ModelParams model_;
    bool mimo_;
    ArrayGeometry mt_array_;
    ArrayGeometry bs_array_;
    double beta_bw_;
    // Centred second moments of the element positions in wavelengths.
    struct Moments {
        double xx = 0.0, yy = 0.0, xy = 0.0;
    };
    Moments mt_moments_;
    Moments bs_moments_;
    static Moments moments(const ArrayGeometry& array, double wavelength);
    static double aperture(const Moments& m, double phi);
};

/// BS-MT likelihood: Gaussian distance, AoA and AoD (wrapped residuals) times
/// the Rician amplitude density on [gamma, inf). The amplitude factor carries
/// the mass Q1 of the Rician above gamma, i.e. it integrates to the
/// amplitude-driven detection probability.
double lhf_bs(const Measurement& z, const MtState& mt, const Vec2& va, double u, const SensorModel& model,
              double bs_orientation);

/// p_d(u) times the normalized measurement density (the numerator of the
/// legacy pseudo-likelihood). Equals lhf_bs in amplitude-driven mode.
double detection_likelihood(const Measurement& z, const MtState& mt, const Vec2& va, double u,
                            const SensorModel& model, double bs_orientation);

/// False-alarm density: uniform distance and angles, truncated Rayleigh amplitude.
double lhf_fa(const Measurement& z, const SensorModel& model);

/// MT-MT distance likelihood; `u` is the link amplitude.
double lhf_coop(const CoopMeasurement& z, const Vec2& p_i, const Vec2& p_j, double u, const SensorModel& model);

/// Heading observation density about `heading`.
double lhf_imu(const ImuMeasurement& z, double heading, double heading_std);

/// Measurements of one BS at one MT for one time step, randomly ordered.
std::vector<LabeledMeasurement> generate_bs_measurements(const MtState& truth, const BaseStationConfig& bs,
                                                         std::span<const Wall> walls, const SensorModel& model,
                                                         RandomStream& rng);

/// Distance measurements between two MTs for one time step.
std::vector<LabeledCoopMeasurement> generate_coop_measurements(const MtState& truth_i, const MtState& truth_j,
                                                               std::span<const Wall> walls, const SensorModel& model,
                                                               RandomStream& rng);

/// Accelerometer, gyro and heading readings between two consecutive states.
ImuMeasurement generate_imu(const MtState& previous, const MtState& current, double dt, const ModelParams& model,
                            RandomStream& rng);

}  // namespace mpslam
