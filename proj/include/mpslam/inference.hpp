#pragma once

// Particle-based sum-product filter for cooperative multipath SLAM: MT and PVA
// beliefs, prediction, per-(MT, BS) measurement updates with data association,
// new-PVA birth, map fusion, cooperative updates and track management.

#include <mpslam/association.hpp>
#include <mpslam/measurement.hpp>
#include <mpslam/random.hpp>
#include <mpslam/scenario.hpp>

#include <Eigen/Core>

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace mpslam {

/// Weighted particle representation of one MT state.
struct MtBelief {
    std::vector<Vec2> position;
    std::vector<Vec2> velocity;
    std::vector<double> heading;
    std::vector<double> weight;

    std::size_t size() const { return weight.size(); }
    void resize(std::size_t n);
};

/// Identity of a PVA: the BS it belongs to and where it was born. The BS
/// anchor has birth_step = -1.
struct PvaKey {
    int bs = 0;
    int birth_step = -1;
    int birth_mt = -1;
    int birth_measurement = -1;

    auto operator<=>(const PvaKey&) const = default;
};

/// Weighted particles over (VA position, amplitude) plus the existence
/// probability. `anchor` marks the known BS position (LOS path). The amplitude
/// is referenced to 1 m path length, so the normalized amplitude seen by an MT
/// at distance d is amplitude / d; MTs sharing a map see consistent values.
struct PvaBelief {
    PvaKey key;
    std::uint64_t id = 0;
    bool anchor = false;
    double existence = 0.0;
    std::vector<Vec2> position;
    std::vector<double> amplitude;
    std::vector<double> weight;

    std::size_t size() const { return weight.size(); }
};

/// Sensor model plus a lookup table of the Rician mass above the detection
/// threshold, which the filter evaluates for every particle.
class LinkModel {
public:
    explicit LinkModel(const SensorModel& sensor);

    const SensorModel& sensor() const { return sensor_; }

    /// Tabulated Q1(u / sigma_u, gamma / sigma_u).
    double amplitude_mass(double u) const;
    /// p_d(u) under the configured detection mode.
    double detection_probability(double u) const;
    /// p_d(u) times the amplitude density given detection.
    double amplitude_factor(double z_u, double u) const;

    /// p_d(u) f(z | mt, va, u): equal to detection_likelihood() up to the
    /// table interpolation. Returns 0 when the distance residual exceeds
    /// `gate` standard deviations.
    double likelihood(const Measurement& z, const Vec2& mt, double heading, const Vec2& va, double u,
                      double bs_orientation, double gate = 8.0) const;

private:
    const SensorModel& sensor_;
    double step_ = 0.0;
    std::vector<double> mass_;
};

/// Draws `count` indices from the MT belief (systematic sampling of the
/// weights) used to pair MT particles with PVA or birth particles.
std::vector<std::size_t> pair_indices(const MtBelief& mt, std::size_t count, RandomStream& rng);

/// Systematic resampling: `weights.size()` indices drawn proportionally to the weights.
std::vector<std::size_t> systematic_resample(std::span<const double> weights, RandomStream& rng);

double effective_sample_size(std::span<const double> weights);

/// Normalizes in place. Returns false (and resets to uniform) when the sum is
/// zero or not finite.
bool normalize_weights(std::vector<double>& weights);

/// Uniform +-0.1 m position and +-0.01 m/s velocity about `truth`; heading
/// from a heading observation when given (Gaussian with `heading_std`), else
/// uniform +-10 degrees about the true heading.
MtBelief initialize_mt(const MtState& truth, std::size_t particles, std::optional<double> heading_observation,
                       double heading_std, RandomStream& rng);

/// Known BS position as a legacy PVA with existence 1. Amplitude particles
/// are drawn about the LOS amplitude at 1 m.
PvaBelief make_anchor(int bs, const Vec2& position, std::size_t particles, const RadioParams& radio,
                      RandomStream& rng);

/// Normalized amplitude at distance d of a path with 1 m reference amplitude `a`.
double link_amplitude(double a, double d);

/// Constant-velocity prediction driven by the IMU control (body-frame
/// acceleration rotated by the propagated heading, gyro rate for the heading)
/// when `control` is given, else by white acceleration and heading diffusion.
void predict_mt(MtBelief& belief, const ImuMeasurement* control, double dt, const ModelParams& model,
                RandomStream& rng);

/// Multiplies the weights by the heading-observation likelihood. Returns false
/// when every weight underflowed (weights are then uniform).
bool imu_update(MtBelief& belief, const ImuMeasurement& z, double heading_std);

/// Survival, position regularization noise and amplitude random walk.
void predict_pva(PvaBelief& belief, double p_s, double amplitude_walk, double sigma_a, RandomStream& rng);

/// Per-(k, m) pseudo-likelihood terms of the legacy PVAs of one (MT, BS) link.
struct LegacyEvaluation {
    Eigen::MatrixXd evidence;   // K x M, r E[p_d f(z_m | x, y)] (column-scaled)
    Eigen::VectorXd missed;     // K, 1 - r + r E[1 - p_d]
    /// Per PVA particle: 1 - p_d(u_s).
    std::vector<std::vector<double>> missed_terms;
    /// Per (k, m): p_d f(z_m | x_pair(s), y_s) for every PVA particle s, or
    /// empty when no particle passed the gate.
    std::vector<std::vector<std::vector<double>>> likelihood;
};

/// Evaluates every legacy PVA against every measurement with index-matched
/// MT/PVA particle pairs. `pairing[s]` is the MT particle paired with PVA particle s.
LegacyEvaluation evaluate_legacy(std::span<const PvaBelief> pvas, const MtBelief& mt,
                                 std::span<const std::size_t> pairing, std::span<const Measurement> z,
                                 const LinkModel& link, double bs_orientation);

/// Birth candidates for the measurements of one (MT, BS) link.
struct NewEvaluation {
    /// Column-scaled xi: mu_fa f_fa(z_m) + mu_n E[f_n f(z_m | x, y)].
    Eigen::VectorXd unassigned;
    Eigen::VectorXd false_alarm;   // mu_fa f_fa(z_m)
    Eigen::VectorXd new_target;    // mu_n E[f_n f(z_m | x, y)]
    std::vector<std::vector<Vec2>> position;    // per measurement, importance samples
    std::vector<std::vector<double>> amplitude;
    std::vector<std::vector<double>> weight;    // normalized importance weights

    /// xi_m = 1 + new / fa in the uncolumn-scaled form (infinite when mu_fa f_fa = 0).
    double xi(std::size_t m) const;
};

/// Importance sampling of new-VA candidates by inverting each measurement
/// through the paired MT particles: (distance, AoD) about the BS when AoD is
/// available, else (distance, AoA + heading) about the MT. The prior is
/// uniform on the square of half width `half_width` around `center` and
/// uniform in amplitude on [0, reference amplitude].
NewEvaluation evaluate_new(std::span<const Measurement> z, const MtBelief& mt, std::span<const std::size_t> pairing,
                           const LinkModel& link, double bs_orientation, const Vec2& center, double half_width,
                           RandomStream& rng);

/// Result of the legacy-PVA message to one MT.
struct MtMessage {
    std::vector<double> log_weight;  // per MT particle
    int confirmed = 0;               // confirmed legacy PVAs considered
    int gated = 0;                   // of which at least one measurement is within the gate
};

/// Log of the product over legacy PVAs of
///   (1 - r) + r (E[1 - p_d] + sum_m nu_{m->k} p_d f~(z_m | x)),
/// where f~ uses a moment-matched Gaussian of the PVA position belief.
/// `nu` is the K x M measurement-to-target message matrix of the association.
/// Pairs (k, m) that no paired particle of `evaluation` explained are skipped.
MtMessage legacy_message(const MtBelief& mt, std::span<const PvaBelief> pvas, const LegacyEvaluation& evaluation,
                         const Eigen::MatrixXd& nu, std::span<const Measurement> z, const LinkModel& link,
                         double bs_orientation, double p_cf);

/// Applies the message, renormalizes and resamples when ESS < R/2. Returns
/// false when the weights degenerated and were reset to uniform.
bool update_mt_with_legacy(MtBelief& mt, const MtMessage& message, RandomStream& rng);

/// Bernoulli update of legacy PVA k from the association messages; resamples
/// when ESS < R/2.
void update_pva(PvaBelief& belief, std::size_t k, const LegacyEvaluation& evaluation, const Eigen::MatrixXd& nu,
                RandomStream& rng);

/// One new PVA per measurement with existence p(abar_m = 0) (xi - 1) / xi.
std::vector<PvaBelief> birth_new_pvas(const NewEvaluation& evaluation, const AssociationMarginals& marginals,
                                      int bs, int step, int mt, std::uint64_t& next_id, RandomStream& rng);

/// Appends new PVAs to a legacy list.
void promote_and_fuse(std::vector<PvaBelief>& legacy, std::vector<PvaBelief>&& births);

/// Cooperative update of a pair of MT beliefs, both computed from the
/// pre-update beliefs. `amplitude` is the link amplitude used for the noise
/// level and detection probability.
void coop_update(MtBelief& a, MtBelief& b, std::span<const CoopMeasurement> z, double amplitude,
                 const LinkModel& link, RandomStream& rng);

/// Point estimate of a confirmed PVA.
struct VaEstimate {
    std::uint64_t id = 0;
    int bs = 0;
    Vec2 position = Vec2::Zero();
    double existence = 0.0;
};

/// Removes non-anchor PVAs with r < p_pr and reports non-anchor PVAs with r > p_cf.
std::vector<VaEstimate> confirm_prune(std::vector<PvaBelief>& pvas, double p_cf, double p_pr);

MtState mmse(const MtBelief& belief);
Vec2 mmse(const PvaBelief& belief);

/// Measurements of every link at one time step.
struct StepInput {
    std::vector<std::vector<std::vector<Measurement>>> bs;      // [mt][bs]
    std::vector<std::optional<ImuMeasurement>> imu;             // [mt]
    std::vector<std::vector<std::vector<CoopMeasurement>>> coop;  // [i][j], used for i < j
};

struct StepDiagnostics {
    std::vector<bool> divergence;  // per MT
    int da_nonconverged = 0;
};

/// Owns the full filter state and executes the per-step schedule.
class Filter {
public:
    /// `heading_observations` holds an optional initial heading observation per MT.
    Filter(const ScenarioConfig& config, std::span<const MtState> initial_truth,
           std::span<const std::optional<double>> heading_observations, RandomStream rng);
    Filter(const Filter&) = delete;
    Filter& operator=(const Filter&) = delete;

    StepDiagnostics step(const StepInput& input);

    int step_count() const { return step_; }
    std::size_t mt_count() const { return mts_.size(); }
    std::size_t map_count() const { return maps_.size(); }
    std::size_t bs_count() const { return config_.base_stations.size(); }
    /// Index of the map used by MT i.
    std::size_t map_of(std::size_t mt) const { return config_.toggles.pva_fusion ? 0 : mt; }

    const MtBelief& mt(std::size_t i) const { return mts_[i]; }
    const std::vector<PvaBelief>& pvas(std::size_t map, std::size_t bs) const { return maps_[map][bs]; }
    /// Confirmed VAs of (map, bs) after the last step.
    const std::vector<VaEstimate>& confirmed(std::size_t map, std::size_t bs) const { return confirmed_[map][bs]; }
    MtState estimate(std::size_t i) const { return mmse(mts_[i]); }

private:
    ScenarioConfig config_;
    SensorModel sensor_;
    LinkModel link_;
    RandomStream rng_;
    int step_ = 0;
    std::uint64_t next_id_ = 0;
    std::vector<MtBelief> mts_;
    std::vector<std::vector<std::vector<PvaBelief>>> maps_;          // [map][bs]
    std::vector<std::vector<std::vector<VaEstimate>>> confirmed_;    // [map][bs]
};

}  // namespace mpslam
