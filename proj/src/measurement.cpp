#include <mpslam/measurement.hpp>
#include <mpslam/errors.hpp>

#include <boost/math/distributions/non_central_chi_squared.hpp>
#include <boost/math/special_functions/bessel.hpp>

#include <algorithm>
#include <cmath>

namespace mpslam {

namespace {

constexpr double kInvSqrtTwoPi = 0.3989422804014327;

// I0(x) * exp(-x) for x >= 0.
double bessel_i0_scaled(double x) {
    if (x < 600.0) return boost::math::cyl_bessel_i(0, x) * std::exp(-x);
    const double inv = 1.0 / x;
    return (1.0 + inv * (0.125 + inv * (0.0703125 + inv * 0.0732421875))) / std::sqrt(kTwoPi * x);
}

double geometric_density(const Measurement& z, const MtState& mt, const Vec2& va, double u, const SensorModel& model,
                         double bs_orientation) {
    const double distance = (mt.position - va).norm();
    const double aoa = wrap_angle(bearing(mt.position, va) - mt.heading);
    double density = gaussian_pdf(z.distance, distance, model.sigma_distance(u)) *
                     gaussian_pdf(wrap_angle(z.aoa - aoa), 0.0, model.sigma_aoa(u, aoa));
    if (model.uses_aod() && z.aod) {
        const double aod = bearing(va, mt.position);
        density *= gaussian_pdf(wrap_angle(*z.aod - aod), 0.0, model.sigma_aod(u, wrap_angle(aod - bs_orientation)));
    }
    return density;
}

}  // namespace

double gaussian_pdf(double x, double mean, double sigma) {
    const double r = (x - mean) / sigma;
    return kInvSqrtTwoPi / sigma * std::exp(-0.5 * r * r);
}

double sigma_d(double u, double beta_bw) {
    if (!(u > 0.0)) throw DomainError("sigma_d requires a positive amplitude");
    if (!(beta_bw > 0.0)) throw DomainError("sigma_d requires a positive bandwidth");
    return std::sqrt(kSpeedOfLight * kSpeedOfLight / (8.0 * kPi * kPi * beta_bw * beta_bw * u * u));
}

double aperture_squared(double phi, const ArrayGeometry& array, double wavelength) {
    if (array.size() == 0) return 0.0;
    std::vector<double> projection;
    projection.reserve(array.size());
    double mean = 0.0;
    for (const ArrayElement& e : array.elements) {
        projection.push_back(e.distance / wavelength * std::sin(phi - e.angle));
        mean += projection.back();
    }
    mean /= static_cast<double>(array.size());
    double sum = 0.0;
    for (double p : projection) sum += (p - mean) * (p - mean);
    return sum;
}

double sigma_angle(double u, double phi, const ArrayGeometry& array, double wavelength) {
    if (!(u > 0.0)) throw DomainError("sigma_angle requires a positive amplitude");
    const double d2 = aperture_squared(phi, array, wavelength);
    if (d2 < 1e-12) throw DegenerateAperture("array has no aperture orthogonal to the requested angle");
    return std::sqrt(1.0 / (8.0 * kPi * kPi * u * u * d2));
}

double sigma_u(double u, int subcarriers, int antennas) {
    return std::sqrt(0.5 + u * u / (4.0 * subcarriers * antennas));
}

double amplitude_truth(double d, int bounces, const RadioParams& radio) {
    if (!(d > 0.0)) throw DomainError("amplitude_truth requires a positive distance");
    const double snr_db = radio.snr_ref_db - 20.0 * std::log10(d) - radio.bounce_loss_db * bounces;
    return std::sqrt(std::pow(10.0, snr_db / 10.0));
}

double marcum_q1(double a, double b) {
    if (b <= 0.0) return 1.0;
    if (a <= 0.0) return std::exp(-0.5 * b * b);
    // Far above threshold the complement is below double resolution.
    if (a - b > 9.0) return 1.0;
    boost::math::non_central_chi_squared_distribution<double> dist(2.0, a * a);
    return boost::math::cdf(boost::math::complement(dist, b * b));
}

double detection_prob(double u, double gamma, double sigma) { return marcum_q1(u / sigma, gamma / sigma); }

double log_rician_pdf(double z, double u, double sigma) {
    if (z <= 0.0) return -std::numeric_limits<double>::infinity();
    const double s2 = sigma * sigma;
    const double x = z * u / s2;
    return std::log(z / s2) - (z - u) * (z - u) / (2.0 * s2) + std::log(bessel_i0_scaled(x));
}

double rician_pdf(double z, double u, double sigma) { return std::exp(log_rician_pdf(z, u, sigma)); }

double truncated_rician_pdf(double z, double u, double sigma, double gamma) {
    if (z < gamma) return 0.0;
    const double mass = detection_prob(u, gamma, sigma);
    if (mass <= 0.0) return 0.0;
    return rician_pdf(z, u, sigma) / mass;
}

double truncated_rayleigh_pdf(double z, double gamma) {
    if (z < gamma) return 0.0;
    return z * std::exp(-0.5 * (z * z - gamma * gamma));
}

double sample_truncated_rician(double u, double sigma, double gamma, RandomStream& rng) {
    for (int attempt = 0; attempt < 100000; ++attempt) {
        const double re = u + sigma * rng.normal();
        const double im = sigma * rng.normal();
        const double z = std::hypot(re, im);
        if (z >= gamma) return z;
    }
    return gamma;
}

double sample_truncated_rayleigh(double gamma, RandomStream& rng) {
    const double v = 1.0 - rng.uniform();  // (0, 1]
    return std::sqrt(gamma * gamma - 2.0 * std::log(v));
}

SensorModel::SensorModel(const RadioParams& radio, const ModelParams& model, bool mimo)
    : radio_(radio),
      model_(model),
      mimo_(mimo),
      mt_array_(ArrayGeometry::uniform(static_cast<std::size_t>(radio.mt_antennas), radio.wavelength() / 2.0)),
      bs_array_(ArrayGeometry::uniform(mimo ? static_cast<std::size_t>(radio.bs_antennas) : 1U,
                                       radio.wavelength() / 2.0)),
      beta_bw_(radio.rms_bandwidth()),
      mt_moments_(moments(mt_array_, radio.wavelength())),
      bs_moments_(moments(bs_array_, radio.wavelength())) {}

SensorModel::Moments SensorModel::moments(const ArrayGeometry& array, double wavelength) {
    Moments m;
    if (array.size() == 0) return m;
    double mx = 0.0, my = 0.0;
    for (const ArrayElement& e : array.elements) {
        mx += e.distance / wavelength * std::cos(e.angle);
        my += e.distance / wavelength * std::sin(e.angle);
    }
    const double n = static_cast<double>(array.size());
    mx /= n;
    my /= n;
    for (const ArrayElement& e : array.elements) {
        const double x = e.distance / wavelength * std::cos(e.angle) - mx;
        const double y = e.distance / wavelength * std::sin(e.angle) - my;
        m.xx += x * x;
        m.yy += y * y;
        m.xy += x * y;
    }
    return m;
}

double SensorModel::aperture(const Moments& m, double phi) {
    // projection = x sin(phi) - y cos(phi)
    const double s = std::sin(phi);
    const double c = std::cos(phi);
    return s * s * m.xx + c * c * m.yy - 2.0 * s * c * m.xy;
}

double SensorModel::sigma_distance(double u) const { return sigma_d(u, beta_bw_); }

double SensorModel::sigma_aoa(double u, double phi) const {
    if (!(u > 0.0)) throw DomainError("sigma_angle requires a positive amplitude");
    const double d2 = aperture(mt_moments_, phi);
    if (d2 < 1e-12) throw DegenerateAperture("MT array has no aperture orthogonal to the AoA");
    return std::sqrt(1.0 / (8.0 * kPi * kPi * u * u * d2));
}

double SensorModel::sigma_aod(double u, double phi) const {
    if (!(u > 0.0)) throw DomainError("sigma_angle requires a positive amplitude");
    const double d2 = aperture(bs_moments_, phi);
    if (d2 < 1e-12) throw DegenerateAperture("BS array has no aperture orthogonal to the AoD");
    return std::sqrt(1.0 / (8.0 * kPi * kPi * u * u * d2));
}

int SensorModel::antenna_product() const {
    return static_cast<int>(bs_array_.size()) * static_cast<int>(mt_array_.size());
}

double SensorModel::sigma_amplitude(double u) const { return sigma_u(u, radio_.subcarriers, antenna_product()); }

double SensorModel::amplitude_mass(double u) const { return detection_prob(u, gamma(), sigma_amplitude(u)); }

double SensorModel::detection_probability(double u) const {
    return model_.detection_mode == DetectionMode::constant ? model_.p_d : amplitude_mass(u);
}

double SensorModel::amplitude_density(double z_u, double u) const {
    return truncated_rician_pdf(z_u, u, sigma_amplitude(u), gamma());
}

double lhf_bs(const Measurement& z, const MtState& mt, const Vec2& va, double u, const SensorModel& model,
              double bs_orientation) {
    if (z.amplitude < model.gamma()) return 0.0;
    return geometric_density(z, mt, va, u, model, bs_orientation) *
           rician_pdf(z.amplitude, u, model.sigma_amplitude(u));
}

double detection_likelihood(const Measurement& z, const MtState& mt, const Vec2& va, double u,
                            const SensorModel& model, double bs_orientation) {
    if (model.model().detection_mode == DetectionMode::amplitude) {
        return lhf_bs(z, mt, va, u, model, bs_orientation);
    }
    return model.detection_probability(u) * geometric_density(z, mt, va, u, model, bs_orientation) *
           model.amplitude_density(z.amplitude, u);
}

double lhf_fa(const Measurement& z, const SensorModel& model) {
    if (z.distance < 0.0 || z.distance > model.max_distance()) return 0.0;
    double density = 1.0 / model.max_distance() / kTwoPi;
    if (model.uses_aod() && z.aod) density /= kTwoPi;
    return density * truncated_rayleigh_pdf(z.amplitude, model.gamma());
}

double lhf_coop(const CoopMeasurement& z, const Vec2& p_i, const Vec2& p_j, double u, const SensorModel& model) {
    return gaussian_pdf(z.distance, (p_i - p_j).norm(), model.sigma_distance(u));
}

double lhf_imu(const ImuMeasurement& z, double heading, double heading_std) {
    return gaussian_pdf(wrap_angle(z.heading - heading), 0.0, heading_std);
}

std::vector<LabeledMeasurement> generate_bs_measurements(const MtState& truth, const BaseStationConfig& bs,
                                                         std::span<const Wall> walls, const SensorModel& model,
                                                         RandomStream& rng) {
    const double noise = std::sqrt(model.model().generation_noise_scale);
    std::vector<LabeledMeasurement> out;
    const auto anchors = single_bounce_anchors(bs.position, walls);
    for (std::size_t l = 0; l < anchors.size(); ++l) {
        const VirtualAnchor& anchor = anchors[l];
        if (!is_visible(truth.position, anchor.position, anchor.wall, walls)) continue;
        const PathParams path = path_params(truth.position, truth.heading, bs.position, anchor.position, !anchor.wall);
        const double u = amplitude_truth(path.distance, path.bounce_count, model.radio());
        if (!rng.bernoulli(model.detection_probability(u))) continue;

        LabeledMeasurement m;
        m.origin = static_cast<int>(l);
        m.z.distance = path.distance + noise * model.sigma_distance(u) * rng.normal();
        m.z.aoa = wrap_angle(path.aoa + noise * model.sigma_aoa(u, path.aoa) * rng.normal());
        if (model.uses_aod()) {
            m.z.aod = wrap_angle(path.aod +
                                 noise * model.sigma_aod(u, wrap_angle(path.aod - bs.orientation())) * rng.normal());
        }
        m.z.amplitude = sample_truncated_rician(u, noise * model.sigma_amplitude(u), model.gamma(), rng);
        if (m.z.distance < 0.0 || m.z.distance > model.max_distance()) continue;
        out.push_back(m);
    }

    const int false_alarms = rng.poisson(model.model().mu_fa);
    for (int f = 0; f < false_alarms; ++f) {
        LabeledMeasurement m;
        m.z.distance = rng.uniform(0.0, model.max_distance());
        m.z.aoa = rng.uniform(-kPi, kPi);
        if (model.uses_aod()) m.z.aod = rng.uniform(-kPi, kPi);
        m.z.amplitude = sample_truncated_rayleigh(model.gamma(), rng);
        out.push_back(m);
    }
    std::shuffle(out.begin(), out.end(), rng.engine());
    return out;
}

std::vector<LabeledCoopMeasurement> generate_coop_measurements(const MtState& truth_i, const MtState& truth_j,
                                                               std::span<const Wall> walls, const SensorModel& model,
                                                               RandomStream& rng) {
    const double noise = std::sqrt(model.model().generation_noise_scale);
    std::vector<LabeledCoopMeasurement> out;
    const double d = (truth_i.position - truth_j.position).norm();
    if (d > 0.0 && is_visible(truth_i.position, truth_j.position, std::nullopt, walls)) {
        const double u = amplitude_truth(d, 0, model.radio());
        if (rng.bernoulli(model.detection_probability(u))) {
            LabeledCoopMeasurement m;
            m.los = true;
            m.z.distance = d + noise * model.sigma_distance(u) * rng.normal();
            m.z.amplitude = sample_truncated_rician(u, noise * model.sigma_amplitude(u), model.gamma(), rng);
            if (m.z.distance >= 0.0 && m.z.distance <= model.max_distance()) out.push_back(m);
        }
    }
    const int false_alarms = rng.poisson(model.model().mu_fa);
    for (int f = 0; f < false_alarms; ++f) {
        LabeledCoopMeasurement m;
        m.z.distance = rng.uniform(0.0, model.max_distance());
        m.z.amplitude = sample_truncated_rayleigh(model.gamma(), rng);
        out.push_back(m);
    }
    std::shuffle(out.begin(), out.end(), rng.engine());
    return out;
}

ImuMeasurement generate_imu(const MtState& previous, const MtState& current, double dt, const ModelParams& model,
                            RandomStream& rng) {
    const double noise = std::sqrt(model.generation_noise_scale);
    ImuMeasurement z;
    const Vec2 accel_nav = (current.velocity - previous.velocity) / dt;
    z.acceleration = rotate(accel_nav, -current.heading);
    z.acceleration.x() += noise * model.imu_accel_std * rng.normal();
    z.acceleration.y() += noise * model.imu_accel_std * rng.normal();
    z.turn_rate = wrap_angle(current.heading - previous.heading) / dt +
                  noise * deg2rad(model.imu_gyro_std_deg) * rng.normal();
    z.heading = wrap_angle(current.heading + noise * deg2rad(model.imu_heading_std_deg) * rng.normal());
    return z;
}

}  // namespace mpslam
