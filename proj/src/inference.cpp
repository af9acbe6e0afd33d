#include <mpslam/inference.hpp>
#include <mpslam/errors.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace mpslam {

namespace {

constexpr double kInvSqrtTwoPi = 0.3989422804014327;
constexpr double kMinDistance = 0.1;
// Upper bound for association messages; an infinite message (a measurement
// that only one PVA can explain) is represented by this value.
constexpr double kMessageCap = 1e200;

double capped(double v) { return std::isfinite(v) ? std::min(v, kMessageCap) : (v > 0.0 ? kMessageCap : 0.0); }

template <typename T>
void apply_indices(std::vector<T>& values, std::span<const std::size_t> indices) {
    std::vector<T> out;
    out.reserve(indices.size());
    for (std::size_t i : indices) out.push_back(values[i]);
    values = std::move(out);
}

void resample_mt(MtBelief& mt, RandomStream& rng) {
    const auto idx = systematic_resample(mt.weight, rng);
    apply_indices(mt.position, idx);
    apply_indices(mt.velocity, idx);
    apply_indices(mt.heading, idx);
    std::fill(mt.weight.begin(), mt.weight.end(), 1.0 / static_cast<double>(mt.size()));
}

void resample_pva(PvaBelief& pva, RandomStream& rng) {
    const auto idx = systematic_resample(pva.weight, rng);
    apply_indices(pva.position, idx);
    apply_indices(pva.amplitude, idx);
    std::fill(pva.weight.begin(), pva.weight.end(), 1.0 / static_cast<double>(pva.size()));
}

struct GaussianSummary {
    Vec2 mean = Vec2::Zero();
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    double amplitude = 0.0;
};

GaussianSummary summarize(const PvaBelief& pva) {
    GaussianSummary g;
    for (std::size_t s = 0; s < pva.size(); ++s) {
        g.mean += pva.weight[s] * pva.position[s];
        g.amplitude += pva.weight[s] * pva.amplitude[s];
    }
    for (std::size_t s = 0; s < pva.size(); ++s) {
        const Vec2 d = pva.position[s] - g.mean;
        g.cov += pva.weight[s] * d * d.transpose();
    }
    return g;
}

}  // namespace

void MtBelief::resize(std::size_t n) {
    position.resize(n, Vec2::Zero());
    velocity.resize(n, Vec2::Zero());
    heading.resize(n, 0.0);
    weight.resize(n, n ? 1.0 / static_cast<double>(n) : 0.0);
}

LinkModel::LinkModel(const SensorModel& sensor) : sensor_(sensor), step_(0.005) {
    // Q1 increases with u and reaches exactly 1 on the fast path of marcum_q1.
    for (std::size_t i = 0;; ++i) {
        const double u = static_cast<double>(i) * step_;
        const double q = sensor_.amplitude_mass(u);
        mass_.push_back(q);
        if (q >= 1.0 || u > 4000.0) break;
    }
}

double LinkModel::amplitude_mass(double u) const {
    if (u <= 0.0) return mass_.front();
    const double x = u / step_;
    const auto i = static_cast<std::size_t>(x);
    if (i + 1 >= mass_.size()) return mass_.back();
    const double t = x - static_cast<double>(i);
    return mass_[i] + t * (mass_[i + 1] - mass_[i]);
}

double LinkModel::detection_probability(double u) const {
    return sensor_.model().detection_mode == DetectionMode::constant ? sensor_.model().p_d : amplitude_mass(u);
}

double LinkModel::amplitude_factor(double z_u, double u) const {
    if (z_u < sensor_.gamma()) return 0.0;
    const double rice = rician_pdf(z_u, u, sensor_.sigma_amplitude(u));
    if (sensor_.model().detection_mode == DetectionMode::amplitude) return rice;
    const double mass = amplitude_mass(u);
    return mass > 0.0 ? sensor_.model().p_d * rice / mass : 0.0;
}

double LinkModel::likelihood(const Measurement& z, const Vec2& mt, double heading, const Vec2& va, double u,
                             double bs_orientation, double gate) const {
    if (z.amplitude < sensor_.gamma() || !(u > 0.0)) return 0.0;
    const double distance = (mt - va).norm();
    const double sd = sensor_.sigma_distance(u);
    const double rd = (z.distance - distance) / sd;
    if (std::abs(rd) > gate) return 0.0;
    const double aoa = wrap_angle(bearing(mt, va) - heading);
    const double sa = sensor_.sigma_aoa(u, aoa);
    const double ra = wrap_angle(z.aoa - aoa) / sa;
    if (std::abs(ra) > gate) return 0.0;
    double chi = rd * rd + ra * ra;
    double norm = kInvSqrtTwoPi * kInvSqrtTwoPi / (sd * sa);
    if (sensor_.uses_aod() && z.aod) {
        const double aod = bearing(va, mt);
        const double so = sensor_.sigma_aod(u, wrap_angle(aod - bs_orientation));
        const double ro = wrap_angle(*z.aod - aod) / so;
        if (std::abs(ro) > gate) return 0.0;
        chi += ro * ro;
        norm *= kInvSqrtTwoPi / so;
    }
    return norm * std::exp(-0.5 * chi) * amplitude_factor(z.amplitude, u);
}

std::vector<std::size_t> systematic_resample(std::span<const double> weights, RandomStream& rng) {
    const std::size_t n = weights.size();
    std::vector<std::size_t> out(n);
    if (n == 0) return out;
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    const double step = total / static_cast<double>(n);
    double target = rng.uniform() * step;
    double cumulative = weights[0];
    std::size_t i = 0;
    for (std::size_t k = 0; k < n; ++k) {
        while (cumulative < target && i + 1 < n) cumulative += weights[++i];
        out[k] = i;
        target += step;
    }
    return out;
}

std::vector<std::size_t> pair_indices(const MtBelief& mt, std::size_t count, RandomStream& rng) {
    std::vector<std::size_t> out(count);
    if (mt.size() == 0) return out;
    const double total = std::accumulate(mt.weight.begin(), mt.weight.end(), 0.0);
    const double step = total / static_cast<double>(count);
    double target = rng.uniform() * step;
    double cumulative = mt.weight[0];
    std::size_t i = 0;
    for (std::size_t k = 0; k < count; ++k) {
        while (cumulative < target && i + 1 < mt.size()) cumulative += mt.weight[++i];
        out[k] = i;
        target += step;
    }
    // Systematic draws come out sorted; shuffling decorrelates the pairing
    // from the particle order of the other cloud.
    std::shuffle(out.begin(), out.end(), rng.engine());
    return out;
}

double effective_sample_size(std::span<const double> weights) {
    double sum = 0.0, sq = 0.0;
    for (double w : weights) {
        sum += w;
        sq += w * w;
    }
    return sq > 0.0 ? sum * sum / sq : 0.0;
}

bool normalize_weights(std::vector<double>& weights) {
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (!(total > 0.0) || !std::isfinite(total)) {
        std::fill(weights.begin(), weights.end(), weights.empty() ? 0.0 : 1.0 / static_cast<double>(weights.size()));
        return false;
    }
    for (double& w : weights) w /= total;
    return true;
}

MtBelief initialize_mt(const MtState& truth, std::size_t particles, std::optional<double> heading_observation,
                       double heading_std, RandomStream& rng) {
    MtBelief b;
    b.resize(particles);
    for (std::size_t r = 0; r < particles; ++r) {
        b.position[r] = truth.position + Vec2(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1));
        b.velocity[r] = truth.velocity + Vec2(rng.uniform(-0.01, 0.01), rng.uniform(-0.01, 0.01));
        b.heading[r] = heading_observation ? wrap_angle(*heading_observation + heading_std * rng.normal())
                                           : wrap_angle(truth.heading + deg2rad(rng.uniform(-10.0, 10.0)));
    }
    return b;
}

double link_amplitude(double a, double d) { return a / std::max(d, kMinDistance); }

PvaBelief make_anchor(int bs, const Vec2& position, std::size_t particles, const RadioParams& radio,
                      RandomStream& rng) {
    PvaBelief a;
    a.key.bs = bs;
    a.anchor = true;
    a.existence = 1.0;
    a.position.assign(particles, position);
    a.weight.assign(particles, 1.0 / static_cast<double>(particles));
    const double u = amplitude_truth(1.0, 0, radio);
    a.amplitude.resize(particles);
    for (double& v : a.amplitude) v = std::max(u * (1.0 + 0.1 * rng.normal()), 1e-3);
    return a;
}

void predict_mt(MtBelief& belief, const ImuMeasurement* control, double dt, const ModelParams& model,
                RandomStream& rng) {
    const double accel_std = control ? std::hypot(model.sigma_w, model.imu_accel_std) : model.sigma_w;
    const double heading_std = control ? deg2rad(model.imu_gyro_std_deg) * dt : deg2rad(model.heading_diffusion_deg);
    for (std::size_t r = 0; r < belief.size(); ++r) {
        double heading = belief.heading[r] + heading_std * rng.normal();
        Vec2 accel(accel_std * rng.normal(), accel_std * rng.normal());
        if (control) {
            heading += control->turn_rate * dt;
            accel += rotate(control->acceleration, heading);
        }
        belief.heading[r] = wrap_angle(heading);
        belief.position[r] += belief.velocity[r] * dt + 0.5 * accel * dt * dt;
        belief.velocity[r] += accel * dt;
    }
}

bool imu_update(MtBelief& belief, const ImuMeasurement& z, double heading_std) {
    for (std::size_t r = 0; r < belief.size(); ++r) belief.weight[r] *= lhf_imu(z, belief.heading[r], heading_std);
    return normalize_weights(belief.weight);
}

void predict_pva(PvaBelief& belief, double p_s, double amplitude_walk, double sigma_a, RandomStream& rng) {
    belief.existence *= p_s;
    for (std::size_t s = 0; s < belief.size(); ++s) {
        if (sigma_a > 0.0) belief.position[s] += Vec2(sigma_a * rng.normal(), sigma_a * rng.normal());
        if (amplitude_walk > 0.0) {
            const double u = belief.amplitude[s];
            belief.amplitude[s] = std::max(u + amplitude_walk * u * rng.normal(), 1e-3);
        }
    }
}

LegacyEvaluation evaluate_legacy(std::span<const PvaBelief> pvas, const MtBelief& mt,
                                 std::span<const std::size_t> pairing, std::span<const Measurement> z,
                                 const LinkModel& link, double bs_orientation) {
    constexpr double kGate = 8.0;
    const auto K = static_cast<Eigen::Index>(pvas.size());
    const auto M = static_cast<Eigen::Index>(z.size());
    LegacyEvaluation ev;
    ev.evidence = Eigen::MatrixXd::Zero(K, M);
    ev.missed = Eigen::VectorXd::Ones(K);
    ev.missed_terms.resize(pvas.size());
    ev.likelihood.assign(pvas.size(), std::vector<std::vector<double>>(z.size()));

    std::vector<double> distance, sigma, link_u;
    for (std::size_t k = 0; k < pvas.size(); ++k) {
        const PvaBelief& y = pvas[k];
        const std::size_t S = y.size();
        if (S > pairing.size()) throw DomainError("pairing is shorter than the PVA particle set");
        auto& missed = ev.missed_terms[k];
        missed.resize(S);
        distance.resize(S);
        sigma.resize(S);
        link_u.resize(S);
        double expected_missed = 0.0;
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (std::size_t s = 0; s < S; ++s) {
            distance[s] = (mt.position[pairing[s]] - y.position[s]).norm();
            link_u[s] = link_amplitude(y.amplitude[s], distance[s]);
            missed[s] = 1.0 - link.detection_probability(link_u[s]);
            expected_missed += y.weight[s] * missed[s];
            sigma[s] = link.sensor().sigma_distance(link_u[s]);
            lo = std::min(lo, distance[s] - kGate * sigma[s]);
            hi = std::max(hi, distance[s] + kGate * sigma[s]);
        }
        ev.missed(static_cast<Eigen::Index>(k)) = 1.0 - y.existence + y.existence * expected_missed;
        if (y.existence <= 0.0 || M == 0) continue;
        for (std::size_t m = 0; m < z.size(); ++m) {
            if (z[m].distance < lo || z[m].distance > hi) continue;
            std::vector<double> lik(S, 0.0);
            double sum = 0.0;
            for (std::size_t s = 0; s < S; ++s) {
                if (std::abs(z[m].distance - distance[s]) > kGate * sigma[s]) continue;
                const std::size_t r = pairing[s];
                lik[s] = link.likelihood(z[m], mt.position[r], mt.heading[r], y.position[s], link_u[s],
                                         bs_orientation, kGate);
                sum += y.weight[s] * lik[s];
            }
            if (sum > 0.0) {
                ev.evidence(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(m)) = y.existence * sum;
                ev.likelihood[k][m] = std::move(lik);
            }
        }
    }
    return ev;
}

double NewEvaluation::xi(std::size_t m) const {
    const auto i = static_cast<Eigen::Index>(m);
    if (false_alarm(i) > 0.0) return 1.0 + new_target(i) / false_alarm(i);
    return new_target(i) > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
}

NewEvaluation evaluate_new(std::span<const Measurement> z, const MtBelief& mt, std::span<const std::size_t> pairing,
                           const LinkModel& link, double bs_orientation, const Vec2& center, double half_width,
                           RandomStream& rng) {
    const SensorModel& sensor = link.sensor();
    const auto M = static_cast<Eigen::Index>(z.size());
    const std::size_t S = pairing.size();
    const double u_max = sensor.radio().reference_amplitude();
    const double prior = 1.0 / (4.0 * half_width * half_width) / u_max;

    NewEvaluation ev;
    ev.unassigned.resize(M);
    ev.false_alarm.resize(M);
    ev.new_target.resize(M);
    ev.position.resize(z.size());
    ev.amplitude.resize(z.size());
    ev.weight.resize(z.size());

    for (std::size_t m = 0; m < z.size(); ++m) {
        const Measurement& zm = z[m];
        const auto i = static_cast<Eigen::Index>(m);
        ev.false_alarm(i) = sensor.model().mu_fa * lhf_fa(zm, sensor);

        const double u0 = std::max(zm.amplitude, 1e-3);
        const double su = sensor.sigma_amplitude(u0);
        const double sd = sensor.sigma_distance(u0);
        const bool use_aod = sensor.uses_aod() && zm.aod.has_value();
        const double st = use_aod ? sensor.sigma_aod(u0, wrap_angle(*zm.aod - bs_orientation))
                                  : sensor.sigma_aoa(u0, zm.aoa);

        auto& pos = ev.position[m];
        auto& amp = ev.amplitude[m];
        auto& w = ev.weight[m];
        pos.resize(S);
        amp.resize(S);
        w.assign(S, 0.0);
        double total = 0.0;
        for (std::size_t s = 0; s < S; ++s) {
            const std::size_t r = pairing[s];
            const double n_rho = rng.normal();
            const double n_theta = rng.normal();
            const double n_u = rng.normal();
            const double rho = zm.distance + sd * n_rho;
            const double theta = (use_aod ? *zm.aod : zm.aoa + mt.heading[r]) + st * n_theta;
            const double u = u0 + su * n_u;
            const Vec2 va = use_aod ? Vec2(mt.position[r] - rho * unit_vector(theta))
                                    : Vec2(mt.position[r] + rho * unit_vector(theta));
            pos[s] = va;
            amp[s] = std::max(u, 1e-3) * std::max(rho, kMinDistance);
            if (rho <= 0.0 || u <= 0.0 || u > u_max) continue;
            if (std::abs(va.x() - center.x()) > half_width || std::abs(va.y() - center.y()) > half_width) continue;
            const double proposal = gaussian_pdf(n_rho, 0.0, 1.0) / sd * gaussian_pdf(n_theta, 0.0, 1.0) / st / rho *
                                    gaussian_pdf(n_u, 0.0, 1.0) / su;
            const double target = prior * link.likelihood(zm, mt.position[r], mt.heading[r], va, u, bs_orientation,
                                                          std::numeric_limits<double>::infinity());
            w[s] = target / proposal;
            total += w[s];
        }
        ev.new_target(i) = S ? sensor.model().mu_n * total / static_cast<double>(S) : 0.0;
        ev.unassigned(i) = ev.false_alarm(i) + ev.new_target(i);
        if (total > 0.0) {
            for (double& v : w) v /= total;
        }
    }
    return ev;
}

MtMessage legacy_message(const MtBelief& mt, std::span<const PvaBelief> pvas, const LegacyEvaluation& evaluation,
                         const Eigen::MatrixXd& nu, std::span<const Measurement> z, const LinkModel& link,
                         double bs_orientation, double p_cf) {
    constexpr double kGateChi = 36.0;   // counts a measurement as explained
    constexpr double kSkipSigma = 12.0; // contribution below exp(-72) is dropped
    const SensorModel& sensor = link.sensor();
    const std::size_t R = mt.size();
    MtMessage out;
    out.log_weight.assign(R, 0.0);

    std::vector<double> term(R);
    const Vec2 mt_mean = mmse(mt).position;
    for (std::size_t k = 0; k < pvas.size(); ++k) {
        const PvaBelief& y = pvas[k];
        const double r_hat = y.existence;
        if (r_hat <= 0.0) continue;
        const bool confirmed = r_hat > p_cf;
        if (confirmed) ++out.confirmed;

        const GaussianSummary g = summarize(y);
        const double u_hat = std::max(link_amplitude(g.amplitude, (mt_mean - g.mean).norm()), 1e-3);
        std::vector<double> u(y.size());
        double expected_missed = 0.0;
        for (std::size_t s = 0; s < y.size(); ++s) {
            u[s] = link_amplitude(y.amplitude[s], (mt_mean - y.position[s]).norm());
            expected_missed += y.weight[s] * (1.0 - link.detection_probability(u[s]));
        }
        const double base = 1.0 - r_hat + r_hat * expected_missed;

        struct Active {
            std::size_t m;
            double scale;  // nu * E[p_d f_u]
        };
        std::vector<Active> active;
        for (std::size_t m = 0; m < z.size(); ++m) {
            const double n = capped(nu(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(m)));
            if (n <= 0.0 || evaluation.likelihood[k][m].empty()) continue;
            double amp = 0.0;
            for (std::size_t s = 0; s < y.size(); ++s) amp += y.weight[s] * link.amplitude_factor(z[m].amplitude, u[s]);
            if (amp > 0.0) active.push_back({m, n * amp});
        }
        if (active.empty()) {
            // Constant in x: no influence on the MT posterior.
            continue;
        }

        const double sd2 = std::pow(sensor.sigma_distance(u_hat), 2);
        bool gated = false;
        for (std::size_t r = 0; r < R; ++r) {
            const Vec2 diff = mt.position[r] - g.mean;
            const double d = std::max(diff.norm(), 1e-9);
            const Vec2 e = diff / d;
            const Vec2 t(-e.y(), e.x());
            const double vd = sd2 + e.dot(g.cov * e);
            const double vt = t.dot(g.cov * t) / (d * d);
            const double aoa = wrap_angle(bearing(mt.position[r], g.mean) - mt.heading[r]);
            const double va = std::pow(sensor.sigma_aoa(u_hat, aoa), 2) + vt;
            double vo = 0.0;
            double aod = 0.0;
            if (sensor.uses_aod()) {
                aod = bearing(g.mean, mt.position[r]);
                vo = std::pow(sensor.sigma_aod(u_hat, wrap_angle(aod - bs_orientation)), 2) + vt;
            }
            double sum = 0.0;
            for (const Active& a : active) {
                const Measurement& zm = z[a.m];
                const double rd = zm.distance - d;
                double chi = rd * rd / vd;
                if (chi > kSkipSigma * kSkipSigma) continue;
                const double ra = wrap_angle(zm.aoa - aoa);
                chi += ra * ra / va;
                double var = vd * va;
                double norm = 1.0 / (kTwoPi);
                if (sensor.uses_aod() && zm.aod) {
                    const double ro = wrap_angle(*zm.aod - aod);
                    chi += ro * ro / vo;
                    var *= vo;
                    norm *= kInvSqrtTwoPi;
                }
                if (chi <= kGateChi) gated = true;
                sum += a.scale * norm / std::sqrt(var) * std::exp(-0.5 * chi);
            }
            term[r] = base + r_hat * sum;
        }
        if (confirmed && gated) ++out.gated;
        for (std::size_t r = 0; r < R; ++r) out.log_weight[r] += std::log(term[r]);
    }
    return out;
}

bool update_mt_with_legacy(MtBelief& mt, const MtMessage& message, RandomStream& rng) {
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < mt.size(); ++r) {
        if (mt.weight[r] > 0.0) peak = std::max(peak, message.log_weight[r]);
    }
    bool ok = std::isfinite(peak);
    if (ok) {
        for (std::size_t r = 0; r < mt.size(); ++r) mt.weight[r] *= std::exp(message.log_weight[r] - peak);
        ok = normalize_weights(mt.weight);
    } else {
        std::fill(mt.weight.begin(), mt.weight.end(), 1.0 / static_cast<double>(mt.size()));
    }
    if (effective_sample_size(mt.weight) < 0.5 * static_cast<double>(mt.size())) resample_mt(mt, rng);
    return ok;
}

void update_pva(PvaBelief& belief, std::size_t k, const LegacyEvaluation& evaluation, const Eigen::MatrixXd& nu,
                RandomStream& rng) {
    const std::size_t S = belief.size();
    std::vector<double> g = evaluation.missed_terms[k];
    const auto& lik = evaluation.likelihood[k];
    for (std::size_t m = 0; m < lik.size(); ++m) {
        if (lik[m].empty()) continue;
        const double n = capped(nu(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(m)));
        if (n <= 0.0) continue;
        for (std::size_t s = 0; s < S; ++s) g[s] += n * lik[m][s];
    }
    double expected = 0.0;
    for (std::size_t s = 0; s < S; ++s) expected += belief.weight[s] * g[s];

    const double r = belief.existence;
    const double denom = (1.0 - r) + r * expected;
    if (denom > 0.0 && std::isfinite(denom)) belief.existence = std::clamp(r * expected / denom, 0.0, 1.0);
    if (belief.anchor) belief.existence = 1.0;

    if (expected > 0.0 && std::isfinite(expected)) {
        for (std::size_t s = 0; s < S; ++s) belief.weight[s] *= g[s];
        normalize_weights(belief.weight);
    }
    if (effective_sample_size(belief.weight) < 0.5 * static_cast<double>(S)) resample_pva(belief, rng);
}

std::vector<PvaBelief> birth_new_pvas(const NewEvaluation& evaluation, const AssociationMarginals& marginals,
                                      int bs, int step, int mt, std::uint64_t& next_id, RandomStream& rng) {
    std::vector<PvaBelief> out;
    out.reserve(evaluation.position.size());
    for (std::size_t m = 0; m < evaluation.position.size(); ++m) {
        PvaBelief b;
        b.key = {bs, step, mt, static_cast<int>(m)};
        b.id = next_id++;
        b.position = evaluation.position[m];
        b.amplitude = evaluation.amplitude[m];
        b.weight = evaluation.weight[m];
        const double p0 = marginals.measurement(static_cast<Eigen::Index>(m), 0);
        const double xi = evaluation.xi(m);
        b.existence = std::isinf(xi) ? p0 : p0 * (xi - 1.0) / xi;
        if (!normalize_weights(b.weight)) b.existence = 0.0;
        if (b.existence > 0.0) resample_pva(b, rng);
        out.push_back(std::move(b));
    }
    return out;
}

void promote_and_fuse(std::vector<PvaBelief>& legacy, std::vector<PvaBelief>&& births) {
    legacy.insert(legacy.end(), std::make_move_iterator(births.begin()), std::make_move_iterator(births.end()));
}

void coop_update(MtBelief& a, MtBelief& b, std::span<const CoopMeasurement> z, double amplitude,
                 const LinkModel& link, RandomStream& rng) {
    constexpr std::size_t kSubsample = 16;
    if (z.empty() || a.size() == 0 || b.size() == 0) return;
    const SensorModel& sensor = link.sensor();
    const double sigma = sensor.sigma_distance(amplitude);
    const double p_d = link.detection_probability(amplitude);
    const auto idx_a = pair_indices(a, kSubsample, rng);
    const auto idx_b = pair_indices(b, kSubsample, rng);

    // L[m][r]: likelihood of z_m for particle r averaged over the other MT.
    auto evaluate = [&](const MtBelief& self, const MtBelief& other, std::span<const std::size_t> idx) {
        std::vector<std::vector<double>> lik(z.size(), std::vector<double>(self.size(), 0.0));
        for (std::size_t m = 0; m < z.size(); ++m) {
            for (std::size_t r = 0; r < self.size(); ++r) {
                double sum = 0.0;
                for (std::size_t s : idx) sum += gaussian_pdf(z[m].distance, (self.position[r] - other.position[s]).norm(), sigma);
                lik[m][r] = sum / static_cast<double>(idx.size());
            }
        }
        return lik;
    };
    const auto lik_a = evaluate(a, b, idx_b);
    const auto lik_b = evaluate(b, a, idx_a);

    std::vector<double> mean_a(z.size(), 0.0), mean_b(z.size(), 0.0);
    for (std::size_t m = 0; m < z.size(); ++m) {
        for (std::size_t r = 0; r < a.size(); ++r) mean_a[m] += a.weight[r] * lik_a[m][r];
        for (std::size_t r = 0; r < b.size(); ++r) mean_b[m] += b.weight[r] * lik_b[m][r];
    }

    // Categorical posterior of which measurement is the LOS one.
    std::vector<double> detected(z.size()), false_alarm(z.size());
    bool fa_possible = true;
    for (std::size_t m = 0; m < z.size(); ++m) {
        detected[m] = link.amplitude_factor(z[m].amplitude, amplitude) * 0.5 * (mean_a[m] + mean_b[m]);
        false_alarm[m] = z[m].distance >= 0.0 && z[m].distance <= sensor.max_distance()
                             ? sensor.model().mu_fa / sensor.max_distance() *
                                   truncated_rayleigh_pdf(z[m].amplitude, sensor.gamma())
                             : 0.0;
        if (!(false_alarm[m] > 0.0)) fa_possible = false;
    }
    std::vector<double> evidence(z.size());
    double missed = 1.0 - p_d;
    if (fa_possible) {
        for (std::size_t m = 0; m < z.size(); ++m) evidence[m] = detected[m] / false_alarm[m];
    } else {
        // Weights relative to the product of all false-alarm densities.
        missed = 0.0;
        for (std::size_t m = 0; m < z.size(); ++m) {
            double w = detected[m];
            for (std::size_t o = 0; o < z.size(); ++o) {
                if (o != m) w *= false_alarm[o];
            }
            evidence[m] = w;
        }
    }
    std::vector<double> p;
    try {
        p = coop_association(evidence, missed);
    } catch (const DegenerateEvidence&) {
        return;
    }

    auto apply = [&](MtBelief& self, const std::vector<std::vector<double>>& lik, const std::vector<double>& mean) {
        for (std::size_t r = 0; r < self.size(); ++r) {
            double factor = p[0];
            for (std::size_t m = 0; m < z.size(); ++m) {
                if (mean[m] > 0.0) factor += p[m + 1] * lik[m][r] / mean[m];
            }
            self.weight[r] *= factor;
        }
        normalize_weights(self.weight);
        if (effective_sample_size(self.weight) < 0.5 * static_cast<double>(self.size())) resample_mt(self, rng);
    };
    apply(a, lik_a, mean_a);
    apply(b, lik_b, mean_b);
}

std::vector<VaEstimate> confirm_prune(std::vector<PvaBelief>& pvas, double p_cf, double p_pr) {
    std::erase_if(pvas, [&](const PvaBelief& p) { return !p.anchor && p.existence < p_pr; });
    std::vector<VaEstimate> out;
    for (const PvaBelief& p : pvas) {
        if (!p.anchor && p.existence > p_cf) out.push_back({p.id, p.key.bs, mmse(p), p.existence});
    }
    return out;
}

MtState mmse(const MtBelief& belief) {
    MtState s;
    double c = 0.0, sn = 0.0;
    for (std::size_t r = 0; r < belief.size(); ++r) {
        s.position += belief.weight[r] * belief.position[r];
        s.velocity += belief.weight[r] * belief.velocity[r];
        c += belief.weight[r] * std::cos(belief.heading[r]);
        sn += belief.weight[r] * std::sin(belief.heading[r]);
    }
    s.heading = std::atan2(sn, c);
    return s;
}

Vec2 mmse(const PvaBelief& belief) {
    Vec2 p = Vec2::Zero();
    for (std::size_t s = 0; s < belief.size(); ++s) p += belief.weight[s] * belief.position[s];
    return p;
}

Filter::Filter(const ScenarioConfig& config, std::span<const MtState> initial_truth,
               std::span<const std::optional<double>> heading_observations, RandomStream rng)
    : config_(config),
      sensor_(config.radio, config.model, config.toggles.mimo),
      link_(sensor_),
      rng_(std::move(rng)) {
    const std::size_t R = config_.model.particles;
    const double heading_std = deg2rad(config_.model.imu_heading_std_deg);
    for (std::size_t i = 0; i < initial_truth.size(); ++i) {
        std::optional<double> obs;
        if (config_.toggles.imu && i < heading_observations.size()) obs = heading_observations[i];
        mts_.push_back(initialize_mt(initial_truth[i], R, obs, heading_std, rng_));
    }
    const std::size_t maps = config_.toggles.pva_fusion ? 1 : initial_truth.size();
    maps_.resize(maps);
    confirmed_.resize(maps);
    for (std::size_t g = 0; g < maps; ++g) {
        maps_[g].resize(config_.base_stations.size());
        confirmed_[g].resize(config_.base_stations.size());
        for (std::size_t j = 0; j < config_.base_stations.size(); ++j) {
            const Vec2& bs = config_.base_stations[j].position;
            PvaBelief anchor = make_anchor(static_cast<int>(j), bs, R, config_.radio, rng_);
            anchor.id = next_id_++;
            maps_[g][j].push_back(std::move(anchor));
        }
    }
}

StepDiagnostics Filter::step(const StepInput& input) {
    ++step_;
    const ModelParams& model = config_.model;
    const ExperimentToggles& toggles = config_.toggles;
    const std::size_t R = model.particles;
    const double heading_std = deg2rad(model.imu_heading_std_deg);

    for (auto& map : maps_) {
        for (auto& list : map) {
            for (PvaBelief& p : list) {
                if (p.anchor) {
                    predict_pva(p, 1.0, model.amplitude_walk, 0.0, rng_);
                } else {
                    predict_pva(p, model.p_s, model.amplitude_walk, model.sigma_a, rng_);
                }
            }
        }
    }
    for (std::size_t i = 0; i < mts_.size(); ++i) {
        const ImuMeasurement* control = nullptr;
        if (toggles.imu && i < input.imu.size() && input.imu[i]) control = &*input.imu[i];
        predict_mt(mts_[i], control, config_.dt, model, rng_);
        if (control) imu_update(mts_[i], *control, heading_std);
    }

    StepDiagnostics diag;
    diag.divergence.assign(mts_.size(), false);
    BpOptions bp;
    bp.max_iterations = model.da_max_iterations;
    bp.tolerance = model.da_tolerance;
    bp.damping = model.da_damping;

    for (std::size_t i = 0; i < mts_.size(); ++i) {
        MtBelief& mt = mts_[i];
        auto& map = maps_[map_of(i)];
        int confirmed = 0;
        int gated = 0;
        for (std::size_t j = 0; j < config_.base_stations.size(); ++j) {
            auto& legacy = map[j];
            const double orientation = config_.base_stations[j].orientation();
            static const std::vector<Measurement> kNone;
            const std::vector<Measurement>& z =
                i < input.bs.size() && j < input.bs[i].size() ? input.bs[i][j] : kNone;

            const auto pairing = pair_indices(mt, R, rng_);
            LegacyEvaluation legacy_eval = evaluate_legacy(legacy, mt, pairing, z, link_, orientation);
            NewEvaluation new_eval = evaluate_new(z, mt, pairing, link_, orientation, config_.map_center,
                                                  model.birth_half_width, rng_);

            AssociationProblem problem;
            problem.evidence = legacy_eval.evidence;
            problem.missed = legacy_eval.missed;
            problem.unassigned = new_eval.unassigned;
            const AssociationMarginals marginals = loopy_da(problem, bp);
            if (!marginals.converged) ++diag.da_nonconverged;

            const MtMessage message = legacy_message(mt, legacy, legacy_eval, marginals.measurement_to_target, z,
                                                     link_, orientation, model.p_cf);
            confirmed += message.confirmed;
            gated += message.gated;
            for (std::size_t k = 0; k < legacy.size(); ++k) {
                update_pva(legacy[k], k, legacy_eval, marginals.measurement_to_target, rng_);
            }
            auto births = birth_new_pvas(new_eval, marginals, static_cast<int>(j), step_, static_cast<int>(i),
                                         next_id_, rng_);
            if (!update_mt_with_legacy(mt, message, rng_)) diag.divergence[i] = true;
            promote_and_fuse(legacy, std::move(births));
        }
        if (confirmed > 0 && gated == 0) {
            diag.divergence[i] = true;
            std::fill(mt.weight.begin(), mt.weight.end(), 1.0 / static_cast<double>(mt.size()));
        }
    }

    if (toggles.coop) {
        // Both beliefs of a pair are updated from their state before the pair's update.
        for (std::size_t i = 0; i < mts_.size(); ++i) {
            for (std::size_t k = i + 1; k < mts_.size(); ++k) {
                if (i >= input.coop.size() || k >= input.coop[i].size()) continue;
                const auto& z = input.coop[i][k];
                if (z.empty()) continue;
                const double d = (mmse(mts_[i]).position - mmse(mts_[k]).position).norm();
                const double u = amplitude_truth(std::max(d, 0.1), 0, config_.radio);
                coop_update(mts_[i], mts_[k], z, u, link_, rng_);
            }
        }
    }

    for (std::size_t g = 0; g < maps_.size(); ++g) {
        for (std::size_t j = 0; j < maps_[g].size(); ++j) {
            confirmed_[g][j] = confirm_prune(maps_[g][j], model.p_cf, model.p_pr);
        }
    }
    return diag;
}

}  // namespace mpslam
