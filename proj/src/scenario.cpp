#include <mpslam/scenario.hpp>
#include <mpslam/errors.hpp>

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace mpslam {

using nlohmann::json;

double RadioParams::rms_bandwidth() const { return bandwidth / std::sqrt(12.0); }

double RadioParams::reference_amplitude() const { return std::pow(10.0, snr_ref_db / 20.0); }

ExperimentToggles ExperimentToggles::named(std::string_view name) {
    // rows: MIMO, Coop, IMU, PVA fusion
    static constexpr bool table[7][4] = {
        {false, false, true, false},  // E1
        {true, false, true, false},   // E2
        {true, true, false, true},    // E3
        {false, false, true, true},   // E4
        {false, true, true, true},    // E5
        {true, false, true, true},    // E6
        {true, true, true, true},     // E7
    };
    if (name.size() == 2 && (name[0] == 'E' || name[0] == 'e') && name[1] >= '1' && name[1] <= '7') {
        const auto& row = table[name[1] - '1'];
        return {row[0], row[1], row[2], row[3]};
    }
    throw ValidationError("/experiment", "unknown experiment name '" + std::string(name) + "'");
}

namespace {

// Reads fields of one JSON object and reports unknown keys on finish().
class ObjectReader {
public:
    ObjectReader(const json& object, std::string path) : object_(object), path_(std::move(path)) {
        if (!object_.is_object()) throw SchemaError(path_, "expected an object");
    }

    bool has(const std::string& key) const { return object_.contains(key); }

    const json& required(const std::string& key) {
        if (!object_.contains(key)) throw SchemaError(path_ + "/" + key, "missing required field");
        seen_.insert(key);
        return object_.at(key);
    }

    template <typename T>
    void optional(const std::string& key, T& out) {
        if (!object_.contains(key)) return;
        seen_.insert(key);
        out = as<T>(object_.at(key), path_ + "/" + key);
    }

    void optional_vec(const std::string& key, Vec2& out) {
        if (!object_.contains(key)) return;
        seen_.insert(key);
        out = as_vec(object_.at(key), path_ + "/" + key);
    }

    std::string child(const std::string& key) const { return path_ + "/" + key; }

    void finish() const {
        for (const auto& item : object_.items()) {
            if (!seen_.count(item.key())) throw SchemaError(path_ + "/" + item.key(), "unknown field");
        }
    }

    template <typename T>
    static T as(const json& value, const std::string& where) {
        if constexpr (std::is_same_v<T, bool>) {
            if (!value.is_boolean()) throw SchemaError(where, "expected a boolean");
            return value.get<bool>();
        } else if constexpr (std::is_integral_v<T>) {
            if (!value.is_number_integer()) throw SchemaError(where, "expected an integer");
            if constexpr (std::is_unsigned_v<T>) {
                if (value.get<std::int64_t>() < 0 && !value.is_number_unsigned()) {
                    throw ValidationError(where, "must be nonnegative");
                }
            }
            return value.get<T>();
        } else if constexpr (std::is_same_v<T, DetectionMode>) {
            if (!value.is_string()) throw SchemaError(where, "expected a string");
            const auto s = value.get<std::string>();
            if (s == "constant") return DetectionMode::constant;
            if (s == "amplitude") return DetectionMode::amplitude;
            throw ValidationError(where, "expected 'constant' or 'amplitude'");
        } else {
            if (!value.is_number()) throw SchemaError(where, "expected a number");
            return value.get<T>();
        }
    }

    static Vec2 as_vec(const json& value, const std::string& where) {
        if (!value.is_array() || value.size() != 2 || !value[0].is_number() || !value[1].is_number()) {
            throw SchemaError(where, "expected [x, y]");
        }
        return {value[0].get<double>(), value[1].get<double>()};
    }

private:
    const json& object_;
    std::string path_;
    std::set<std::string> seen_;
};

const json& array_field(ObjectReader& reader, const std::string& key) {
    const json& value = reader.required(key);
    if (!value.is_array()) throw SchemaError(reader.child(key), "expected an array");
    return value;
}

void read_radio(const json& value, const std::string& path, RadioParams& radio) {
    ObjectReader r(value, path);
    r.optional("carrier_frequency_hz", radio.carrier_frequency);
    r.optional("bandwidth_hz", radio.bandwidth);
    r.optional("subcarriers", radio.subcarriers);
    r.optional("bs_antennas", radio.bs_antennas);
    r.optional("mt_antennas", radio.mt_antennas);
    r.optional("snr_ref_db", radio.snr_ref_db);
    r.optional("bounce_loss_db", radio.bounce_loss_db);
    r.optional("detection_threshold", radio.detection_threshold);
    r.optional("max_distance_m", radio.max_distance);
    r.finish();
}

void read_model(const json& value, const std::string& path, ModelParams& model) {
    ObjectReader r(value, path);
    r.optional("detection_mode", model.detection_mode);
    r.optional("p_d", model.p_d);
    r.optional("mu_fa", model.mu_fa);
    r.optional("mu_n", model.mu_n);
    r.optional("p_s", model.p_s);
    r.optional("p_cf", model.p_cf);
    r.optional("p_pr", model.p_pr);
    r.optional("sigma_w", model.sigma_w);
    r.optional("sigma_a", model.sigma_a);
    r.optional("amplitude_walk", model.amplitude_walk);
    r.optional("heading_diffusion_deg", model.heading_diffusion_deg);
    r.optional("imu_heading_std_deg", model.imu_heading_std_deg);
    r.optional("imu_accel_std", model.imu_accel_std);
    r.optional("imu_gyro_std_deg", model.imu_gyro_std_deg);
    r.optional("birth_half_width_m", model.birth_half_width);
    r.optional("particles", model.particles);
    r.optional("generation_noise_scale", model.generation_noise_scale);
    r.optional("da_damping", model.da_damping);
    r.optional("da_tolerance", model.da_tolerance);
    r.optional("da_max_iterations", model.da_max_iterations);
    r.finish();
}

void read_toggles(const json& value, const std::string& path, ExperimentToggles& toggles) {
    ObjectReader r(value, path);
    r.optional("mimo", toggles.mimo);
    r.optional("coop", toggles.coop);
    r.optional("imu", toggles.imu);
    r.optional("pva_fusion", toggles.pva_fusion);
    r.finish();
}

json vec_json(const Vec2& v) { return json::array({v.x(), v.y()}); }

void require(bool ok, const std::string& where, const std::string& what) {
    if (!ok) throw ValidationError(where, what);
}

void require_probability(double p, const std::string& where) {
    require(std::isfinite(p) && p >= 0.0 && p <= 1.0, where, "probability must lie in [0, 1]");
}

void require_positive(double v, const std::string& where) {
    require(std::isfinite(v) && v > 0.0, where, "must be positive");
}

void require_nonnegative(double v, const std::string& where) {
    require(std::isfinite(v) && v >= 0.0, where, "must be nonnegative");
}

}  // namespace

void validate_scenario(const ScenarioConfig& c) {
    require(c.steps >= 1, "/steps", "must be at least 1");
    require_positive(c.dt, "/dt");
    require(c.map_center.allFinite(), "/map_center", "must be finite");
    require(!c.base_stations.empty(), "/base_stations", "at least one base station is required");
    require(!c.mobile_terminals.empty(), "/mobile_terminals", "at least one mobile terminal is required");

    for (std::size_t w = 0; w < c.walls.size(); ++w) {
        const std::string where = "/walls/" + std::to_string(w);
        require(c.walls[w].start.allFinite() && c.walls[w].end.allFinite(), where, "must be finite");
        require(c.walls[w].length() > 1e-9, where, "wall has zero length");
    }
    for (std::size_t j = 0; j < c.base_stations.size(); ++j) {
        const std::string where = "/base_stations/" + std::to_string(j);
        require(c.base_stations[j].position.allFinite(), where + "/position", "must be finite");
        require(std::isfinite(c.base_stations[j].orientation_deg), where + "/orientation_deg", "must be finite");
    }
    const double horizon = c.steps * c.dt;
    for (std::size_t i = 0; i < c.mobile_terminals.size(); ++i) {
        const std::string where = "/mobile_terminals/" + std::to_string(i) + "/waypoints";
        const auto& wps = c.mobile_terminals[i].waypoints;
        require(wps.size() >= 2, where, "at least two waypoints are required");
        for (std::size_t k = 0; k < wps.size(); ++k) {
            require(wps[k].position.allFinite() && std::isfinite(wps[k].time), where + "/" + std::to_string(k),
                    "must be finite");
            if (k > 0) {
                require(wps[k].time > wps[k - 1].time, where + "/" + std::to_string(k) + "/time",
                        "waypoint times must be strictly increasing");
            }
        }
        require(wps.front().time <= 0.0 && wps.back().time >= horizon - 1e-9, where,
                "waypoint times must cover [0, steps*dt]");
    }

    const RadioParams& r = c.radio;
    require_positive(r.carrier_frequency, "/radio/carrier_frequency_hz");
    require_positive(r.bandwidth, "/radio/bandwidth_hz");
    require(r.subcarriers >= 1, "/radio/subcarriers", "must be at least 1");
    require(r.bs_antennas >= 1, "/radio/bs_antennas", "must be at least 1");
    require(r.mt_antennas >= 2, "/radio/mt_antennas", "must be at least 2 (AoA needs an aperture)");
    require(std::isfinite(r.snr_ref_db), "/radio/snr_ref_db", "must be finite");
    require_nonnegative(r.bounce_loss_db, "/radio/bounce_loss_db");
    require_positive(r.detection_threshold, "/radio/detection_threshold");
    require_positive(r.max_distance, "/radio/max_distance_m");

    const ModelParams& m = c.model;
    require_probability(m.p_d, "/model/p_d");
    require_probability(m.p_s, "/model/p_s");
    require_probability(m.p_cf, "/model/p_cf");
    require_probability(m.p_pr, "/model/p_pr");
    require_nonnegative(m.mu_fa, "/model/mu_fa");
    require_nonnegative(m.mu_n, "/model/mu_n");
    require_nonnegative(m.sigma_w, "/model/sigma_w");
    require_nonnegative(m.sigma_a, "/model/sigma_a");
    require_nonnegative(m.amplitude_walk, "/model/amplitude_walk");
    require_nonnegative(m.heading_diffusion_deg, "/model/heading_diffusion_deg");
    require_positive(m.imu_heading_std_deg, "/model/imu_heading_std_deg");
    require_nonnegative(m.imu_accel_std, "/model/imu_accel_std");
    require_nonnegative(m.imu_gyro_std_deg, "/model/imu_gyro_std_deg");
    require_positive(m.birth_half_width, "/model/birth_half_width_m");
    require(m.particles >= 1, "/model/particles", "must be at least 1");
    require_nonnegative(m.generation_noise_scale, "/model/generation_noise_scale");
    require(m.da_damping >= 0.0 && m.da_damping < 1.0, "/model/da_damping", "must lie in [0, 1)");
    require_positive(m.da_tolerance, "/model/da_tolerance");
    require(m.da_max_iterations >= 1, "/model/da_max_iterations", "must be at least 1");
}

ScenarioConfig load_scenario(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw SchemaError("", std::string("malformed document: ") + e.what());
    }

    ScenarioConfig c;
    ObjectReader root(doc, "");
    root.optional("steps", c.steps);
    root.optional("dt", c.dt);
    root.optional("seed", c.seed);
    root.optional_vec("map_center", c.map_center);

    if (root.has("walls")) {
        const json& walls = array_field(root, "walls");
        for (std::size_t w = 0; w < walls.size(); ++w) {
            ObjectReader r(walls[w], "/walls/" + std::to_string(w));
            Wall wall;
            wall.start = ObjectReader::as_vec(r.required("start"), r.child("start"));
            wall.end = ObjectReader::as_vec(r.required("end"), r.child("end"));
            r.finish();
            c.walls.push_back(wall);
        }
    }

    const json& bss = array_field(root, "base_stations");
    for (std::size_t j = 0; j < bss.size(); ++j) {
        ObjectReader r(bss[j], "/base_stations/" + std::to_string(j));
        BaseStationConfig bs;
        bs.position = ObjectReader::as_vec(r.required("position"), r.child("position"));
        r.optional("orientation_deg", bs.orientation_deg);
        r.finish();
        c.base_stations.push_back(bs);
    }

    const json& mts = array_field(root, "mobile_terminals");
    for (std::size_t i = 0; i < mts.size(); ++i) {
        const std::string path = "/mobile_terminals/" + std::to_string(i);
        ObjectReader r(mts[i], path);
        MobileTerminalConfig mt;
        const json& wps = array_field(r, "waypoints");
        for (std::size_t k = 0; k < wps.size(); ++k) {
            ObjectReader wr(wps[k], path + "/waypoints/" + std::to_string(k));
            Waypoint wp;
            wp.position = ObjectReader::as_vec(wr.required("position"), wr.child("position"));
            wp.time = ObjectReader::as<double>(wr.required("time"), wr.child("time"));
            wr.finish();
            mt.waypoints.push_back(wp);
        }
        r.finish();
        c.mobile_terminals.push_back(std::move(mt));
    }

    if (root.has("radio")) read_radio(root.required("radio"), "/radio", c.radio);
    if (root.has("model")) read_model(root.required("model"), "/model", c.model);
    if (root.has("experiment")) read_toggles(root.required("experiment"), "/experiment", c.toggles);
    root.finish();

    validate_scenario(c);
    return c;
}

ScenarioConfig load_scenario_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open scenario file " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return load_scenario(buffer.str());
}

std::string serialize_scenario(const ScenarioConfig& c) {
    json doc;
    doc["steps"] = c.steps;
    doc["dt"] = c.dt;
    doc["seed"] = c.seed;
    doc["map_center"] = vec_json(c.map_center);

    doc["walls"] = json::array();
    for (const Wall& w : c.walls) doc["walls"].push_back({{"start", vec_json(w.start)}, {"end", vec_json(w.end)}});

    doc["base_stations"] = json::array();
    for (const auto& bs : c.base_stations) {
        doc["base_stations"].push_back({{"position", vec_json(bs.position)}, {"orientation_deg", bs.orientation_deg}});
    }

    doc["mobile_terminals"] = json::array();
    for (const auto& mt : c.mobile_terminals) {
        json wps = json::array();
        for (const auto& wp : mt.waypoints) wps.push_back({{"position", vec_json(wp.position)}, {"time", wp.time}});
        doc["mobile_terminals"].push_back({{"waypoints", wps}});
    }

    const RadioParams& r = c.radio;
    doc["radio"] = {
        {"carrier_frequency_hz", r.carrier_frequency},
        {"bandwidth_hz", r.bandwidth},
        {"subcarriers", r.subcarriers},
        {"bs_antennas", r.bs_antennas},
        {"mt_antennas", r.mt_antennas},
        {"snr_ref_db", r.snr_ref_db},
        {"bounce_loss_db", r.bounce_loss_db},
        {"detection_threshold", r.detection_threshold},
        {"max_distance_m", r.max_distance},
    };

    const ModelParams& m = c.model;
    doc["model"] = {
        {"detection_mode", m.detection_mode == DetectionMode::constant ? "constant" : "amplitude"},
        {"p_d", m.p_d},
        {"mu_fa", m.mu_fa},
        {"mu_n", m.mu_n},
        {"p_s", m.p_s},
        {"p_cf", m.p_cf},
        {"p_pr", m.p_pr},
        {"sigma_w", m.sigma_w},
        {"sigma_a", m.sigma_a},
        {"amplitude_walk", m.amplitude_walk},
        {"heading_diffusion_deg", m.heading_diffusion_deg},
        {"imu_heading_std_deg", m.imu_heading_std_deg},
        {"imu_accel_std", m.imu_accel_std},
        {"imu_gyro_std_deg", m.imu_gyro_std_deg},
        {"birth_half_width_m", m.birth_half_width},
        {"particles", m.particles},
        {"generation_noise_scale", m.generation_noise_scale},
        {"da_damping", m.da_damping},
        {"da_tolerance", m.da_tolerance},
        {"da_max_iterations", m.da_max_iterations},
    };

    doc["experiment"] = {
        {"mimo", c.toggles.mimo},
        {"coop", c.toggles.coop},
        {"imu", c.toggles.imu},
        {"pva_fusion", c.toggles.pva_fusion},
    };
    return doc.dump(2);
}

namespace {

Vec2 waypoint_position(std::span<const Waypoint> wps, double t) {
    if (t <= wps.front().time) return wps.front().position;
    if (t >= wps.back().time) return wps.back().position;
    std::size_t k = 1;
    while (wps[k].time < t) ++k;
    const double alpha = (t - wps[k - 1].time) / (wps[k].time - wps[k - 1].time);
    return (1.0 - alpha) * wps[k - 1].position + alpha * wps[k].position;
}

}  // namespace

std::vector<MtState> generate_trajectory(std::span<const Waypoint> wps, int steps, double dt) {
    if (wps.size() < 2) throw ValidationError("/waypoints", "at least two waypoints are required");
    for (std::size_t k = 1; k < wps.size(); ++k) {
        if (!(wps[k].time > wps[k - 1].time)) {
            throw ValidationError("/waypoints/" + std::to_string(k) + "/time", "waypoint times must be strictly increasing");
        }
    }
    if (steps < 1 || !(dt > 0.0)) throw ValidationError("/steps", "need steps >= 1 and dt > 0");
    if (wps.front().time > 0.0 || wps.back().time < steps * dt - 1e-9) {
        throw ValidationError("/waypoints", "waypoint times must cover [0, steps*dt]");
    }

    constexpr double kMinSpeed = 1e-9;
    const auto count = static_cast<std::size_t>(steps) + 1;
    std::vector<Vec2> velocity(count);
    {
        std::size_t k = 1;
        while (k + 1 < wps.size() && wps[k].time <= 0.0) ++k;
        velocity[0] = (wps[k].position - wps[k - 1].position) / (wps[k].time - wps[k - 1].time);
    }
    for (std::size_t n = 1; n < count; ++n) {
        const double t = static_cast<double>(n) * dt;
        velocity[n] = (waypoint_position(wps, t) - waypoint_position(wps, t - dt)) / dt;
    }

    // Initial heading: first nonzero velocity, so a track starting at rest
    // faces the way it will move.
    double heading = 0.0;
    for (const Vec2& v : velocity) {
        if (v.norm() >= kMinSpeed) {
            heading = std::atan2(v.y(), v.x());
            break;
        }
    }

    std::vector<MtState> states(count);
    states[0].position = wps.front().time == 0.0 ? wps.front().position : waypoint_position(wps, 0.0);
    for (std::size_t n = 0; n < count; ++n) {
        if (n > 0) states[n].position = states[n - 1].position + 0.5 * (velocity[n - 1] + velocity[n]) * dt;
        states[n].velocity = velocity[n];
        if (velocity[n].norm() >= kMinSpeed) heading = std::atan2(velocity[n].y(), velocity[n].x());
        states[n].heading = wrap_angle(heading);
    }
    return states;
}

}  // namespace mpslam
