#include <mpslam/errors.hpp>
#include <mpslam/random.hpp>
#include <mpslam/scenario.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <string>

using namespace mpslam;

namespace {

const std::string kMinimal = R"({
  "base_stations": [{"position": [0, 0]}],
  "mobile_terminals": [{"waypoints": [{"position": [1, 1], "time": 0}, {"position": [2, 1], "time": 400}]}]
})";

std::string with_model(const std::string& model) {
    return R"({
  "base_stations": [{"position": [0, 0]}],
  "mobile_terminals": [{"waypoints": [{"position": [1, 1], "time": 0}, {"position": [2, 1], "time": 400}]}],
  "model": )" + model + "}";
}

}  // namespace

TEST(Scenario, MinimalDocumentTakesDefaults) {
    const ScenarioConfig c = load_scenario(kMinimal);
    EXPECT_EQ(c.model.p_d, 0.98);
    EXPECT_EQ(c.model.mu_fa, 5.0);
    EXPECT_EQ(c.model.p_s, 0.999);
    EXPECT_EQ(c.model.p_cf, 0.5);
    EXPECT_EQ(c.model.p_pr, 1e-3);
    EXPECT_EQ(c.model.mu_n, 0.01);
    EXPECT_EQ(c.model.sigma_w, 1e-3);
    EXPECT_EQ(c.model.sigma_a, 1e-3);
    EXPECT_EQ(c.model.particles, 10000u);
    EXPECT_EQ(c.model.detection_mode, DetectionMode::constant);
    EXPECT_EQ(c.radio.bandwidth, 500e6);
    EXPECT_EQ(c.radio.carrier_frequency, 6e9);
    EXPECT_EQ(c.radio.bs_antennas, 4);
    EXPECT_EQ(c.radio.mt_antennas, 4);
    EXPECT_EQ(c.radio.snr_ref_db, 40.0);
    EXPECT_EQ(c.radio.bounce_loss_db, 3.0);
    EXPECT_EQ(c.steps, 400);
    EXPECT_EQ(c.dt, 1.0);
    EXPECT_EQ(c.base_stations.size(), 1u);
    EXPECT_EQ(c.mobile_terminals.size(), 1u);
}

TEST(Scenario, ProbabilityOutOfRange) {
    try {
        load_scenario(with_model(R"({"p_s": 1.5})"));
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_EQ(e.where(), "/model/p_s");
    }
}

TEST(Scenario, UnknownFieldIsSchemaError) {
    EXPECT_THROW(load_scenario(with_model(R"({"p_dd": 0.5})")), SchemaError);
    EXPECT_THROW(load_scenario(R"({"base_stations": []})"), Error);
    EXPECT_THROW(load_scenario("not json"), SchemaError);
}

TEST(Scenario, MissingRequiredField) {
    EXPECT_THROW(load_scenario(R"({"base_stations": [{"position": [0, 0]}]})"), SchemaError);
}

TEST(Scenario, RoundTrip) {
    const ScenarioConfig a = load_scenario_file(MPSLAM_SCENARIO_DIR "/desk.json");
    const ScenarioConfig b = load_scenario(serialize_scenario(a));
    EXPECT_EQ(a, b);
    EXPECT_EQ(serialize_scenario(a), serialize_scenario(b));
}

TEST(Scenario, BundledDefaultCarriesPaperParameters) {
    const ScenarioConfig c = load_scenario_file(MPSLAM_SCENARIO_DIR "/default.json");
    EXPECT_EQ(c.base_stations.size(), 2u);
    EXPECT_EQ(c.walls.size(), 5u);
    EXPECT_EQ(c.model.p_d, 0.98);
    EXPECT_EQ(c.model.mu_fa, 5.0);
    EXPECT_EQ(c.model.mu_n, 0.01);
    EXPECT_EQ(c.model.p_s, 0.999);
    EXPECT_EQ(c.model.p_cf, 0.5);
    EXPECT_EQ(c.model.p_pr, 1e-3);
    EXPECT_EQ(c.model.particles, 10000u);
    EXPECT_EQ(c.model.birth_half_width, 45.0);
    EXPECT_EQ(c.model.imu_heading_std_deg, 10.0);
    EXPECT_EQ(c.radio.bandwidth, 500e6);
    EXPECT_EQ(c.radio.carrier_frequency, 6e9);
    EXPECT_EQ(c.steps, 400);
    EXPECT_EQ(c.dt, 1.0);
    EXPECT_EQ(c.toggles, ExperimentToggles::named("E7"));
}

TEST(Scenario, ExperimentTable) {
    const ExperimentToggles e2 = ExperimentToggles::named("E2");
    EXPECT_TRUE(e2.mimo);
    EXPECT_FALSE(e2.coop);
    EXPECT_TRUE(e2.imu);
    EXPECT_FALSE(e2.pva_fusion);
    const ExperimentToggles e4 = ExperimentToggles::named("E4");
    EXPECT_FALSE(e4.mimo);
    EXPECT_FALSE(e4.coop);
    EXPECT_TRUE(e4.imu);
    EXPECT_TRUE(e4.pva_fusion);
    const ExperimentToggles e7 = ExperimentToggles::named("E7");
    EXPECT_TRUE(e7.mimo && e7.coop && e7.imu && e7.pva_fusion);
    EXPECT_THROW(ExperimentToggles::named("E8"), ValidationError);
}

TEST(Trajectory, StraightLine) {
    const std::vector<Waypoint> wps{{{0, 0}, 0.0}, {{10, 0}, 10.0}};
    const auto track = generate_trajectory(wps, 10, 1.0);
    ASSERT_EQ(track.size(), 11u);
    for (int n = 0; n <= 10; ++n) {
        EXPECT_NEAR(track[n].position.x(), n, 1e-12);
        EXPECT_NEAR(track[n].position.y(), 0.0, 1e-12);
        EXPECT_NEAR(track[n].velocity.x(), 1.0, 1e-12);
        EXPECT_NEAR(track[n].heading, 0.0, 1e-12);
    }
}

TEST(Trajectory, StationaryHoldsHeading) {
    const std::vector<Waypoint> wps{{{0, 0}, 0.0}, {{0, 1}, 1.0}, {{0, 1}, 5.0}};
    const auto track = generate_trajectory(wps, 5, 1.0);
    for (int n = 2; n <= 5; ++n) {
        EXPECT_NEAR(track[n].velocity.norm(), 0.0, 1e-12);
        EXPECT_NEAR(track[n].heading, kPi / 2, 1e-12);
    }
}

TEST(Trajectory, RightAngleTurn) {
    const std::vector<Waypoint> wps{{{0, 0}, 0.0}, {{5, 0}, 5.0}, {{5, 5}, 10.0}};
    const auto track = generate_trajectory(wps, 10, 1.0);
    EXPECT_NEAR(track[5].heading, 0.0, 1e-12);
    EXPECT_NEAR(track[6].heading, kPi / 2, 1e-12);
    // the heading truth agrees with the finite-difference direction of travel
    for (int n = 1; n <= 10; ++n) {
        const Vec2 d = track[n].position - track[n - 1].position;
        if (n != 6) EXPECT_NEAR(std::atan2(d.y(), d.x()), track[n].heading, 1e-12);
    }
}

TEST(Trajectory, RejectsNonMonotoneTimes) {
    const std::vector<Waypoint> wps{{{0, 0}, 0.0}, {{5, 0}, 5.0}, {{5, 5}, 4.0}};
    EXPECT_THROW(generate_trajectory(wps, 4, 1.0), ValidationError);
}

TEST(Trajectory, ContinuousPositions) {
    const ScenarioConfig c = load_scenario_file(MPSLAM_SCENARIO_DIR "/default.json");
    for (const auto& mt : c.mobile_terminals) {
        double v_max = 0.0;
        for (std::size_t k = 1; k < mt.waypoints.size(); ++k) {
            const auto& a = mt.waypoints[k - 1];
            const auto& b = mt.waypoints[k];
            v_max = std::max(v_max, (b.position - a.position).norm() / (b.time - a.time));
        }
        const auto track = generate_trajectory(mt.waypoints, c.steps, c.dt);
        for (std::size_t n = 1; n < track.size(); ++n) {
            EXPECT_LE((track[n].position - track[n - 1].position).norm(), v_max * c.dt + 1e-9);
        }
    }
}

TEST(RandomStreams, Deterministic) {
    RandomStream a = rng_stream(42, 3, "filter");
    RandomStream b = rng_stream(42, 3, "filter");
    for (int i = 0; i < 100; ++i) EXPECT_EQ(a.normal(), b.normal());
}

TEST(RandomStreams, RunsDiffer) {
    RandomStream a = rng_stream(42, 3, "filter");
    RandomStream b = rng_stream(42, 4, "filter");
    int equal = 0;
    for (int i = 0; i < 100; ++i) equal += a.uniform() == b.uniform();
    EXPECT_EQ(equal, 0);
}

TEST(RandomStreams, PurposeTagsUncorrelated) {
    RandomStream a = rng_stream(42, 0, "bs-measurements");
    RandomStream b = rng_stream(42, 0, "filter");
    constexpr int n = 100000;
    double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
    for (int i = 0; i < n; ++i) {
        const double x = a.normal();
        const double y = b.normal();
        sa += x;
        sb += y;
        saa += x * x;
        sbb += y * y;
        sab += x * y;
    }
    const double cov = sab / n - (sa / n) * (sb / n);
    const double rho = cov / std::sqrt((saa / n - std::pow(sa / n, 2)) * (sbb / n - std::pow(sb / n, 2)));
    EXPECT_LT(std::abs(rho), 0.05);
}
