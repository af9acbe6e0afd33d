#include <mpslam/association.hpp>
#include <mpslam/errors.hpp>
#include <mpslam/random.hpp>

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace mpslam;

namespace {

AssociationProblem random_problem(std::size_t k, std::size_t m, RandomStream& rng, double hi = 5.0) {
    AssociationProblem p(k, m);
    for (Eigen::Index r = 0; r < p.evidence.rows(); ++r) {
        p.missed(r) = rng.uniform(0.0, hi);
        for (Eigen::Index c = 0; c < p.evidence.cols(); ++c) p.evidence(r, c) = rng.uniform(0.0, hi);
    }
    for (Eigen::Index c = 0; c < p.unassigned.size(); ++c) p.unassigned(c) = rng.uniform(0.0, hi);
    return p;
}

double max_row_tv(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    double worst = 0.0;
    for (Eigen::Index r = 0; r < a.rows(); ++r) worst = std::max(worst, 0.5 * (a.row(r) - b.row(r)).cwiseAbs().sum());
    return worst;
}

}  // namespace

TEST(Exclusion, TruthTable) {
    EXPECT_TRUE(exclusion_psi(2, 2, 3, 3));   // target 3 -> meas 2, meas 2 -> target 3
    EXPECT_FALSE(exclusion_psi(2, 2, 1, 3));  // target 3 claims meas 2, meas 2 claims target 1
    EXPECT_FALSE(exclusion_psi(0, 2, 3, 3));  // meas 2 claims target 3 but target 3 is missed
    EXPECT_TRUE(exclusion_psi(1, 2, 0, 3));   // unrelated pair
    EXPECT_TRUE(exclusion_psi(0, 2, 0, 3));
}

TEST(LoopyDa, SingleTargetSingleMeasurement) {
    AssociationProblem p(1, 1);
    p.evidence(0, 0) = 1.0;
    p.missed(0) = 1.0;
    p.unassigned(0) = 1.0;
    const auto r = loopy_da(p);
    EXPECT_NEAR(r.target(0, 0), 0.5, 1e-9);
    EXPECT_NEAR(r.target(0, 1), 0.5, 1e-9);
    EXPECT_NEAR(r.measurement(0, 1), 0.5, 1e-9);
    EXPECT_TRUE(r.converged);
}

TEST(LoopyDa, NoTargets) {
    AssociationProblem p(0, 3);
    const auto r = loopy_da(p);
    EXPECT_EQ(r.target.rows(), 0);
    ASSERT_EQ(r.measurement.rows(), 3);
    for (int m = 0; m < 3; ++m) EXPECT_EQ(r.measurement(m, 0), 1.0);
}

TEST(LoopyDa, NoMeasurements) {
    AssociationProblem p(2, 0);
    const auto r = loopy_da(p);
    ASSERT_EQ(r.target.rows(), 2);
    EXPECT_EQ(r.target(0, 0), 1.0);
    EXPECT_EQ(r.target(1, 0), 1.0);
}

TEST(LoopyDa, DiagonalProblemIsExact) {
    // one candidate per target: the graph is a forest and BP is exact
    AssociationProblem p(3, 3);
    const double b[3] = {0.5, 2.0, 4.0};
    const double b0[3] = {1.0, 1.0, 0.25};
    const double xi[3] = {1.0, 3.0, 1.0};
    for (int k = 0; k < 3; ++k) {
        p.evidence(k, k) = b[k];
        p.missed(k) = b0[k];
        p.unassigned(k) = xi[k];
    }
    const auto r = loopy_da(p, {1000, 1e-12, 0.5});
    for (int k = 0; k < 3; ++k) {
        const double detected = b[k] / (b[k] + b0[k] * xi[k]);
        EXPECT_NEAR(r.target(k, k + 1), detected, 1e-9);
        EXPECT_NEAR(r.target(k, 0), 1.0 - detected, 1e-9);
    }
}

TEST(LoopyDa, DominantEvidence) {
    AssociationProblem p(2, 2);
    p.evidence << 1e6, 1.0, 1.0, 1e6;
    const auto r = loopy_da(p);
    EXPECT_GT(r.target(0, 1), 0.999);
    EXPECT_GT(r.target(1, 2), 0.999);
}

TEST(LoopyDa, MatchesBruteForceSmall) {
    RandomStream rng(21);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t k = 1 + rng.index(3);
        const std::size_t m = 1 + rng.index(3);
        const AssociationProblem p = random_problem(k, m, rng);
        const auto bp = loopy_da(p, {1000, 1e-10, 0.5});
        const auto exact = brute_force_da(p);
        EXPECT_TRUE(bp.converged);
        if (k == 1 || m == 1) {
            // tree-structured graph: exact
            EXPECT_LT(max_row_tv(bp.target, exact.target), 1e-6) << "trial " << trial;
        }
        EXPECT_LT(max_row_tv(bp.target, exact.target), 0.1) << "trial " << trial;
    }
}

TEST(LoopyDa, RowsAreDistributions) {
    RandomStream rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const auto r = loopy_da(random_problem(1 + rng.index(5), 1 + rng.index(5), rng));
        for (Eigen::Index i = 0; i < r.target.rows(); ++i) {
            EXPECT_NEAR(r.target.row(i).sum(), 1.0, 1e-12);
            EXPECT_GE(r.target.row(i).minCoeff(), 0.0);
        }
        for (Eigen::Index i = 0; i < r.measurement.rows(); ++i) EXPECT_NEAR(r.measurement.row(i).sum(), 1.0, 1e-12);
    }
}

TEST(LoopyDa, PermutationEquivariance) {
    RandomStream rng(4);
    const AssociationProblem p = random_problem(3, 4, rng);
    AssociationProblem q(3, 4);
    const int perm_k[3] = {2, 0, 1};
    const int perm_m[4] = {3, 1, 0, 2};
    for (int k = 0; k < 3; ++k) {
        q.missed(k) = p.missed(perm_k[k]);
        for (int m = 0; m < 4; ++m) q.evidence(k, m) = p.evidence(perm_k[k], perm_m[m]);
    }
    for (int m = 0; m < 4; ++m) q.unassigned(m) = p.unassigned(perm_m[m]);
    const auto a = loopy_da(p);
    const auto b = loopy_da(q);
    for (int k = 0; k < 3; ++k) {
        EXPECT_NEAR(b.target(k, 0), a.target(perm_k[k], 0), 1e-9);
        for (int m = 0; m < 4; ++m) EXPECT_NEAR(b.target(k, m + 1), a.target(perm_k[k], perm_m[m] + 1), 1e-9);
    }
}

TEST(LoopyDa, ScalingInvariance) {
    RandomStream rng(6);
    const AssociationProblem p = random_problem(3, 3, rng);
    AssociationProblem q = p;
    q.evidence.row(1) *= 1e-7;
    q.missed(1) *= 1e-7;
    q.evidence.col(2) *= 1e5;
    q.unassigned(2) *= 1e5;
    const auto a = loopy_da(p, {1000, 1e-12, 0.5});
    const auto b = loopy_da(q, {1000, 1e-12, 0.5});
    EXPECT_LT(max_row_tv(a.target, b.target), 1e-9);
    EXPECT_LT(max_row_tv(a.measurement, b.measurement), 1e-9);
}

TEST(LoopyDa, ZeroEvidenceMeasurementIsUninformative) {
    AssociationProblem p(2, 2);
    p.evidence << 2.0, 0.0, 1.0, 0.0;
    p.unassigned(1) = 0.0;  // nothing can explain measurement 2
    const auto r = loopy_da(p);
    EXPECT_EQ(r.measurement_to_target(0, 1), 0.0);
    EXPECT_EQ(r.measurement_to_target(1, 1), 0.0);
    EXPECT_EQ(r.target(0, 2), 0.0);
    EXPECT_TRUE(r.target.allFinite());
}

TEST(LoopyDa, MessagesReproduceMarginals) {
    RandomStream rng(8);
    const AssociationProblem p = random_problem(3, 2, rng);
    const auto r = loopy_da(p);
    for (Eigen::Index k = 0; k < 3; ++k) {
        double total = p.missed(k);
        for (Eigen::Index m = 0; m < 2; ++m) total += p.evidence(k, m) * r.measurement_to_target(k, m);
        for (Eigen::Index m = 0; m < 2; ++m) {
            EXPECT_NEAR(p.evidence(k, m) * r.measurement_to_target(k, m) / total, r.target(k, m + 1), 1e-9);
        }
    }
}

TEST(BruteForce, SizeLimit) {
    EXPECT_THROW(brute_force_da(AssociationProblem(7, 2)), SizeLimit);
    EXPECT_THROW(brute_force_da(AssociationProblem(2, 7)), SizeLimit);
}

TEST(BruteForce, HandExample) {
    // K = M = 1: joint weights are missed*unassigned and evidence
    AssociationProblem p(1, 1);
    p.evidence(0, 0) = 3.0;
    p.missed(0) = 0.5;
    p.unassigned(0) = 2.0;
    const auto r = brute_force_da(p);
    EXPECT_NEAR(r.target(0, 1), 3.0 / 4.0, 1e-15);
}

TEST(CoopAssociation, Posterior) {
    const std::vector<double> evidence{3.0};
    const auto p = coop_association(evidence, 1.0);
    ASSERT_EQ(p.size(), 2u);
    EXPECT_NEAR(p[1], 0.75, 1e-15);
    EXPECT_NEAR(p[0], 0.25, 1e-15);
    const auto none = coop_association(std::vector<double>{}, 2.0);
    ASSERT_EQ(none.size(), 1u);
    EXPECT_EQ(none[0], 1.0);
    EXPECT_THROW(coop_association(std::vector<double>{0.0, 0.0}, 0.0), DegenerateEvidence);
}

TEST(CoopAssociation, MatchesEnumeration) {
    // at most one measurement is the LOS path: enumerate the M + 1 hypotheses
    RandomStream rng(10);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t m = 1 + rng.index(5);
        std::vector<double> e(m);
        for (double& v : e) v = rng.uniform(0.0, 5.0);
        const double missed = rng.uniform(0.0, 5.0);
        std::vector<double> joint{missed};
        joint.insert(joint.end(), e.begin(), e.end());
        const double z = std::accumulate(joint.begin(), joint.end(), 0.0);
        const auto p = coop_association(e, missed);
        for (std::size_t i = 0; i <= m; ++i) EXPECT_NEAR(p[i], joint[i] / z, 1e-12);
    }
}
