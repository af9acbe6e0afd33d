#pragma once

// Probabilistic data association between legacy PVAs (targets) and the
// measurements of one (BS, MT) pair, using the redundant target-oriented /
// measurement-oriented formulation.

#include <Eigen/Core>

#include <cstddef>
#include <span>
#include <vector>

namespace mpslam {

/// Weights of one association problem. The probability of a joint
/// association is proportional to
///   prod_k (a_k = 0 ? missed[k] : evidence(k, a_k - 1)) * prod_{m unassigned} unassigned[m]
/// over one-to-one maps a. Scaling a whole measurement column (evidence(., m)
/// together with unassigned[m]) leaves the marginals unchanged.
struct AssociationProblem {
    Eigen::MatrixXd evidence;     // K x M, beta_{k,m} >= 0
    Eigen::VectorXd missed;       // K, beta_{k,0}
    Eigen::VectorXd unassigned;   // M, xi_m

    AssociationProblem() = default;
    AssociationProblem(std::size_t targets, std::size_t measurements)
        : evidence(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(targets), static_cast<Eigen::Index>(measurements))),
          missed(Eigen::VectorXd::Ones(static_cast<Eigen::Index>(targets))),
          unassigned(Eigen::VectorXd::Ones(static_cast<Eigen::Index>(measurements))) {}

    std::size_t targets() const { return static_cast<std::size_t>(evidence.rows()); }
    std::size_t measurements() const { return static_cast<std::size_t>(evidence.cols()); }
};

struct AssociationMarginals {
    /// K x (M+1): column 0 is p(a_k = 0), column m is p(a_k = m).
    Eigen::MatrixXd target;
    /// M x (K+1): column 0 is p(abar_m = 0), column k is p(abar_m = k).
    Eigen::MatrixXd measurement;
    /// K x M extrinsic messages from measurement m to target k (ratio of the
    /// message value for a_k = m to that for a_k != m). Used by the PVA and
    /// MT updates. Filled by loopy_da only.
    Eigen::MatrixXd measurement_to_target;
    bool converged = true;
    int iterations = 0;
};

struct BpOptions {
    int max_iterations = 200;
    double tolerance = 1e-6;
    double damping = 0.5;
};

/// Pairwise consistency of the two association representations. Indices are
/// 1-based with 0 meaning "none": returns false iff (a_k = m and abar_m != k)
/// or (abar_m = k and a_k != m).
bool exclusion_psi(std::size_t a_k, std::size_t m, std::size_t abar_m, std::size_t k);

/// Loopy belief propagation over the bipartite association graph with damped
/// synchronous updates. Stops when the largest change of any normalized
/// message falls below the tolerance; `converged` is false otherwise.
AssociationMarginals loopy_da(const AssociationProblem& problem, const BpOptions& options = {});

/// Exact marginals by enumeration of all one-to-one association maps.
/// Throws SizeLimit when K or M exceeds 6.
AssociationMarginals brute_force_da(const AssociationProblem& problem);

/// Posterior over which cooperative measurement (index m >= 1) is the LOS or
/// none of them (index 0). Throws DegenerateEvidence if every weight is zero.
std::vector<double> coop_association(std::span<const double> evidence, double missed);

}  // namespace mpslam
