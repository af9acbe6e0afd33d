#include <mpslam/association.hpp>
#include <mpslam/errors.hpp>

#include <algorithm>
#include <cmath>

namespace mpslam {

using Eigen::Index;

bool exclusion_psi(std::size_t a_k, std::size_t m, std::size_t abar_m, std::size_t k) {
    if (a_k == m && abar_m != k) return false;
    if (abar_m == k && a_k != m) return false;
    return true;
}

namespace {

void normalize_rows(Eigen::MatrixXd& table) {
    for (Index r = 0; r < table.rows(); ++r) {
        const double sum = table.row(r).sum();
        if (sum > 0.0) {
            table.row(r) /= sum;
        } else {
            table.row(r).setZero();
            table(r, 0) = 1.0;
        }
    }
}

}  // namespace

AssociationMarginals loopy_da(const AssociationProblem& problem, const BpOptions& options) {
    const Index K = problem.evidence.rows();
    const Index M = problem.evidence.cols();

    // Each target row is scaled by its largest weight; the ratios below are
    // invariant to that and it keeps the magnitudes near one.
    Eigen::MatrixXd beta = problem.evidence;
    Eigen::VectorXd beta0 = problem.missed;
    for (Index k = 0; k < K; ++k) {
        const double scale = std::max(beta0(k), beta.row(k).size() ? beta.row(k).maxCoeff() : 0.0);
        if (scale > 0.0) {
            beta.row(k) /= scale;
            beta0(k) /= scale;
        }
    }
    const Eigen::VectorXd& xi = problem.unassigned;

    AssociationMarginals result;
    // nu(k, m): message measurement m -> target k; phi(k, m): target k -> measurement m.
    Eigen::MatrixXd nu = Eigen::MatrixXd::Ones(K, M);
    Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(K, M);
    result.converged = (K == 0 || M == 0);

    auto normalized = [](double v) { return std::isinf(v) ? 1.0 : v / (1.0 + v); };

    for (int it = 0; it < options.max_iterations && K > 0 && M > 0; ++it) {
        // target -> measurement
        for (Index k = 0; k < K; ++k) {
            double total = beta0(k);
            for (Index m = 0; m < M; ++m) total += beta(k, m) * nu(k, m);
            for (Index m = 0; m < M; ++m) {
                const double denom = total - beta(k, m) * nu(k, m);
                phi(k, m) = denom > 0.0 ? beta(k, m) / denom : (beta(k, m) > 0.0 ? HUGE_VAL : 0.0);
            }
        }
        // measurement -> target, damped
        double change = 0.0;
        for (Index m = 0; m < M; ++m) {
            double total = xi(m);
            for (Index k = 0; k < K; ++k) total += phi(k, m);
            for (Index k = 0; k < K; ++k) {
                // Only pairs with positive evidence carry information.
                if (!(beta(k, m) > 0.0)) {
                    nu(k, m) = 0.0;
                    continue;
                }
                const double denom = total - phi(k, m);
                const double fresh = denom > 0.0 ? 1.0 / denom : HUGE_VAL;
                const double next = std::isinf(fresh) || std::isinf(nu(k, m))
                                        ? fresh
                                        : options.damping * nu(k, m) + (1.0 - options.damping) * fresh;
                change = std::max(change, std::abs(normalized(next) - normalized(nu(k, m))));
                nu(k, m) = next;
            }
        }
        result.iterations = it + 1;
        if (change < options.tolerance) {
            result.converged = true;
            break;
        }
    }

    // Final target -> measurement messages consistent with the last nu.
    for (Index k = 0; k < K; ++k) {
        double total = beta0(k);
        for (Index m = 0; m < M; ++m) total += beta(k, m) * nu(k, m);
        for (Index m = 0; m < M; ++m) {
            const double denom = total - beta(k, m) * nu(k, m);
            phi(k, m) = denom > 0.0 ? beta(k, m) / denom : (beta(k, m) > 0.0 ? HUGE_VAL : 0.0);
        }
    }

    result.target.resize(K, M + 1);
    for (Index k = 0; k < K; ++k) {
        result.target(k, 0) = beta0(k);
        for (Index m = 0; m < M; ++m) result.target(k, m + 1) = beta(k, m) * nu(k, m);
        // An infinite message means the pairing is forced.
        if (!result.target.row(k).allFinite()) {
            for (Index c = 0; c <= M; ++c) result.target(k, c) = std::isinf(result.target(k, c)) ? 1.0 : 0.0;
        }
    }
    normalize_rows(result.target);

    result.measurement.resize(M, K + 1);
    for (Index m = 0; m < M; ++m) {
        result.measurement(m, 0) = xi(m);
        for (Index k = 0; k < K; ++k) result.measurement(m, k + 1) = phi(k, m);
        if (!result.measurement.row(m).allFinite()) {
            for (Index c = 0; c <= K; ++c) {
                result.measurement(m, c) = std::isinf(result.measurement(m, c)) ? 1.0 : 0.0;
            }
        }
    }
    normalize_rows(result.measurement);

    // nu is a ratio of measurement-side messages and does not depend on the
    // target row scaling.
    result.measurement_to_target = nu;
    return result;
}

AssociationMarginals brute_force_da(const AssociationProblem& problem) {
    const Index K = problem.evidence.rows();
    const Index M = problem.evidence.cols();
    if (K > 6 || M > 6) throw SizeLimit("brute_force_da supports at most 6 targets and 6 measurements");

    AssociationMarginals result;
    result.target = Eigen::MatrixXd::Zero(K, M + 1);
    result.measurement = Eigen::MatrixXd::Zero(M, K + 1);

    std::vector<Index> assignment(static_cast<std::size_t>(K), 0);  // 0 = missed, m+1 = measurement m
    std::vector<bool> used(static_cast<std::size_t>(M), false);

    auto accumulate = [&]() {
        double weight = 1.0;
        for (Index k = 0; k < K; ++k) {
            const Index a = assignment[static_cast<std::size_t>(k)];
            weight *= a == 0 ? problem.missed(k) : problem.evidence(k, a - 1);
        }
        for (Index m = 0; m < M; ++m) {
            if (!used[static_cast<std::size_t>(m)]) weight *= problem.unassigned(m);
        }
        if (weight == 0.0) return;
        for (Index k = 0; k < K; ++k) result.target(k, assignment[static_cast<std::size_t>(k)]) += weight;
        for (Index m = 0; m < M; ++m) {
            Index owner = 0;
            for (Index k = 0; k < K; ++k) {
                if (assignment[static_cast<std::size_t>(k)] == m + 1) owner = k + 1;
            }
            result.measurement(m, owner) += weight;
        }
    };

    auto recurse = [&](auto&& self, Index k) -> void {
        if (k == K) {
            accumulate();
            return;
        }
        assignment[static_cast<std::size_t>(k)] = 0;
        self(self, k + 1);
        for (Index m = 0; m < M; ++m) {
            if (used[static_cast<std::size_t>(m)]) continue;
            used[static_cast<std::size_t>(m)] = true;
            assignment[static_cast<std::size_t>(k)] = m + 1;
            self(self, k + 1);
            used[static_cast<std::size_t>(m)] = false;
        }
        assignment[static_cast<std::size_t>(k)] = 0;
    };
    recurse(recurse, 0);

    normalize_rows(result.target);
    normalize_rows(result.measurement);
    return result;
}

std::vector<double> coop_association(std::span<const double> evidence, double missed) {
    std::vector<double> p;
    p.reserve(evidence.size() + 1);
    p.push_back(missed);
    double total = missed;
    for (double e : evidence) {
        p.push_back(e);
        total += e;
    }
    if (!(total > 0.0) || !std::isfinite(total)) {
        throw DegenerateEvidence("cooperative association weights are all zero or not finite");
    }
    for (double& v : p) v /= total;
    return p;
}

}  // namespace mpslam
