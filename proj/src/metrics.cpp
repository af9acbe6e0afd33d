#include <mpslam/metrics.hpp>
#include <mpslam/errors.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace mpslam {

std::vector<std::size_t> min_cost_assignment(std::span<const double> cost, std::size_t rows, std::size_t cols) {
    if (rows > cols) throw DomainError("assignment needs rows <= cols");
    if (cost.size() != rows * cols) throw DomainError("cost matrix size mismatch");
    // Hungarian method with potentials; 1-based internal indexing.
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(rows + 1, 0.0), v(cols + 1, 0.0);
    std::vector<std::size_t> p(cols + 1, 0), way(cols + 1, 0);
    for (std::size_t i = 1; i <= rows; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(cols + 1, inf);
        std::vector<bool> used(cols + 1, false);
        do {
            used[j0] = true;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= cols; ++j) {
                if (used[j]) continue;
                const double cur = cost[(i0 - 1) * cols + (j - 1)] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= cols; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<std::size_t> assignment(rows, 0);
    for (std::size_t j = 1; j <= cols; ++j) {
        if (p[j] != 0) assignment[p[j] - 1] = j - 1;
    }
    return assignment;
}

double ospa(std::span<const Vec2> x, std::span<const Vec2> y, const OspaParams& params) {
    if (x.empty() && y.empty()) return 0.0;
    if (x.size() > y.size()) std::swap(x, y);
    const std::size_t m = x.size();
    const std::size_t n = y.size();
    const double c = params.cutoff;
    const double p = params.order;
    double total = 0.0;
    if (m > 0) {
        std::vector<double> cost(m * n);
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < n; ++j) cost[i * n + j] = std::pow(std::min((x[i] - y[j]).norm(), c), p);
        }
        const auto assignment = min_cost_assignment(cost, m, n);
        for (std::size_t i = 0; i < m; ++i) total += cost[i * n + assignment[i]];
    }
    total += std::pow(c, p) * static_cast<double>(n - m);
    return std::pow(total / static_cast<double>(n), 1.0 / p);
}

double rmse(std::span<const double> errors) {
    if (errors.empty()) throw EmptyInput("rmse of an empty sequence");
    double sum = 0.0;
    for (double e : errors) sum += e * e;
    return std::sqrt(sum / static_cast<double>(errors.size()));
}

double cardinality_error(std::size_t estimated, std::size_t truth) {
    return std::abs(static_cast<double>(estimated) - static_cast<double>(truth));
}

std::vector<std::pair<double, double>> error_cdf(std::span<const double> errors, double max, double step) {
    if (errors.empty()) throw EmptyInput("error_cdf of an empty sequence");
    std::vector<double> sorted(errors.begin(), errors.end());
    std::sort(sorted.begin(), sorted.end());
    const auto points = static_cast<std::size_t>(std::llround(max / step));
    std::vector<std::pair<double, double>> out;
    out.reserve(points + 1);
    for (std::size_t i = 0; i <= points; ++i) {
        const double t = static_cast<double>(i) * step;
        const auto count = std::upper_bound(sorted.begin(), sorted.end(), t) - sorted.begin();
        out.emplace_back(t, static_cast<double>(count) / static_cast<double>(sorted.size()));
    }
    return out;
}

}  // namespace mpslam
