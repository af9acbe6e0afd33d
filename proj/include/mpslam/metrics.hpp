#pragma once

// Evaluation metrics: OSPA between point sets, RMSE, cardinality error and
// empirical error CDFs.

#include <mpslam/angles.hpp>

#include <span>
#include <utility>
#include <vector>

namespace mpslam {

struct OspaParams {
    double cutoff = 1.0;  // m
    double order = 2.0;
};

/// Minimum-cost assignment of every row to a distinct column of a
/// rows x cols cost matrix (row-major, rows <= cols). Returns the column of each row.
std::vector<std::size_t> min_cost_assignment(std::span<const double> cost, std::size_t rows, std::size_t cols);

/// OSPA distance with an exact optimal assignment. Empty vs empty is 0.
double ospa(std::span<const Vec2> x, std::span<const Vec2> y, const OspaParams& params = {});

/// Root mean square of the values. Throws EmptyInput.
double rmse(std::span<const double> errors);

double cardinality_error(std::size_t estimated, std::size_t truth);

/// Empirical CDF of `errors` on the grid 0, step, ..., max (inclusive).
/// Throws EmptyInput.
std::vector<std::pair<double, double>> error_cdf(std::span<const double> errors, double max = 5.0,
                                                 double step = 0.01);

}  // namespace mpslam
