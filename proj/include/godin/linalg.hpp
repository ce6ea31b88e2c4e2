#pragma once

// Small dense symmetric-positive-definite helpers (row-major, d x d).

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace godin::linalg {

// Lower-triangular L with L * L^T == a, or nullopt when a is not numerically
// positive definite.
std::optional<std::vector<double>> cholesky(std::span<const double> a, std::size_t d);

// Solves L y = b in place (forward substitution).
void solve_lower(std::span<const double> lower, std::span<double> b, std::size_t d);

// Solves L^T y = b in place (back substitution).
void solve_lower_transposed(std::span<const double> lower, std::span<double> b, std::size_t d);

}  // namespace godin::linalg
