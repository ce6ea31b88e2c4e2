#include "godin/linalg.hpp"

#include <cmath>

namespace godin::linalg {

std::optional<std::vector<double>> cholesky(std::span<const double> a, std::size_t d) {
  std::vector<double> l(d * d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    double diag = a[j * d + j];
    for (std::size_t k = 0; k < j; ++k) diag -= l[j * d + k] * l[j * d + k];
    if (!(diag > 0.0) || !std::isfinite(diag)) return std::nullopt;
    const double ljj = std::sqrt(diag);
    l[j * d + j] = ljj;
    for (std::size_t i = j + 1; i < d; ++i) {
      double s = a[i * d + j];
      for (std::size_t k = 0; k < j; ++k) s -= l[i * d + k] * l[j * d + k];
      l[i * d + j] = s / ljj;
    }
  }
  return l;
}

void solve_lower(std::span<const double> lower, std::span<double> b, std::size_t d) {
  for (std::size_t i = 0; i < d; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= lower[i * d + k] * b[k];
    b[i] = s / lower[i * d + i];
  }
}

void solve_lower_transposed(std::span<const double> lower, std::span<double> b, std::size_t d) {
  for (std::size_t i = d; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < d; ++k) s -= lower[k * d + i] * b[k];
    b[i] = s / lower[i * d + i];
  }
}

}  // namespace godin::linalg
