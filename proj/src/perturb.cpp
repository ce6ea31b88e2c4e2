#include "godin/perturb.hpp"

#include <algorithm>
#include <cstdio>
#include <exception>
#include <ostream>
#include <stdexcept>

namespace godin {

Tensor perturb(const Tensor& x, const ScoreFunction& score, double epsilon) {
  if (!(epsilon >= 0.0)) throw std::invalid_argument("perturb: epsilon must be >= 0");
  if (epsilon == 0.0) return x.clone().set_requires_grad(false);

  std::vector<double> direction;
  {
    GradTape tape;
    Tensor input = x.clone().set_requires_grad(true);
    const Tensor total = sum(score(input));
    direction = grad(total, {input})[0].values();
  }
  std::vector<double> out(x.values());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double g = direction[i];
    if (g > 0.0) {
      out[i] += epsilon;
    } else if (g < 0.0) {
      out[i] -= epsilon;
    }
  }
  return Tensor(x.shape(), std::move(out));
}

std::vector<double> perturbed_scores(const ScoreFunction& score, const Tensor& x, double epsilon,
                                     std::size_t chunk) {
  std::vector<double> out;
  const std::size_t n = x.rank() == 2 ? x.dim(0) : 0;
  out.reserve(n);
  for (std::size_t begin = 0; begin < n; begin += chunk) {
    const std::size_t end = std::min(n, begin + chunk);
    const Tensor moved = perturb(slice_rows(x, begin, end), score, epsilon);
    const Tensor s = score(moved);
    out.insert(out.end(), s.values().begin(), s.values().end());
  }
  return out;
}

EpsilonSearchResult select_epsilon(const LabeledSet& val_set, const ScoreFunction& score,
                                   std::string score_name, std::span<const double> grid) {
  if (val_set.tag != SetTag::Val) {
    throw std::invalid_argument("select_epsilon: expects the in-distribution validation set, got " +
                                std::string(to_string(val_set.tag)));
  }
  if (val_set.size() == 0) throw std::invalid_argument("select_epsilon: empty validation set");
  if (grid.empty()) throw std::invalid_argument("select_epsilon: empty grid");

  EpsilonSearchResult result;
  result.score_name = std::move(score_name);
  result.grid.assign(grid.begin(), grid.end());
  result.mean_scores.assign(grid.size(), 0.0);

  std::exception_ptr failure;
  const auto points = static_cast<long>(grid.size());
#pragma omp parallel for schedule(dynamic)
  for (long p = 0; p < points; ++p) {
    try {
      const auto scores = perturbed_scores(score, val_set.inputs, grid[static_cast<std::size_t>(p)]);
      double total = 0.0;
      for (double s : scores) total += s;
      result.mean_scores[static_cast<std::size_t>(p)] = total / static_cast<double>(scores.size());
    } catch (...) {
#pragma omp critical(godin_select_epsilon)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  std::size_t best = 0;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double m = result.mean_scores[i], b = result.mean_scores[best];
    if (m > b || (m == b && grid[i] < grid[best])) best = i;
  }
  result.argmax_epsilon = grid[best];
  result.epsilon = result.argmax_epsilon / 2.0;
  return result;
}

void write_epsilon_csv(std::ostream& out, const EpsilonSearchResult& result,
                       std::string_view header_comment) {
  if (!header_comment.empty()) out << "# " << header_comment << '\n';
  out << "epsilon,mean_score\n";
  char buf[96];
  for (std::size_t i = 0; i < result.grid.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", result.grid[i], result.mean_scores[i]);
    out << buf;
  }
}

}  // namespace godin
