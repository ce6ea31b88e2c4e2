#pragma once

// Input preprocessing x_hat = x + eps * sign(grad_x S(x)) and the choice of
// eps from in-distribution validation inputs alone.

#include <array>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "godin/scorer.hpp"
#include "godin/shiftbench.hpp"

namespace godin {

inline constexpr std::array<double, 6> kEpsilonGrid = {0.0025, 0.005, 0.01, 0.02, 0.04, 0.08};

struct EpsilonSearchResult {
  std::string score_name;
  std::vector<double> grid;
  std::vector<double> mean_scores;  // mean perturbed score per grid value
  double argmax_epsilon = 0.0;
  double epsilon = 0.0;  // argmax_epsilon / 2
};

// sign(0) is 0: coordinates with a zero partial derivative stay put. The
// gradient is taken of the summed batch score; rows do not interact in eval
// mode, so each row moves along its own gradient.
Tensor perturb(const Tensor& x, const ScoreFunction& score, double epsilon);

// Scores of perturb(x) computed chunk by chunk.
std::vector<double> perturbed_scores(const ScoreFunction& score, const Tensor& x, double epsilon,
                                     std::size_t chunk = 256);

// Picks the grid value maximizing the mean perturbed score over the
// validation inputs (ties go to the smaller value), then halves it. Labels
// are never read. Grid points are evaluated concurrently and reduced in grid
// order.
EpsilonSearchResult select_epsilon(const LabeledSet& val_set, const ScoreFunction& score,
                                   std::string score_name = {},
                                   std::span<const double> grid = kEpsilonGrid);

void write_epsilon_csv(std::ostream& out, const EpsilonSearchResult& result,
                       std::string_view header_comment);

}  // namespace godin
