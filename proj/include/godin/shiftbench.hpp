#pragma once

// Seeded synthetic benchmark: Gaussian class clusters on a hypersphere, with
// out-of-distribution sets covering semantic shift (held-out classes),
// non-semantic shift (known classes, altered appearance), both, and noise.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "godin/tensor.hpp"

namespace godin {

enum class SetTag { Train, Val, OodSemantic, OodNonSemantic, OodBoth, OodUniform, OodGaussian };

std::string_view to_string(SetTag tag);
SetTag parse_set_tag(std::string_view text);
bool is_labeled(SetTag tag);
// The five OoD tags in a fixed order.
std::span<const SetTag> ood_tags();

struct NonSemanticShift {
  double offset_scale = 0.5;  // mean offset = offset_scale * center_radius along a random unit direction
  double cov_scale = 2.0;     // within-class covariance multiplier
  double rotation_deg = 0.0;  // rotation of class centers in a random 2-plane
};

struct BenchConfig {
  std::size_t input_dim = 16;
  std::size_t id_classes = 8;
  std::size_t heldout_classes = 4;
  std::size_t train_per_class = 200;
  std::size_t val_per_class = 50;
  std::size_t ood_per_class = 50;  // per class for the shifted sets
  std::size_t noise_samples = 400;  // for each of the uniform and gaussian sets
  double center_radius = 4.0;
  double within_class_std = 1.0;
  NonSemanticShift shift;
  std::uint64_t seed = 0;

  void validate() const;
};

struct LabeledSet {
  SetTag tag = SetTag::Train;
  Tensor inputs;            // [N, k]
  std::vector<int> labels;  // present iff the tag is train or val

  std::size_t size() const { return inputs.rank() == 2 ? inputs.dim(0) : 0; }
};

struct Standardizer {
  std::vector<double> mean;
  std::vector<double> stddev;
};

struct BenchData {
  std::map<SetTag, LabeledSet> sets;
  Standardizer standardizer;  // fitted on the raw train split
  // Generating class of every row: ID classes are 0..C-1, held-out classes
  // C..C+H-1, noise rows -1.
  std::map<SetTag, std::vector<int>> origin;

  const LabeledSet& at(SetTag tag) const { return sets.at(tag); }
};

BenchData generate(const BenchConfig& config);

enum class SliceAxis { NumSamples, NumClasses };

// Configs varying one axis; everything else (including the seed, hence the
// held-out OoD class definitions) stays fixed.
std::vector<BenchConfig> ablation_slices(const BenchConfig& base, SliceAxis axis,
                                         std::span<const std::size_t> grid);

// CSV rows: x0..x{k-1},label,tag (label empty for unlabeled sets).
void write_dataset_csv(std::ostream& out, const BenchData& data, std::string_view header_comment);
std::map<SetTag, LabeledSet> read_dataset_csv(std::istream& in);

}  // namespace godin
