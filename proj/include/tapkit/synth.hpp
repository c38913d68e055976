#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "tapkit/dataset.hpp"
#include "tapkit/features.hpp"

namespace tapkit {

struct SynthConfig {
  int num_videos = 250;
  /// Fraction of videos assigned to the validation subset (rest: training).
  double validation_fraction = 0.2;
  double min_duration = 60.0;
  double max_duration = 180.0;
  double snippet_length = 1.0;
  int dim = 16;
  int num_classes = 5;
  int min_instances = 1;
  int max_instances = 3;
  /// Instance length as a fraction of the video's snippet count.
  double min_instance_fraction = 0.05;
  double max_instance_fraction = 0.25;
  /// All instances of one video share a class (most real videos hold one).
  bool single_class_per_video = true;
  double signal = 2.0;
  double noise = 1.0;
  std::uint64_t seed = 42;

  void validate() const;
};

struct SyntheticDataset {
  DatasetIndex index;
  std::map<std::string, FeatureSequence> features;
};

/// Deterministic given cfg.seed. Instance boundaries sit on the snippet grid
/// (multiples of duration/T) so snippet-center labels match them exactly.
SyntheticDataset generate_synthetic(const SynthConfig& cfg);

std::string class_name(int c);

}  // namespace tapkit
