#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "tapkit/dataset.hpp"
#include "tapkit/engine/layers.hpp"
#include "tapkit/features.hpp"

namespace tapkit::tag {

struct TagConfig {
  int hidden = 64;
  std::vector<double> thresholds{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::vector<double> tolerances{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  int min_fragment = 1;
  /// Stop extending a region after two consecutive coverage failures.
  bool scan_cutoff = true;
  int epochs = 30;
  int batch_videos = 1;
  double lr = 1e-3;

  void validate() const;
};

struct ActionnessSequence {
  std::string video_id;
  std::vector<double> values;
};

/// Snippet index range [start, end).
struct Region {
  int start = 0;
  int end = 0;
  int length() const noexcept { return end - start; }
  friend auto operator<=>(const Region&, const Region&) = default;
};

/// 1 where the center of snippet t, (t + 0.5) / T of the duration, lies in
/// some ground-truth instance.
std::vector<double> actionness_targets(const VideoRecord& video, int length);

/// dense(D -> hidden) + relu + dense(hidden -> 1) + sigmoid. The output
/// layer starts at zero, so an untrained model predicts 0.5 everywhere.
engine::Model<float> build_actionness_model(int dim, int hidden, std::uint64_t seed);

/// Per-snippet MSE against actionness_targets on the training subset.
/// Returns the mean loss per epoch.
std::vector<double> train_actionness(engine::Model<float>& model, const DatasetIndex& dataset,
                                     const std::map<std::string, FeatureSequence>& features,
                                     const TagConfig& cfg, std::uint64_t seed);

ActionnessSequence predict_actionness(engine::Model<float>& model, const FeatureSequence& features);

/// Maximal runs of values >= threshold at least `min_fragment` long.
std::vector<Region> find_fragments(std::span<const double> values, double threshold, int min_fragment);

/// Regions spanning fragment i through fragment j whose fragment coverage is
/// at least `tolerance`, deduplicated and sorted.
std::vector<Region> group(std::span<const double> values, double threshold, double tolerance,
                          int min_fragment, bool scan_cutoff = true);

/// Union of group() over the threshold x tolerance grid, converted
/// to seconds as [start, end) * duration / T, scored by mean actionness.
ProposalSet tag_proposals(const ActionnessSequence& actionness, const TagConfig& cfg,
                          const VideoRecord& video);

/// Area under the ROC curve of scores against binary labels (ties count 1/2).
double roc_auc(std::span<const double> scores, std::span<const double> labels);

}  // namespace tapkit::tag
