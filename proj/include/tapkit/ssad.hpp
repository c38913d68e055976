#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "tapkit/dataset.hpp"
#include "tapkit/engine/layers.hpp"
#include "tapkit/features.hpp"

namespace tapkit::ssad {

struct SsadConfig {
  int input_length = 256;
  int feature_dim = 16;
  int hidden = 32;
  int base_kernel = 9;
  std::vector<int> layer_lengths{1, 2, 4, 8, 16, 32, 64};
  std::vector<double> ratios{0.5, 0.75, 1.0};
  int epochs = 30;
  int batch_size = 4;
  double lr = 1e-3;
  int top_k = 200;

  /// Throws kConfig. input_length must be divisible by 4 and layer_lengths
  /// must be exactly the halving chain 1, 2, ..., input_length / 4.
  void validate() const;
};

struct Anchor {
  int layer = 0;
  int cell = 0;
  int ratio_index = 0;
  TemporalInterval interval{0.0, 1.0};
};

/// Default anchors of every prediction layer on [0, 1], ordered by
/// (layer, cell, ratio).
struct AnchorPyramid {
  std::vector<int> layer_lengths;
  std::vector<double> ratios;
  std::vector<Anchor> anchors;

  std::size_t size() const noexcept { return anchors.size(); }
};

AnchorPyramid build_anchor_pyramid(const std::vector<int>& layer_lengths,
                                   const std::vector<double>& ratios);
inline AnchorPyramid build_anchor_pyramid(const SsadConfig& cfg) {
  return build_anchor_pyramid(cfg.layer_lengths, cfg.ratios);
}

/// Per-anchor max tIoU against the normalized ground truth (0 if none).
std::vector<double> assign_targets(const AnchorPyramid& pyramid,
                                   std::span<const TemporalInterval> gt);

/// Base conv(k, s=1) + relu, two stride-2 convs down to input_length / 4,
/// then stride-2 blocks down to length 1. Each map feeds a k=3 prediction
/// conv with one sigmoid output per ratio.
engine::Model<float> build_model(const SsadConfig& cfg, std::uint64_t seed);

/// Runs the pyramid graph held in a Model with kind kSsad.
template <class Real>
class SsadNet {
 public:
  SsadNet(engine::Model<Real>& model, std::vector<int> layer_lengths, int num_ratios);

  /// x: (N, D, input_length) -> scores (N, 1, anchors) in anchor order.
  engine::Tensor3<Real> forward(const engine::Tensor3<Real>& x);
  void backward(const engine::Tensor3<Real>& grad_scores);

  std::size_t num_maps() const noexcept { return layer_lengths_.size(); }

 private:
  engine::Model<Real>* model_;
  std::vector<int> layer_lengths_;  // ascending
  int num_ratios_;
  std::vector<engine::Tensor3<Real>> head_out_;  // generation order: longest map first
};

/// Stacks resized features of several videos into one (N, D, L) tensor.
engine::Tensor3<float> stack_features(std::span<const FeatureSequence* const> seqs);

/// Overlap-only training: MSE between predicted and assigned overlaps over
/// all anchors, Adam, per-epoch shuffled mini-batches of whole videos.
/// `features` must already be resized to cfg.input_length. Returns the
/// mean loss of each epoch.
std::vector<double> train(engine::Model<float>& model, const DatasetIndex& dataset,
                          const std::map<std::string, FeatureSequence>& features,
                          const SsadConfig& cfg, std::uint64_t seed);

/// One proposal per anchor, denormalized through the video duration,
/// sorted, truncated to cfg.top_k.
ProposalSet infer(engine::Model<float>& model, const FeatureSequence& features,
                  const VideoRecord& video, const SsadConfig& cfg);

}  // namespace tapkit::ssad
