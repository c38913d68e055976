#pragma once

#include <string>

#include "tapkit/dataset.hpp"

namespace tapkit::fusion {

struct RefineConfig {
  /// Replacement requires max tIoU strictly above this.
  double iou_threshold = 0.75;
  void validate() const;
};

struct NmsConfig {
  double iou_threshold = 0.8;
  int max_output = 100;
  void validate() const;
};

enum class NmsPlacement { kBefore, kAfter, kOff };

std::string to_string(NmsPlacement p);
NmsPlacement nms_placement_from_string(const std::string& s);

/// Each TAG proposal nominates its best-matching SSAD proposal when
/// the match beats the threshold; an SSAD proposal with several nominations
/// takes the boundaries of the highest-IoU one and keeps its own score.
ProposalSet refine(const ProposalSet& ssad, const ProposalSet& tag, const RefineConfig& cfg);

/// Greedy suppression of proposals with tIoU above the threshold against an
/// accepted one; identical intervals are always suppressed. Truncates to
/// cfg.max_output.
ProposalSet nms(const ProposalSet& proposals, const NmsConfig& cfg);

/// SSAD proposals -> [refine] -> NMS (at `placement`) -> top max_output.
ProposalSet finalize(const ProposalSet& ssad, const ProposalSet* tag, const RefineConfig& refine_cfg,
                     const NmsConfig& nms_cfg, NmsPlacement placement);

}  // namespace tapkit::fusion
