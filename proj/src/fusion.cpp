#include "tapkit/fusion.hpp"

#include <algorithm>
#include <vector>

#include "tapkit/error.hpp"

namespace tapkit::fusion {

void RefineConfig::validate() const {
  if (!(iou_threshold > 0.0 && iou_threshold < 1.0))
    throw Error(ErrorCode::kConfig, "refine: iou_threshold must lie in (0, 1)");
}

void NmsConfig::validate() const {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0))
    throw Error(ErrorCode::kConfig, "nms: iou_threshold must lie in (0, 1]");
  if (max_output < 1) throw Error(ErrorCode::kConfig, "nms: max_output must be >= 1");
}

std::string to_string(NmsPlacement p) {
  switch (p) {
    case NmsPlacement::kBefore: return "before";
    case NmsPlacement::kAfter: return "after";
    case NmsPlacement::kOff: return "off";
  }
  return "after";
}

NmsPlacement nms_placement_from_string(const std::string& s) {
  if (s == "before") return NmsPlacement::kBefore;
  if (s == "after") return NmsPlacement::kAfter;
  if (s == "off") return NmsPlacement::kOff;
  throw Error(ErrorCode::kConfig, "nms placement must be before, after or off (got \"" + s + "\")");
}

ProposalSet refine(const ProposalSet& ssad, const ProposalSet& tag, const RefineConfig& cfg) {
  cfg.validate();
  if (ssad.video_id() != tag.video_id())
    throw Error(ErrorCode::kIdMismatch,
                "refine: anchor proposals are for \"" + ssad.video_id() + "\", grouped proposals for \"" + tag.video_id() + "\"");
  const auto& ps = ssad.proposals();
  const std::size_t n = ps.size();
  std::vector<double> starts(n), ends(n), iou(n);
  for (std::size_t i = 0; i < n; ++i) {
    starts[i] = ps[i].interval.start();
    ends[i] = ps[i].interval.end();
  }

  // Best nomination per SSAD proposal: (iou, tag index).
  std::vector<double> best_iou(n, -1.0);
  std::vector<std::size_t> best_tag(n, 0);
  const auto& ts = tag.proposals();
  for (std::size_t t = 0; t < ts.size() && n > 0; ++t) {
    tiou_many(ts[t].interval, starts, ends, iou);
    std::size_t arg = 0;
    for (std::size_t i = 1; i < n; ++i) {
      if (iou[i] > iou[arg] || (iou[i] == iou[arg] && starts[i] < starts[arg])) arg = i;
    }
    if (!(iou[arg] > cfg.iou_threshold)) continue;
    if (iou[arg] > best_iou[arg]) {
      best_iou[arg] = iou[arg];
      best_tag[arg] = t;
    }
  }

  std::vector<Proposal> out = ps;
  for (std::size_t i = 0; i < n; ++i) {
    if (best_iou[i] < 0.0) continue;
    out[i].interval = ts[best_tag[i]].interval;
    out[i].source = ProposalSource::kRefined;
  }
  return ProposalSet(ssad.video_id(), std::move(out));
}

ProposalSet nms(const ProposalSet& proposals, const NmsConfig& cfg) {
  cfg.validate();
  std::vector<Proposal> kept;
  std::vector<double> starts, ends, iou;
  for (const auto& p : proposals.proposals()) {
    if (static_cast<int>(kept.size()) >= cfg.max_output) break;
    iou.resize(kept.size());
    tiou_many(p.interval, starts, ends, iou);
    bool suppressed = false;
    for (std::size_t k = 0; k < kept.size() && !suppressed; ++k)
      suppressed = iou[k] > cfg.iou_threshold || kept[k].interval == p.interval;
    if (suppressed) continue;
    kept.push_back(p);
    starts.push_back(p.interval.start());
    ends.push_back(p.interval.end());
  }
  return ProposalSet(proposals.video_id(), std::move(kept));
}

ProposalSet finalize(const ProposalSet& ssad, const ProposalSet* tag, const RefineConfig& refine_cfg,
                     const NmsConfig& nms_cfg, NmsPlacement placement) {
  ProposalSet current = ssad;
  if (placement == NmsPlacement::kBefore) {
    NmsConfig unbounded = nms_cfg;
    unbounded.max_output = static_cast<int>(std::max<std::size_t>(1, current.size()));
    current = nms(current, unbounded);
  }
  if (tag != nullptr) current = refine(current, *tag, refine_cfg);
  if (placement == NmsPlacement::kAfter) return nms(current, nms_cfg);
  return current.truncated(static_cast<std::size_t>(nms_cfg.max_output));
}

}  // namespace tapkit::fusion
