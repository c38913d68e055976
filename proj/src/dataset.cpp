#include "tapkit/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "tapkit/error.hpp"

namespace tapkit {

bool proposal_before(const Proposal& a, const Proposal& b) noexcept {
  if (a.score != b.score) return a.score > b.score;
  if (a.interval.start() != b.interval.start()) return a.interval.start() < b.interval.start();
  return a.interval.length() < b.interval.length();
}

ProposalSet::ProposalSet(std::string video_id, std::vector<Proposal> proposals)
    : video_id_(std::move(video_id)), proposals_(std::move(proposals)) {
  for (const auto& p : proposals_) {
    if (!std::isfinite(p.score) || p.score < 0.0 || p.score > 1.0)
      throw Error(ErrorCode::kSchema, "proposal score " + std::to_string(p.score) + " for video " +
                                          video_id_ + " outside [0, 1]");
  }
  std::stable_sort(proposals_.begin(), proposals_.end(), proposal_before);
}

ProposalSet ProposalSet::truncated(std::size_t n) const {
  ProposalSet out = *this;
  if (out.proposals_.size() > n) out.proposals_.erase(out.proposals_.begin() + static_cast<std::ptrdiff_t>(n), out.proposals_.end());
  return out;
}

std::string to_string(Subset s) {
  switch (s) {
    case Subset::kTraining: return "training";
    case Subset::kValidation: return "validation";
    case Subset::kTesting: return "testing";
  }
  return "training";
}

Subset subset_from_string(const std::string& s) {
  if (s == "training") return Subset::kTraining;
  if (s == "validation") return Subset::kValidation;
  if (s == "testing") return Subset::kTesting;
  throw Error(ErrorCode::kSchema, "unknown subset \"" + s + "\"");
}

void VideoRecord::validate() const {
  if (!(duration > 0.0) || !std::isfinite(duration))
    throw Error(ErrorCode::kSchema, video_id + ".duration: must be positive");
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const auto& iv = instances[i].interval;
    if (iv.start() < 0.0 || iv.end() > duration)
      throw Error(ErrorCode::kSchema, video_id + ".annotations[" + std::to_string(i) +
                                          "].segment: " + to_string(iv) + " outside [0, " +
                                          std::to_string(duration) + "]");
  }
}

DatasetIndex::DatasetIndex(std::map<std::string, VideoRecord> videos, std::vector<std::string> label_set)
    : videos_(std::move(videos)), label_set_(std::move(label_set)) {
  for (const auto& [id, rec] : videos_) {
    rec.validate();
    for (const auto& inst : rec.instances)
      if (!has_label(inst.label))
        throw Error(ErrorCode::kSchema, id + ": label \"" + inst.label + "\" not in label set");
  }
}

DatasetIndex DatasetIndex::from_records(std::vector<VideoRecord> records) {
  std::set<std::string> labels;
  std::map<std::string, VideoRecord> videos;
  for (auto& r : records) {
    for (const auto& inst : r.instances) labels.insert(inst.label);
    std::string id = r.video_id;
    videos.emplace(std::move(id), std::move(r));
  }
  return DatasetIndex(std::move(videos), {labels.begin(), labels.end()});
}

const VideoRecord& DatasetIndex::at(const std::string& video_id) const {
  auto it = videos_.find(video_id);
  if (it == videos_.end()) throw Error(ErrorCode::kIdMismatch, "unknown video \"" + video_id + "\"");
  return it->second;
}

bool DatasetIndex::has_label(const std::string& label) const {
  return std::find(label_set_.begin(), label_set_.end(), label) != label_set_.end();
}

std::vector<std::string> DatasetIndex::ids(Subset subset) const {
  std::vector<std::string> out;
  for (const auto& [id, rec] : videos_)
    if (rec.subset == subset) out.push_back(id);
  return out;
}

DatasetIndex DatasetIndex::filtered(Subset subset) const {
  std::map<std::string, VideoRecord> out;
  for (const auto& [id, rec] : videos_)
    if (rec.subset == subset) out.emplace(id, rec);
  return DatasetIndex(std::move(out), label_set_);
}

}  // namespace tapkit
