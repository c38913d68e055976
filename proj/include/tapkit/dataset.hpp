#pragma once

#include <compare>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tapkit/interval.hpp"

namespace tapkit {

enum class ProposalSource { kSsad, kTag, kRefined, kBaseline };

struct Proposal {
  TemporalInterval interval;
  double score;
  ProposalSource source = ProposalSource::kSsad;
};

/// Global ordering: score descending, then earlier start, then shorter.
bool proposal_before(const Proposal& a, const Proposal& b) noexcept;

/// Scored proposals for one video. The list is kept sorted by
/// proposal_before; every mutation goes through the constructor.
class ProposalSet {
 public:
  ProposalSet() = default;
  ProposalSet(std::string video_id, std::vector<Proposal> proposals);

  const std::string& video_id() const noexcept { return video_id_; }
  const std::vector<Proposal>& proposals() const noexcept { return proposals_; }
  std::size_t size() const noexcept { return proposals_.size(); }
  bool empty() const noexcept { return proposals_.empty(); }

  ProposalSet truncated(std::size_t n) const;

 private:
  std::string video_id_;
  std::vector<Proposal> proposals_;
};

using ProposalMap = std::map<std::string, ProposalSet>;

enum class Subset { kTraining, kValidation, kTesting };

std::string to_string(Subset s);
Subset subset_from_string(const std::string& s);

struct GroundTruthInstance {
  std::string label;
  TemporalInterval interval;
};

struct VideoRecord {
  std::string video_id;
  double duration = 0.0;
  Subset subset = Subset::kTraining;
  std::vector<GroundTruthInstance> instances;

  /// Throws kSchema naming the video when an invariant is broken.
  void validate() const;
};

class DatasetIndex {
 public:
  DatasetIndex() = default;
  DatasetIndex(std::map<std::string, VideoRecord> videos, std::vector<std::string> label_set);

  /// Builds the label set from the instances (sorted, unique).
  static DatasetIndex from_records(std::vector<VideoRecord> records);

  const std::map<std::string, VideoRecord>& videos() const noexcept { return videos_; }
  const std::vector<std::string>& label_set() const noexcept { return label_set_; }
  const VideoRecord& at(const std::string& video_id) const;
  bool has_label(const std::string& label) const;

  std::vector<std::string> ids(Subset subset) const;
  DatasetIndex filtered(Subset subset) const;

 private:
  std::map<std::string, VideoRecord> videos_;
  std::vector<std::string> label_set_;
};

}  // namespace tapkit
