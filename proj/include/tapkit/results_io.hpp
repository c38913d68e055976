#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "tapkit/dataset.hpp"

namespace tapkit {

DatasetIndex load_annotations(const std::filesystem::path& path);
DatasetIndex parse_annotations(const std::string& text);
void save_annotations(const DatasetIndex& index, const std::filesystem::path& path);

struct LabeledSegment {
  std::string label;
  TemporalInterval interval;
  double score;
};

/// Per video, entries sorted by score (standard tie-break).
using LocalizationResult = std::map<std::string, std::vector<LabeledSegment>>;

struct ClassScore {
  std::string label;
  double score;
};
/// video_id -> classes by descending confidence.
using ClassificationResult = std::map<std::string, std::vector<ClassScore>>;

void write_proposals(const ProposalMap& proposals, const std::filesystem::path& path);
ProposalMap read_proposals(const std::filesystem::path& path);
ProposalMap parse_proposals(const std::string& text);

void write_localization(const LocalizationResult& result, const std::filesystem::path& path);
LocalizationResult read_localization(const std::filesystem::path& path);
LocalizationResult parse_localization(const std::string& text);

void write_classification(const ClassificationResult& result, const std::filesystem::path& path);
ClassificationResult read_classification(const std::filesystem::path& path);
ClassificationResult parse_classification(const std::string& text);

/// Writes through a temporary sibling and renames into place.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace tapkit
