#pragma once

#include <map>
#include <string>
#include <vector>

#include "tapkit/dataset.hpp"
#include "tapkit/results_io.hpp"

namespace tapkit::eval {

/// 0.50, 0.55, ..., 0.95.
std::vector<double> default_tiou_grid();

using GroundTruthMap = std::map<std::string, std::vector<TemporalInterval>>;

GroundTruthMap ground_truth(const DatasetIndex& dataset);

/// Pooled recall of the top-AN proposals per video at one tIoU threshold.
/// Only videos in `gt` count; throws kUndefinedMetric without instances.
double recall(const ProposalMap& proposals, const GroundTruthMap& gt, int an, double theta);

double average_recall(const ProposalMap& proposals, const GroundTruthMap& gt, int an,
                      const std::vector<double>& grid);

struct ArAnCurve {
  std::vector<double> ar;  // ar[k] is AR at AN = k + 1
  double area = 0.0;
};

ArAnCurve ar_an(const ProposalMap& proposals, const GroundTruthMap& gt, int an_max,
                const std::vector<double>& grid);

/// Duplicates every proposal for each of the video's top_c classes with
/// score = proposal score * class confidence.
LocalizationResult attach_labels(const ProposalMap& proposals, const ClassificationResult& classes,
                                 int top_c = 1);

struct ClassPrediction {
  std::string video_id;
  TemporalInterval interval;
  double score;
};

/// All-points interpolated AP of one class; gt maps video -> instances of
/// that class. Zero gt instances throw kUndefinedMetric.
double average_precision(std::vector<ClassPrediction> predictions,
                         const std::map<std::string, std::vector<TemporalInterval>>& gt, double theta);

struct MapReport {
  double map = 0.0;
  std::map<std::string, double> ap;
  /// Classes without ground truth, left out of the mean.
  std::vector<std::string> excluded;
};

MapReport mean_ap(const LocalizationResult& localization, const DatasetIndex& dataset, double theta);
double average_map(const LocalizationResult& localization, const DatasetIndex& dataset,
                   const std::vector<double>& grid);

/// average_map after keeping only the n best entries per video.
double eval_at_n(const LocalizationResult& localization, const DatasetIndex& dataset, int n,
                 const std::vector<double>& grid);

LocalizationResult truncate_per_video(const LocalizationResult& localization, int n);

}  // namespace tapkit::eval
