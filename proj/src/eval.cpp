#include "tapkit/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tapkit/error.hpp"
#include "tapkit/parallel.hpp"

namespace tapkit::eval {
namespace {

constexpr int kNever = std::numeric_limits<int>::max();

// first[g * grid.size() + k]: 0-based rank of the first proposal whose tIoU
// with instance g reaches grid[k], or kNever within the first `limit`.
std::vector<int> first_hit_ranks(const ProposalSet* proposals, const std::vector<TemporalInterval>& gt,
                                 int limit, const std::vector<double>& grid) {
  std::vector<int> first(gt.size() * grid.size(), kNever);
  if (proposals == nullptr || proposals->empty() || gt.empty()) return first;
  const std::size_t n = std::min<std::size_t>(proposals->size(), static_cast<std::size_t>(limit));
  std::vector<double> starts(n), ends(n), iou(n);
  for (std::size_t i = 0; i < n; ++i) {
    starts[i] = proposals->proposals()[i].interval.start();
    ends[i] = proposals->proposals()[i].interval.end();
  }
  for (std::size_t g = 0; g < gt.size(); ++g) {
    tiou_many(gt[g], starts, ends, iou);
    for (std::size_t k = 0; k < grid.size(); ++k) {
      for (std::size_t i = 0; i < n; ++i)
        if (iou[i] >= grid[k]) {
          first[g * grid.size() + k] = static_cast<int>(i);
          break;
        }
    }
  }
  return first;
}

struct RankTable {
  std::size_t total_instances = 0;
  std::vector<int> ranks;  // concatenated first_hit_ranks of all videos
};

RankTable rank_table(const ProposalMap& proposals, const GroundTruthMap& gt, int limit,
                     const std::vector<double>& grid) {
  std::vector<const std::pair<const std::string, std::vector<TemporalInterval>>*> videos;
  for (const auto& entry : gt) videos.push_back(&entry);
  std::vector<std::vector<int>> per_video(videos.size());
  parallel_for(videos.size(), thread_count(), [&](std::size_t begin, std::size_t end, int) {
    for (std::size_t v = begin; v < end; ++v) {
      auto it = proposals.find(videos[v]->first);
      per_video[v] = first_hit_ranks(it == proposals.end() ? nullptr : &it->second, videos[v]->second, limit, grid);
    }
  });
  RankTable t;
  for (const auto* v : videos) t.total_instances += v->second.size();
  if (t.total_instances == 0) throw Error(ErrorCode::kUndefinedMetric, "recall: no ground-truth instances");
  for (auto& r : per_video) t.ranks.insert(t.ranks.end(), r.begin(), r.end());
  return t;
}

// Mean over the grid of pooled recall at AN.
double ar_from_table(const RankTable& t, int an, std::size_t grid_size) {
  double acc = 0.0;
  for (std::size_t k = 0; k < grid_size; ++k) {
    std::size_t hits = 0;
    for (std::size_t g = k; g < t.ranks.size(); g += grid_size)
      if (t.ranks[g] < an) ++hits;
    acc += static_cast<double>(hits) / static_cast<double>(t.total_instances);
  }
  return acc / static_cast<double>(grid_size);
}

bool entry_before(const LabeledSegment& a, const LabeledSegment& b) {
  return a.score > b.score;
}

}  // namespace

std::vector<double> default_tiou_grid() {
  std::vector<double> g;
  for (int k = 0; k < 10; ++k) g.push_back((50 + 5 * k) / 100.0);
  return g;
}

GroundTruthMap ground_truth(const DatasetIndex& dataset) {
  GroundTruthMap out;
  for (const auto& [id, rec] : dataset.videos()) {
    auto& list = out[id];
    for (const auto& inst : rec.instances) list.push_back(inst.interval);
  }
  return out;
}

double recall(const ProposalMap& proposals, const GroundTruthMap& gt, int an, double theta) {
  if (an < 1) throw Error(ErrorCode::kConfig, "recall: AN must be >= 1");
  if (!(theta > 0.0 && theta <= 1.0)) throw Error(ErrorCode::kConfig, "recall: threshold must lie in (0, 1]");
  return ar_from_table(rank_table(proposals, gt, an, {theta}), an, 1);
}

double average_recall(const ProposalMap& proposals, const GroundTruthMap& gt, int an,
                      const std::vector<double>& grid) {
  if (an < 1) throw Error(ErrorCode::kConfig, "average_recall: AN must be >= 1");
  if (grid.empty()) throw Error(ErrorCode::kConfig, "average_recall: empty tIoU grid");
  return ar_from_table(rank_table(proposals, gt, an, grid), an, grid.size());
}

ArAnCurve ar_an(const ProposalMap& proposals, const GroundTruthMap& gt, int an_max, const std::vector<double>& grid) {
  if (an_max < 1) throw Error(ErrorCode::kConfig, "ar_an: AN_max must be >= 1");
  if (grid.empty()) throw Error(ErrorCode::kConfig, "ar_an: empty tIoU grid");
  const RankTable table = rank_table(proposals, gt, an_max, grid);
  ArAnCurve curve;
  double sum = 0.0;
  for (int an = 1; an <= an_max; ++an) {
    curve.ar.push_back(ar_from_table(table, an, grid.size()));
    sum += curve.ar.back();
  }
  curve.area = sum / an_max;
  return curve;
}

LocalizationResult attach_labels(const ProposalMap& proposals, const ClassificationResult& classes, int top_c) {
  if (top_c < 1) throw Error(ErrorCode::kConfig, "attach_labels: top_c must be >= 1");
  LocalizationResult out;
  for (const auto& [id, set] : proposals) {
    auto it = classes.find(id);
    if (it == classes.end() || it->second.empty())
      throw Error(ErrorCode::kMissingLabel, "no classification result for video \"" + id + "\"");
    const std::size_t c = std::min<std::size_t>(it->second.size(), static_cast<std::size_t>(top_c));
    auto& entries = out[id];
    for (const auto& p : set.proposals())
      for (std::size_t k = 0; k < c; ++k)
        entries.push_back({it->second[k].label, p.interval, p.score * it->second[k].score});
    std::stable_sort(entries.begin(), entries.end(), entry_before);
  }
  return out;
}

double average_precision(std::vector<ClassPrediction> predictions,
                         const std::map<std::string, std::vector<TemporalInterval>>& gt, double theta) {
  std::size_t total = 0;
  for (const auto& [id, list] : gt) total += list.size();
  if (total == 0) throw Error(ErrorCode::kUndefinedMetric, "average_precision: class has no ground truth");

  std::stable_sort(predictions.begin(), predictions.end(), [](const ClassPrediction& a, const ClassPrediction& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.interval.start() != b.interval.start()) return a.interval.start() < b.interval.start();
    if (a.interval.length() != b.interval.length()) return a.interval.length() < b.interval.length();
    return a.video_id < b.video_id;
  });

  std::map<std::string, std::vector<bool>> matched;
  for (const auto& [id, list] : gt) matched[id].assign(list.size(), false);

  std::vector<double> precision(predictions.size());
  std::vector<double> recall_at(predictions.size());
  std::size_t tp = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto& p = predictions[i];
    auto it = gt.find(p.video_id);
    if (it != gt.end()) {
      auto& used = matched[p.video_id];
      double best = -1.0;
      std::size_t best_g = 0;
      for (std::size_t g = 0; g < it->second.size(); ++g) {
        if (used[g]) continue;
        const double v = tiou(p.interval, it->second[g]);
        if (v > best) {
          best = v;
          best_g = g;
        }
      }
      if (best >= theta) {
        used[best_g] = true;
        ++tp;
      }
    }
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    recall_at[i] = static_cast<double>(tp) / static_cast<double>(total);
  }
  for (std::size_t i = predictions.size(); i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    ap += (recall_at[i] - prev_recall) * precision[i];
    prev_recall = recall_at[i];
  }
  return ap;
}

MapReport mean_ap(const LocalizationResult& localization, const DatasetIndex& dataset, double theta) {
  for (const auto& [id, entries] : localization)
    for (const auto& e : entries)
      if (!dataset.has_label(e.label))
        throw Error(ErrorCode::kSchema, "localization for \"" + id + "\" uses unknown label \"" + e.label + "\"");

  MapReport report;
  double sum = 0.0;
  for (const auto& label : dataset.label_set()) {
    std::map<std::string, std::vector<TemporalInterval>> gt;
    std::size_t count = 0;
    for (const auto& [id, rec] : dataset.videos()) {
      auto& list = gt[id];
      for (const auto& inst : rec.instances)
        if (inst.label == label) list.push_back(inst.interval);
      count += list.size();
    }
    if (count == 0) {
      report.excluded.push_back(label);
      continue;
    }
    std::vector<ClassPrediction> preds;
    for (const auto& [id, entries] : localization) {
      if (!gt.count(id)) continue;
      for (const auto& e : entries)
        if (e.label == label) preds.push_back({id, e.interval, e.score});
    }
    const double ap = average_precision(std::move(preds), gt, theta);
    report.ap[label] = ap;
    sum += ap;
  }
  if (report.ap.empty()) throw Error(ErrorCode::kUndefinedMetric, "mean_ap: no class has ground truth");
  report.map = sum / static_cast<double>(report.ap.size());
  return report;
}

double average_map(const LocalizationResult& localization, const DatasetIndex& dataset,
                   const std::vector<double>& grid) {
  if (grid.empty()) throw Error(ErrorCode::kConfig, "average_map: empty tIoU grid");
  double sum = 0.0;
  for (double theta : grid) sum += mean_ap(localization, dataset, theta).map;
  return sum / static_cast<double>(grid.size());
}

LocalizationResult truncate_per_video(const LocalizationResult& localization, int n) {
  if (n < 1) throw Error(ErrorCode::kConfig, "eval_at_n: n must be >= 1");
  LocalizationResult out;
  for (const auto& [id, entries] : localization) {
    auto& dst = out[id];
    dst = entries;
    std::stable_sort(dst.begin(), dst.end(), entry_before);
    if (dst.size() > static_cast<std::size_t>(n)) dst.erase(dst.begin() + n, dst.end());
  }
  return out;
}

double eval_at_n(const LocalizationResult& localization, const DatasetIndex& dataset, int n,
                 const std::vector<double>& grid) {
  return average_map(truncate_per_video(localization, n), dataset, grid);
}

}  // namespace tapkit::eval
