#include "tapkit/tag.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "tapkit/engine/adam.hpp"
#include "tapkit/engine/ops.hpp"
#include "tapkit/error.hpp"

namespace tapkit::tag {

using engine::LayerSpec;
using engine::Tensor3;

void TagConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::kConfig, "tag: " + m); };
  if (hidden < 1) fail("hidden must be >= 1");
  if (thresholds.empty() || tolerances.empty()) fail("threshold grids must be non-empty");
  for (double v : thresholds)
    if (!(v > 0.0 && v < 1.0)) fail("actionness thresholds must lie in (0, 1)");
  for (double v : tolerances)
    if (!(v > 0.0 && v < 1.0)) fail("coverage tolerances must lie in (0, 1)");
  if (min_fragment < 1) fail("min_fragment must be >= 1");
  if (epochs < 0) fail("epochs must be >= 0");
  if (batch_videos < 1) fail("batch_videos must be >= 1");
  if (!(lr >= 0.0)) fail("lr must be >= 0");
}

std::vector<double> actionness_targets(const VideoRecord& video, int length) {
  if (length < 1) throw Error(ErrorCode::kShape, "actionness_targets: length must be >= 1");
  std::vector<double> out(length, 0.0);
  for (int t = 0; t < length; ++t) {
    const double center = (t + 0.5) / length * video.duration;
    for (const auto& inst : video.instances)
      if (inst.interval.contains(center)) {
        out[t] = 1.0;
        break;
      }
  }
  return out;
}

engine::Model<float> build_actionness_model(int dim, int hidden, std::uint64_t seed) {
  engine::Model<float> model;
  model.kind = engine::GraphKind::kSequential;
  model.seed = seed;
  model.segments.emplace_back(std::vector<LayerSpec>{LayerSpec::dense(dim, hidden), LayerSpec::relu(),
                                                     LayerSpec::dense(hidden, 1), LayerSpec::sigmoid()});
  std::mt19937_64 rng(seed);
  model.segments[0].init(rng);
  auto& out_layer = model.segments[0].layers()[2];
  std::fill(out_layer.weight().begin(), out_layer.weight().end(), 0.0f);
  std::fill(out_layer.bias().begin(), out_layer.bias().end(), 0.0f);
  return model;
}

namespace {

Tensor3<float> to_tensor(std::span<const FeatureSequence* const> seqs) {
  std::size_t total = 0;
  const std::size_t D = seqs.front()->dim();
  for (const auto* s : seqs) {
    if (s->dim() != D) throw Error(ErrorCode::kShape, "actionness: mixed feature dimensions");
    total += s->length();
  }
  Tensor3<float> x(1, static_cast<int>(D), static_cast<int>(total));
  std::size_t t0 = 0;
  for (const auto* s : seqs) {
    for (std::size_t t = 0; t < s->length(); ++t) {
      const auto row = s->row(t);
      for (std::size_t d = 0; d < D; ++d) x.at(0, static_cast<int>(d), static_cast<int>(t0 + t)) = row[d];
    }
    t0 += s->length();
  }
  return x;
}

}  // namespace

std::vector<double> train_actionness(engine::Model<float>& model, const DatasetIndex& dataset,
                                     const std::map<std::string, FeatureSequence>& features,
                                     const TagConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (model.segments.size() != 1) throw Error(ErrorCode::kConfig, "actionness model must be a single chain");
  auto& net = model.segments[0];

  std::vector<const FeatureSequence*> inputs;
  std::vector<std::vector<double>> targets;
  for (const auto& id : dataset.ids(Subset::kTraining)) {
    auto it = features.find(id);
    if (it == features.end()) throw Error(ErrorCode::kIo, "train-tag: no features for training video " + id);
    inputs.push_back(&it->second);
    targets.push_back(actionness_targets(dataset.at(id), static_cast<int>(it->second.length())));
  }
  std::vector<double> trace;
  if (cfg.epochs == 0) return trace;
  if (inputs.empty()) throw Error(ErrorCode::kConfig, "train-tag: no training videos");

  std::mt19937_64 rng(seed);
  engine::AdamState state;
  const engine::AdamConfig adam{cfg.lr, 0.9, 0.999, 1e-8};
  std::vector<std::size_t> order(inputs.size());
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t snippets = 0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_videos) {
      const std::size_t e = std::min(order.size(), b + cfg.batch_videos);
      std::vector<const FeatureSequence*> batch;
      std::vector<float> y_data;
      for (std::size_t i = b; i < e; ++i) {
        batch.push_back(inputs[order[i]]);
        for (double v : targets[order[i]]) y_data.push_back(static_cast<float>(v));
      }
      const Tensor3<float> x = to_tensor(batch);
      Tensor3<float> y(1, 1, x.t);
      y.data = std::move(y_data);

      net.zero_grad();
      const auto loss = engine::mse_loss(net.forward(x), y);
      if (!std::isfinite(loss.loss))
        throw Error(ErrorCode::kDivergence, "train-tag: non-finite loss in epoch " + std::to_string(epoch));
      net.backward(loss.grad);
      auto params = model.params();
      try {
        engine::adam_step(params, state, adam);
      } catch (const Error& err) {
        throw Error(err.code(), "train-tag epoch " + std::to_string(epoch) + ": " + err.what());
      }
      loss_sum += loss.loss * x.t;
      snippets += static_cast<std::size_t>(x.t);
    }
    trace.push_back(loss_sum / static_cast<double>(snippets));
  }
  return trace;
}

ActionnessSequence predict_actionness(engine::Model<float>& model, const FeatureSequence& features) {
  if (model.segments.size() != 1) throw Error(ErrorCode::kConfig, "actionness model must be a single chain");
  const FeatureSequence* one[] = {&features};
  const Tensor3<float> y = model.segments[0].forward(to_tensor(one));
  ActionnessSequence out{features.video_id(), {}};
  out.values.assign(y.data.begin(), y.data.end());
  return out;
}

std::vector<Region> find_fragments(std::span<const double> values, double threshold, int min_fragment) {
  std::vector<Region> out;
  const int T = static_cast<int>(values.size());
  int t = 0;
  while (t < T) {
    if (values[t] < threshold) {
      ++t;
      continue;
    }
    const int start = t;
    while (t < T && values[t] >= threshold) ++t;
    if (t - start >= min_fragment) out.push_back({start, t});
  }
  return out;
}

std::vector<Region> group(std::span<const double> values, double threshold, double tolerance,
                          int min_fragment, bool scan_cutoff) {
  const auto frags = find_fragments(values, threshold, min_fragment);
  std::vector<Region> out;
  for (std::size_t i = 0; i < frags.size(); ++i) {
    int covered = 0;
    int failures = 0;
    for (std::size_t j = i; j < frags.size(); ++j) {
      covered += frags[j].length();
      const int span = frags[j].end - frags[i].start;
      if (static_cast<double>(covered) / span >= tolerance) {
        out.push_back({frags[i].start, frags[j].end});
        failures = 0;
      } else if (scan_cutoff && ++failures >= 2) {
        break;
      }
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

ProposalSet tag_proposals(const ActionnessSequence& actionness, const TagConfig& cfg, const VideoRecord& video) {
  const auto& v = actionness.values;
  if (v.empty()) throw Error(ErrorCode::kShape, "tag_proposals: empty actionness for " + actionness.video_id);
  for (double x : v)
    if (!(x >= 0.0 && x <= 1.0))
      throw Error(ErrorCode::kOutOfRange, "tag_proposals: actionness outside [0, 1] for " + actionness.video_id);

  std::set<Region> regions;
  for (double tau : cfg.thresholds)
    for (double gamma : cfg.tolerances)
      for (const auto& r : group(v, tau, gamma, cfg.min_fragment, cfg.scan_cutoff)) regions.insert(r);

  const int T = static_cast<int>(v.size());
  std::vector<double> prefix(v.size() + 1, 0.0);
  for (std::size_t i = 0; i < v.size(); ++i) prefix[i + 1] = prefix[i] + v[i];
  std::vector<Proposal> ps;
  for (const auto& r : regions) {
    const double s = video.duration * r.start / T;
    const double e = r.end == T ? video.duration : video.duration * r.end / T;
    const double score = std::clamp((prefix[r.end] - prefix[r.start]) / r.length(), 0.0, 1.0);
    ps.push_back({TemporalInterval(s, e), score, ProposalSource::kTag});
  }
  return ProposalSet(video.video_id, std::move(ps));
}

double roc_auc(std::span<const double> scores, std::span<const double> labels) {
  if (scores.size() != labels.size()) throw Error(ErrorCode::kShape, "roc_auc: size mismatch");
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos = 0, neg = 0, rank_sum = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based mean rank of the tie block
    for (std::size_t k = i; k < j; ++k) {
      if (labels[idx[k]] > 0.5) {
        rank_sum += avg_rank;
        ++pos;
      } else {
        ++neg;
      }
    }
    i = j;
  }
  if (pos == 0 || neg == 0) throw Error(ErrorCode::kUndefinedMetric, "roc_auc: needs both classes");
  return (rank_sum - pos * (pos + 1) / 2) / (pos * neg);
}

}  // namespace tapkit::tag
