#include "tapkit/ssad.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "tapkit/engine/adam.hpp"
#include "tapkit/engine/ops.hpp"
#include "tapkit/error.hpp"

namespace tapkit::ssad {

using engine::LayerSpec;
using engine::Tensor3;

void SsadConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::kConfig, "ssad: " + m); };
  if (input_length < 4 || input_length % 4 != 0) fail("input_length must be a positive multiple of 4");
  const int largest = input_length / 4;
  if ((largest & (largest - 1)) != 0) fail("input_length / 4 must be a power of two");
  std::vector<int> chain;
  for (int l = 1; l <= largest; l *= 2) chain.push_back(l);
  if (layer_lengths != chain) {
    std::string want;
    for (int l : chain) want += (want.empty() ? "" : ",") + std::to_string(l);
    fail("layer_lengths must be {" + want + "} for input_length " + std::to_string(input_length));
  }
  if (feature_dim < 1) fail("feature_dim must be >= 1");
  if (hidden < 1) fail("hidden must be >= 1");
  if (base_kernel < 1 || base_kernel % 2 == 0) fail("base_kernel must be odd");
  if (ratios.empty()) fail("ratios must be non-empty");
  for (double r : ratios)
    if (!(r > 0.0)) fail("scale ratios must be positive");
  if (epochs < 0) fail("epochs must be >= 0");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (!(lr >= 0.0)) fail("lr must be >= 0");
  if (top_k < 1) fail("top_k must be >= 1");
}

AnchorPyramid build_anchor_pyramid(const std::vector<int>& layer_lengths, const std::vector<double>& ratios) {
  for (double r : ratios)
    if (!(r > 0.0)) throw Error(ErrorCode::kConfig, "anchor ratio must be positive");
  for (int l : layer_lengths)
    if (l < 1) throw Error(ErrorCode::kConfig, "anchor layer length must be >= 1");
  AnchorPyramid p{layer_lengths, ratios, {}};
  for (std::size_t k = 0; k < layer_lengths.size(); ++k) {
    const double L = layer_lengths[k];
    for (int i = 0; i < layer_lengths[k]; ++i) {
      const double c = (i + 0.5) / L;
      for (std::size_t r = 0; r < ratios.size(); ++r) {
        const double w = ratios[r] / L;
        p.anchors.push_back({static_cast<int>(k), i, static_cast<int>(r),
                             clip_unit(TemporalInterval(c - 0.5 * w, c + 0.5 * w))});
      }
    }
  }
  return p;
}

std::vector<double> assign_targets(const AnchorPyramid& pyramid, std::span<const TemporalInterval> gt) {
  const std::size_t n = pyramid.size();
  std::vector<double> starts(n), ends(n), iou(n), target(n, 0.0);
  for (std::size_t a = 0; a < n; ++a) {
    starts[a] = pyramid.anchors[a].interval.start();
    ends[a] = pyramid.anchors[a].interval.end();
  }
  for (const auto& g : gt) {
    if (g.start() < 0.0 || g.end() > 1.0)
      throw Error(ErrorCode::kOutOfRange, "assign_targets: ground truth " + to_string(g) + " is not normalized");
    tiou_many(g, starts, ends, iou);
    for (std::size_t a = 0; a < n; ++a) target[a] = std::max(target[a], iou[a]);
  }
  return target;
}

engine::Model<float> build_model(const SsadConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const int H = cfg.hidden;
  const int R = static_cast<int>(cfg.ratios.size());
  const std::size_t M = cfg.layer_lengths.size();

  engine::Model<float> model;
  model.kind = engine::GraphKind::kSsad;
  model.seed = seed;
  model.segments.emplace_back(std::vector<LayerSpec>{
      LayerSpec::conv1d(cfg.feature_dim, H, cfg.base_kernel, 1, cfg.base_kernel / 2), LayerSpec::relu(),
      LayerSpec::conv1d(H, H, 3, 2, 1), LayerSpec::relu(),
      LayerSpec::conv1d(H, H, 3, 2, 1), LayerSpec::relu()});
  for (std::size_t g = 1; g < M; ++g)
    model.segments.emplace_back(std::vector<LayerSpec>{LayerSpec::conv1d(H, H, 3, 2, 1), LayerSpec::relu()});
  for (std::size_t g = 0; g < M; ++g)
    model.segments.emplace_back(std::vector<LayerSpec>{LayerSpec::conv1d(H, R, 3, 1, 1), LayerSpec::sigmoid()});

  std::mt19937_64 rng(seed);
  for (auto& s : model.segments) s.init(rng);
  return model;
}

template <class Real>
SsadNet<Real>::SsadNet(engine::Model<Real>& model, std::vector<int> layer_lengths, int num_ratios)
    : model_(&model), layer_lengths_(std::move(layer_lengths)), num_ratios_(num_ratios) {
  if (model.kind != engine::GraphKind::kSsad || model.segments.size() != 2 * layer_lengths_.size())
    throw Error(ErrorCode::kConfig, "model is not a Prop-SSAD graph with " +
                                        std::to_string(layer_lengths_.size()) + " prediction maps");
  if (!std::is_sorted(layer_lengths_.begin(), layer_lengths_.end()))
    throw Error(ErrorCode::kConfig, "layer lengths must be ascending");
}

template <class Real>
Tensor3<Real> SsadNet<Real>::forward(const Tensor3<Real>& x) {
  const std::size_t M = layer_lengths_.size();
  auto& seg = model_->segments;
  head_out_.assign(M, {});
  Tensor3<Real> map = seg[0].forward(x);
  for (std::size_t g = 0; g < M; ++g) {
    if (g > 0) map = seg[g].forward(map);
    const int expect = layer_lengths_[M - 1 - g];
    if (map.t != expect)
      throw Error(ErrorCode::kShape, "prediction map " + std::to_string(g) + " has length " +
                                         std::to_string(map.t) + ", expected " + std::to_string(expect));
    head_out_[g] = seg[M + g].forward(map);
  }

  std::size_t total = 0;
  for (int l : layer_lengths_) total += static_cast<std::size_t>(l) * num_ratios_;
  Tensor3<Real> out(x.n, 1, static_cast<int>(total));
  for (int n = 0; n < x.n; ++n) {
    Real* dst = out.row(n, 0);
    std::size_t offset = 0;
    for (std::size_t k = 0; k < M; ++k) {
      const auto& h = head_out_[M - 1 - k];
      for (int i = 0; i < h.t; ++i)
        for (int r = 0; r < num_ratios_; ++r) dst[offset + static_cast<std::size_t>(i) * num_ratios_ + r] = h.at(n, r, i);
      offset += static_cast<std::size_t>(h.t) * num_ratios_;
    }
  }
  return out;
}

template <class Real>
void SsadNet<Real>::backward(const Tensor3<Real>& grad_scores) {
  const std::size_t M = layer_lengths_.size();
  auto& seg = model_->segments;
  std::vector<Tensor3<Real>> head_grad(M);
  for (std::size_t g = 0; g < M; ++g) head_grad[g] = Tensor3<Real>(grad_scores.n, num_ratios_, head_out_[g].t);
  for (int n = 0; n < grad_scores.n; ++n) {
    const Real* src = grad_scores.row(n, 0);
    std::size_t offset = 0;
    for (std::size_t k = 0; k < M; ++k) {
      auto& h = head_grad[M - 1 - k];
      for (int i = 0; i < h.t; ++i)
        for (int r = 0; r < num_ratios_; ++r) h.at(n, r, i) = src[offset + static_cast<std::size_t>(i) * num_ratios_ + r];
      offset += static_cast<std::size_t>(h.t) * num_ratios_;
    }
  }
  Tensor3<Real> grad_map;
  for (std::size_t g = M; g-- > 0;) {
    Tensor3<Real> gm = seg[M + g].backward(head_grad[g]);
    if (g + 1 < M)
      for (std::size_t i = 0; i < gm.data.size(); ++i) gm.data[i] += grad_map.data[i];
    grad_map = g > 0 ? seg[g].backward(gm) : std::move(gm);
  }
  seg[0].backward(grad_map);
}

template class SsadNet<float>;
template class SsadNet<double>;

engine::Tensor3<float> stack_features(std::span<const FeatureSequence* const> seqs) {
  if (seqs.empty()) throw Error(ErrorCode::kShape, "stack_features: no sequences");
  const int T = static_cast<int>(seqs[0]->length());
  const int D = static_cast<int>(seqs[0]->dim());
  Tensor3<float> x(static_cast<int>(seqs.size()), D, T);
  for (int n = 0; n < x.n; ++n) {
    const auto& s = *seqs[n];
    if (static_cast<int>(s.length()) != T || static_cast<int>(s.dim()) != D)
      throw Error(ErrorCode::kShape, "stack_features: " + s.video_id() + " has a different shape");
    for (int t = 0; t < T; ++t) {
      const auto row = s.row(t);
      for (int d = 0; d < D; ++d) x.at(n, d, t) = row[d];
    }
  }
  return x;
}

namespace {

std::vector<TemporalInterval> normalized_gt(const VideoRecord& video) {
  std::vector<TemporalInterval> out;
  for (const auto& inst : video.instances) out.push_back(normalize(inst.interval, video.duration));
  return out;
}

void check_input(const FeatureSequence& f, const SsadConfig& cfg) {
  if (static_cast<int>(f.length()) != cfg.input_length || static_cast<int>(f.dim()) != cfg.feature_dim)
    throw Error(ErrorCode::kShape, "features for " + f.video_id() + " are " + std::to_string(f.length()) + "x" +
                                       std::to_string(f.dim()) + ", model expects " +
                                       std::to_string(cfg.input_length) + "x" + std::to_string(cfg.feature_dim));
}

}  // namespace

std::vector<double> train(engine::Model<float>& model, const DatasetIndex& dataset,
                          const std::map<std::string, FeatureSequence>& features, const SsadConfig& cfg,
                          std::uint64_t seed) {
  cfg.validate();
  SsadNet<float> net(model, cfg.layer_lengths, static_cast<int>(cfg.ratios.size()));
  const AnchorPyramid pyramid = build_anchor_pyramid(cfg);

  std::vector<const FeatureSequence*> inputs;
  std::vector<std::vector<float>> targets;
  for (const auto& id : dataset.ids(Subset::kTraining)) {
    auto it = features.find(id);
    if (it == features.end()) throw Error(ErrorCode::kIo, "train: no features for training video " + id);
    check_input(it->second, cfg);
    inputs.push_back(&it->second);
    const auto t = assign_targets(pyramid, normalized_gt(dataset.at(id)));
    targets.emplace_back(t.begin(), t.end());
  }
  std::vector<double> trace;
  if (cfg.epochs == 0) return trace;
  if (inputs.empty()) throw Error(ErrorCode::kConfig, "train: no training videos");

  std::mt19937_64 rng(seed);
  engine::AdamState state;
  const engine::AdamConfig adam{cfg.lr, 0.9, 0.999, 1e-8};
  std::vector<std::size_t> order(inputs.size());
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const std::size_t e = std::min(order.size(), b + cfg.batch_size);
      std::vector<const FeatureSequence*> batch;
      for (std::size_t i = b; i < e; ++i) batch.push_back(inputs[order[i]]);
      const Tensor3<float> x = stack_features(batch);
      Tensor3<float> y(x.n, 1, static_cast<int>(pyramid.size()));
      for (std::size_t i = b; i < e; ++i)
        std::copy(targets[order[i]].begin(), targets[order[i]].end(), y.row(static_cast<int>(i - b), 0));

      model.zero_grad();
      const auto loss = engine::mse_loss(net.forward(x), y);
      if (!std::isfinite(loss.loss))
        throw Error(ErrorCode::kDivergence, "train-ssad: non-finite loss in epoch " + std::to_string(epoch));
      net.backward(loss.grad);
      auto params = model.params();
      try {
        engine::adam_step(params, state, adam);
      } catch (const Error& err) {
        throw Error(err.code(), "train-ssad epoch " + std::to_string(epoch) + ": " + err.what());
      }
      epoch_loss += loss.loss * static_cast<double>(e - b);
    }
    trace.push_back(epoch_loss / static_cast<double>(order.size()));
  }
  return trace;
}

ProposalSet infer(engine::Model<float>& model, const FeatureSequence& features, const VideoRecord& video,
                  const SsadConfig& cfg) {
  check_input(features, cfg);
  SsadNet<float> net(model, cfg.layer_lengths, static_cast<int>(cfg.ratios.size()));
  const AnchorPyramid pyramid = build_anchor_pyramid(cfg);
  const FeatureSequence* one[] = {&features};
  const Tensor3<float> scores = net.forward(stack_features(one));
  if (static_cast<std::size_t>(scores.t) != pyramid.size())
    throw Error(ErrorCode::kShape, "infer: score count does not match anchor count");
  std::vector<Proposal> ps;
  ps.reserve(pyramid.size());
  for (std::size_t a = 0; a < pyramid.size(); ++a) {
    const auto& iv = pyramid.anchors[a].interval;
    const double s = iv.start() * video.duration;
    const double e = iv.end() >= 1.0 ? video.duration : iv.end() * video.duration;
    ps.push_back({TemporalInterval(s, e), static_cast<double>(scores.data[a]), ProposalSource::kSsad});
  }
  return ProposalSet(video.video_id, std::move(ps)).truncated(static_cast<std::size_t>(cfg.top_k));
}

}  // namespace tapkit::ssad
