#include "tapkit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "tapkit/error.hpp"

namespace tapkit {
namespace {

struct Span {
  int start;
  int end;
};

bool collides(const Span& a, const std::vector<Span>& placed) {
  // Keep at least one background snippet between instances.
  for (const auto& p : placed)
    if (a.start < p.end + 1 && p.start < a.end + 1) return true;
  return false;
}

}  // namespace

std::string class_name(int c) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "action_%02d", c);
  return buf;
}

void SynthConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::kConfig, "synth: " + m); };
  if (num_videos < 1) fail("num_videos must be >= 1");
  if (validation_fraction < 0.0 || validation_fraction > 1.0) fail("validation_fraction outside [0, 1]");
  if (!(min_duration > 0.0) || min_duration > max_duration) fail("empty duration range");
  if (!(snippet_length > 0.0)) fail("snippet_length must be positive");
  if (num_classes < 1) fail("num_classes must be >= 1");
  if (dim < num_classes) fail("dim must be >= num_classes (class indicator directions)");
  if (min_instances < 0 || min_instances > max_instances) fail("empty instance count range");
  if (!(min_instance_fraction > 0.0) || min_instance_fraction > max_instance_fraction ||
      max_instance_fraction > 1.0)
    fail("instance fraction range must be non-empty within (0, 1]");
  if (!(signal > 0.0)) fail("signal must be positive");
  if (!(noise > 0.0)) fail("noise must be positive");
}

SyntheticDataset generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<float> gauss(0.0f, static_cast<float>(cfg.noise));

  const int num_validation = static_cast<int>(std::lround(cfg.num_videos * cfg.validation_fraction));
  const int num_training = cfg.num_videos - num_validation;

  SyntheticDataset out;
  std::vector<VideoRecord> records;
  for (int v = 0; v < cfg.num_videos; ++v) {
    char id_buf[32];
    std::snprintf(id_buf, sizeof(id_buf), "video_%04d", v);
    const std::string id = id_buf;

    const double duration = cfg.min_duration + (cfg.max_duration - cfg.min_duration) * unit(rng);
    const int T = std::max(1, static_cast<int>(std::ceil(duration / cfg.snippet_length - 1e-9)));
    const int count = std::uniform_int_distribution<int>(cfg.min_instances, cfg.max_instances)(rng);
    std::uniform_int_distribution<int> pick_class(0, cfg.num_classes - 1);
    const int video_class = pick_class(rng);

    std::vector<Span> placed;
    std::vector<int> classes;
    for (int k = 0; k < count; ++k) {
      bool ok = false;
      for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
        const double frac = cfg.min_instance_fraction +
                            (cfg.max_instance_fraction - cfg.min_instance_fraction) * unit(rng);
        const int len = std::clamp(static_cast<int>(std::lround(frac * T)), 1, T);
        const int start = std::uniform_int_distribution<int>(0, T - len)(rng);
        const Span s{start, start + len};
        if (!collides(s, placed)) {
          placed.push_back(s);
          ok = true;
        }
      }
      if (!ok)
        throw Error(ErrorCode::kPlacement, id + ": could not place instance " + std::to_string(k) +
                                               " without overlap after 100 attempts");
      classes.push_back(cfg.single_class_per_video ? video_class : pick_class(rng));
    }

    const std::size_t D = static_cast<std::size_t>(cfg.dim);
    std::vector<float> data(static_cast<std::size_t>(T) * D);
    for (auto& x : data) x = gauss(rng);
    for (std::size_t k = 0; k < placed.size(); ++k)
      for (int t = placed[k].start; t < placed[k].end; ++t)
        data[static_cast<std::size_t>(t) * D + static_cast<std::size_t>(classes[k])] +=
            static_cast<float>(cfg.signal);

    VideoRecord rec;
    rec.video_id = id;
    rec.duration = duration;
    rec.subset = v < num_training ? Subset::kTraining : Subset::kValidation;
    std::vector<std::size_t> order(placed.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return placed[a].start < placed[b].start; });
    for (std::size_t k : order) {
      const double s = duration * placed[k].start / T;
      const double e = placed[k].end == T ? duration : duration * placed[k].end / T;
      rec.instances.push_back({class_name(classes[k]), TemporalInterval(s, e)});
    }
    records.push_back(std::move(rec));
    out.features.emplace(id, FeatureSequence(id, static_cast<std::size_t>(T), D, std::move(data)));
  }

  std::vector<std::string> labels;
  for (int c = 0; c < cfg.num_classes; ++c) labels.push_back(class_name(c));
  std::map<std::string, VideoRecord> videos;
  for (auto& r : records) {
    std::string id = r.video_id;
    videos.emplace(std::move(id), std::move(r));
  }
  out.index = DatasetIndex(std::move(videos), std::move(labels));
  return out;
}

}  // namespace tapkit
