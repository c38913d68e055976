#include "tapkit/pipeline.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <random>
#include <sstream>

#include "tapkit/engine/checkpoint.hpp"
#include "tapkit/engine/gradcheck.hpp"
#include "tapkit/engine/ops.hpp"
#include "tapkit/error.hpp"
#include "tapkit/features.hpp"
#include "tapkit/parallel.hpp"
#include "tapkit/results_io.hpp"

namespace tapkit::pipeline {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Configuration

std::filesystem::path PipelineConfig::annotations_path() const {
  return paths.annotations.empty() ? out("annotations.json") : paths.annotations;
}
std::filesystem::path PipelineConfig::features_dir() const {
  return paths.features_dir.empty() ? out("features") : paths.features_dir;
}
std::filesystem::path PipelineConfig::classification_path() const {
  return paths.classification.empty() ? out("classification.json") : paths.classification;
}

json to_json(const PipelineConfig& c) {
  return {
      {"seed", c.seed},
      {"paths",
       {{"output_dir", c.paths.output_dir.string()},
        {"annotations", c.paths.annotations.string()},
        {"features_dir", c.paths.features_dir.string()},
        {"classification", c.paths.classification.string()}}},
      {"synth",
       {{"num_videos", c.synth.num_videos},
        {"validation_fraction", c.synth.validation_fraction},
        {"min_duration", c.synth.min_duration},
        {"max_duration", c.synth.max_duration},
        {"snippet_length", c.synth.snippet_length},
        {"dim", c.synth.dim},
        {"num_classes", c.synth.num_classes},
        {"min_instances", c.synth.min_instances},
        {"max_instances", c.synth.max_instances},
        {"min_instance_fraction", c.synth.min_instance_fraction},
        {"max_instance_fraction", c.synth.max_instance_fraction},
        {"single_class_per_video", c.synth.single_class_per_video},
        {"signal", c.synth.signal},
        {"noise", c.synth.noise}}},
      {"ssad",
       {{"input_length", c.ssad.input_length},
        {"feature_dim", c.ssad.feature_dim},
        {"hidden", c.ssad.hidden},
        {"base_kernel", c.ssad.base_kernel},
        {"layer_lengths", c.ssad.layer_lengths},
        {"ratios", c.ssad.ratios},
        {"epochs", c.ssad.epochs},
        {"batch_size", c.ssad.batch_size},
        {"lr", c.ssad.lr},
        {"top_k", c.ssad.top_k}}},
      {"tag",
       {{"hidden", c.tag.hidden},
        {"thresholds", c.tag.thresholds},
        {"tolerances", c.tag.tolerances},
        {"min_fragment", c.tag.min_fragment},
        {"scan_cutoff", c.tag.scan_cutoff},
        {"epochs", c.tag.epochs},
        {"batch_videos", c.tag.batch_videos},
        {"lr", c.tag.lr}}},
      {"refine", {{"iou_threshold", c.refine.iou_threshold}}},
      {"nms",
       {{"iou_threshold", c.nms.iou_threshold},
        {"max_output", c.nms.max_output},
        {"placement", fusion::to_string(c.nms_placement)}}},
      {"eval",
       {{"an_max", c.eval.an_max},
        {"subset", to_string(c.eval.subset)},
        {"top_c", c.eval.top_c},
        {"at_n", c.eval.at_n},
        {"baseline_proposals", c.eval.baseline_proposals}}},
      {"gradcheck_configs", c.gradcheck_configs},
      {"export_actionness", c.export_actionness},
  };
}

json default_config_json() { return to_json(PipelineConfig{}); }

namespace {

[[noreturn]] void config_error(const std::string& m) { throw Error(ErrorCode::kConfig, m); }

bool same_kind(const json& a, const json& b) {
  if (a.is_number() && b.is_number()) return true;
  return a.type() == b.type();
}

void merge_into(json& base, const json& user, const std::string& path) {
  if (!user.is_object()) config_error("config" + (path.empty() ? "" : " key " + path) + ": expected an object");
  for (const auto& [key, value] : user.items()) {
    const std::string where = path.empty() ? key : path + "." + key;
    auto it = base.find(key);
    if (it == base.end()) config_error("unknown config key \"" + where + "\"");
    if (it->is_object()) {
      merge_into(*it, value, where);
    } else {
      if (!same_kind(*it, value)) config_error("config key \"" + where + "\" has the wrong type");
      *it = value;
    }
  }
}

template <class T>
T get(const json& j, const char* key, const std::string& section) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    config_error("config key \"" + section + "." + key + "\" has the wrong type");
  }
}

}  // namespace

PipelineConfig from_json(const json& user) {
  json j = default_config_json();
  merge_into(j, user, "");
  PipelineConfig c;
  c.seed = get<std::uint64_t>(j, "seed", "");
  const json& p = j["paths"];
  c.paths.output_dir = get<std::string>(p, "output_dir", "paths");
  c.paths.annotations = get<std::string>(p, "annotations", "paths");
  c.paths.features_dir = get<std::string>(p, "features_dir", "paths");
  c.paths.classification = get<std::string>(p, "classification", "paths");
  if (c.paths.output_dir.empty()) config_error("paths.output_dir must not be empty");

  const json& s = j["synth"];
  c.synth.num_videos = get<int>(s, "num_videos", "synth");
  c.synth.validation_fraction = get<double>(s, "validation_fraction", "synth");
  c.synth.min_duration = get<double>(s, "min_duration", "synth");
  c.synth.max_duration = get<double>(s, "max_duration", "synth");
  c.synth.snippet_length = get<double>(s, "snippet_length", "synth");
  c.synth.dim = get<int>(s, "dim", "synth");
  c.synth.num_classes = get<int>(s, "num_classes", "synth");
  c.synth.min_instances = get<int>(s, "min_instances", "synth");
  c.synth.max_instances = get<int>(s, "max_instances", "synth");
  c.synth.min_instance_fraction = get<double>(s, "min_instance_fraction", "synth");
  c.synth.max_instance_fraction = get<double>(s, "max_instance_fraction", "synth");
  c.synth.single_class_per_video = get<bool>(s, "single_class_per_video", "synth");
  c.synth.signal = get<double>(s, "signal", "synth");
  c.synth.noise = get<double>(s, "noise", "synth");
  c.synth.seed = c.seed;

  const json& a = j["ssad"];
  c.ssad.input_length = get<int>(a, "input_length", "ssad");
  c.ssad.feature_dim = get<int>(a, "feature_dim", "ssad");
  c.ssad.hidden = get<int>(a, "hidden", "ssad");
  c.ssad.base_kernel = get<int>(a, "base_kernel", "ssad");
  c.ssad.layer_lengths = get<std::vector<int>>(a, "layer_lengths", "ssad");
  c.ssad.ratios = get<std::vector<double>>(a, "ratios", "ssad");
  c.ssad.epochs = get<int>(a, "epochs", "ssad");
  c.ssad.batch_size = get<int>(a, "batch_size", "ssad");
  c.ssad.lr = get<double>(a, "lr", "ssad");
  c.ssad.top_k = get<int>(a, "top_k", "ssad");

  const json& t = j["tag"];
  c.tag.hidden = get<int>(t, "hidden", "tag");
  c.tag.thresholds = get<std::vector<double>>(t, "thresholds", "tag");
  c.tag.tolerances = get<std::vector<double>>(t, "tolerances", "tag");
  c.tag.min_fragment = get<int>(t, "min_fragment", "tag");
  c.tag.scan_cutoff = get<bool>(t, "scan_cutoff", "tag");
  c.tag.epochs = get<int>(t, "epochs", "tag");
  c.tag.batch_videos = get<int>(t, "batch_videos", "tag");
  c.tag.lr = get<double>(t, "lr", "tag");

  c.refine.iou_threshold = get<double>(j["refine"], "iou_threshold", "refine");
  const json& n = j["nms"];
  c.nms.iou_threshold = get<double>(n, "iou_threshold", "nms");
  c.nms.max_output = get<int>(n, "max_output", "nms");
  c.nms_placement = fusion::nms_placement_from_string(get<std::string>(n, "placement", "nms"));

  const json& e = j["eval"];
  c.eval.an_max = get<int>(e, "an_max", "eval");
  try {
    c.eval.subset = subset_from_string(get<std::string>(e, "subset", "eval"));
  } catch (const Error& err) {
    config_error(std::string("eval.subset: ") + err.what());
  }
  c.eval.top_c = get<int>(e, "top_c", "eval");
  c.eval.at_n = get<std::vector<int>>(e, "at_n", "eval");
  c.eval.baseline_proposals = get<int>(e, "baseline_proposals", "eval");
  c.gradcheck_configs = get<int>(j, "gradcheck_configs", "");
  c.export_actionness = get<bool>(j, "export_actionness", "");

  c.synth.validate();
  c.ssad.validate();
  c.tag.validate();
  c.refine.validate();
  c.nms.validate();
  if (c.eval.an_max < 1) config_error("eval.an_max must be >= 1");
  if (c.eval.top_c < 1) config_error("eval.top_c must be >= 1");
  if (c.eval.baseline_proposals < 1) config_error("eval.baseline_proposals must be >= 1");
  for (int v : c.eval.at_n)
    if (v < 1) config_error("eval.at_n entries must be >= 1");
  if (c.gradcheck_configs < 1) config_error("gradcheck_configs must be >= 1");
  return c;
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) config_error("override \"" + assignment + "\" is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) config_error("override key \"" + key + "\" is malformed");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      break;
    }
    if (!node->contains(part)) (*node)[part] = json::object();
    node = &(*node)[part];
    if (!node->is_object()) config_error("override key \"" + key + "\" descends into a non-object");
    start = dot + 1;
  }
}

PipelineConfig load_config(const fs::path& path, const std::vector<std::string>& overrides) {
  json j = json::object();
  if (!path.empty()) {
    try {
      j = json::parse(read_text(path));
    } catch (const json::parse_error& e) {
      config_error(path.string() + ": " + e.what());
    } catch (const Error& e) {
      config_error(e.what());
    }
  }
  if (const char* env = std::getenv("TAPKIT_SEED"); env != nullptr && *env != '\0') {
    try {
      j["seed"] = std::stoull(env);
    } catch (const std::exception&) {
      config_error("TAPKIT_SEED must be an unsigned integer");
    }
  }
  // --set wins over the environment.
  for (const auto& o : overrides) apply_override(j, o);
  return from_json(j);
}

// ---------------------------------------------------------------------------
// Manifests and seeds

json RunManifest::to_json() const {
  json outputs = json::object();
  for (const auto& [p, sum] : checksums) outputs[p] = sum;
  return {{"command", command}, {"tool_version", tool_version}, {"seed", seed},
          {"config", config},   {"outputs", outputs},           {"wall_time_s", wall_time_s}};
}

std::string sha256_file(const fs::path& path) {
  const std::string bytes = read_text(path);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error(ErrorCode::kIo, "sha256 failed for " + path.string());
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof(buf), "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

std::uint64_t synth_seed(const PipelineConfig& cfg) { return cfg.seed; }
std::uint64_t ssad_seed(const PipelineConfig& cfg) { return cfg.seed + 1; }
std::uint64_t tag_seed(const PipelineConfig& cfg) { return cfg.seed + 2; }
std::uint64_t baseline_seed(const PipelineConfig& cfg) { return cfg.seed + 3; }

ProposalSet uniform_random_proposals(const VideoRecord& video, int count, std::uint64_t seed) {
  std::uint64_t h = 1469598103934665603ull ^ seed;
  for (unsigned char ch : video.video_id) h = (h ^ ch) * 1099511628211ull;
  std::mt19937_64 rng(h);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Proposal> ps;
  while (static_cast<int>(ps.size()) < count) {
    double a = unit(rng) * video.duration;
    double b = unit(rng) * video.duration;
    const double score = unit(rng);
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    ps.push_back({TemporalInterval(a, b), score, ProposalSource::kBaseline});
  }
  return ProposalSet(video.video_id, std::move(ps));
}

// ---------------------------------------------------------------------------
// Gradient checking

GradcheckSummary run_gradcheck(int configs, std::uint64_t seed) {
  using engine::LayerSpec;
  using engine::Tensor3;
  std::mt19937_64 rng(seed);
  auto uniform_int = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  GradcheckSummary summary;
  for (int c = 0; c < configs; ++c) {
    const int batch = uniform_int(1, 2);
    int channels = uniform_int(1, 4);
    int length = uniform_int(6, 16);
    const int in_channels = channels;
    const int in_length = length;
    std::vector<LayerSpec> specs;
    const int depth = uniform_int(2, 4);
    for (int d = 0; d < depth; ++d) {
      const int out = uniform_int(1, 4);
      if (uniform_int(0, 3) == 0) {
        specs.push_back(LayerSpec::dense(channels, out));
      } else {
        const int k = uniform_int(1, 5);
        const int s = uniform_int(1, 2);
        const int p = uniform_int(0, 2);
        if (length + 2 * p - k < 0) {
          specs.push_back(LayerSpec::dense(channels, out));
        } else {
          specs.push_back(LayerSpec::conv1d(channels, out, k, s, p));
          length = engine::conv_output_length(length, {channels, out, k, s, p});
        }
      }
      channels = out;
      if (d + 1 < depth) specs.push_back(uniform_int(0, 2) == 0 ? LayerSpec::sigmoid() : LayerSpec::relu());
    }
    specs.push_back(LayerSpec::sigmoid());

    engine::Sequential<double> net(specs);
    net.init(rng);
    for (auto& l : net.layers())
      for (auto& b : l.bias()) b = 0.1 * gauss(rng);
    Tensor3<double> x(batch, in_channels, in_length);
    for (auto& v : x.data) v = gauss(rng);
    Tensor3<double> y(batch, channels, length);
    for (auto& v : y.data) v = unit(rng);
    const auto report = engine::grad_check(engine::make_mse_target(net, x, y), 1e-4, 10000, seed + c);
    summary.max_rel_error = std::max(summary.max_rel_error, report.max_rel_error);
    summary.skipped_kinks += report.skipped_kinks;
    summary.checked += report.checked;
    ++summary.configs;
  }

  // Full pyramid graph at a small size.
  ssad::SsadConfig small;
  small.input_length = 16;
  small.feature_dim = 3;
  small.hidden = 4;
  small.base_kernel = 3;
  small.layer_lengths = {1, 2, 4};
  auto model = ssad::build_model(small, seed).cast<double>();
  ssad::SsadNet<double> net(model, small.layer_lengths, static_cast<int>(small.ratios.size()));
  Tensor3<double> x(2, small.feature_dim, small.input_length);
  for (auto& v : x.data) v = gauss(rng);
  const int anchors = 7 * static_cast<int>(small.ratios.size());
  Tensor3<double> y(2, 1, anchors);
  for (auto& v : y.data) v = unit(rng);
  engine::GradCheckTarget target;
  target.params = model.params();
  target.loss = [&] { return engine::mse_loss(net.forward(x), y).loss; };
  target.loss_and_grad = [&] {
    model.zero_grad();
    auto r = engine::mse_loss(net.forward(x), y);
    net.backward(r.grad);
    return r.loss;
  };
  target.kink_signature = [&] { return model.relu_signature(); };
  const auto report = engine::grad_check(target, 1e-4, 10000, seed);
  summary.ssad_rel_error = report.max_rel_error;
  summary.checked += report.checked;
  summary.max_rel_error = std::max(summary.max_rel_error, report.max_rel_error);
  summary.skipped_kinks += report.skipped_kinks;
  return summary;
}

// ---------------------------------------------------------------------------
// Stages

namespace {

struct StageContext {
  const PipelineConfig& cfg;
  std::vector<fs::path> outputs;

  void wrote(const fs::path& p) { outputs.push_back(p); }
};

void log(const std::string& msg) { std::cerr << "[tapkit] " << msg << '\n'; }

void require(const fs::path& path, const std::string& stage, const std::string& producer) {
  if (!fs::exists(path))
    throw Error(ErrorCode::kStageDependency, stage + " needs " + path.string() + "; run `tapkit " + producer +
                                                 "` first");
}

std::string format_number(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

std::string threshold_key(double t) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", t);
  std::string s = buf;
  while (s.size() > 3 && s.back() == '0') s.pop_back();
  return s;
}

std::map<std::string, FeatureSequence> load_feature_set(const PipelineConfig& cfg, const std::vector<std::string>& ids,
                                                        const std::string& stage) {
  std::map<std::string, FeatureSequence> out;
  for (const auto& id : ids) {
    const fs::path p = cfg.features_dir() / (id + ".tapf");
    require(p, stage, "synth");
    out.emplace(id, load_features(p, id));
  }
  return out;
}

void write_loss_csv(const std::vector<double>& trace, const fs::path& path) {
  std::ostringstream os;
  os << "epoch,loss\n";
  for (std::size_t i = 0; i < trace.size(); ++i) os << i + 1 << ',' << format_number(trace[i]) << '\n';
  write_text_atomic(path, os.str());
}

DatasetIndex load_dataset(const PipelineConfig& cfg, const std::string& stage) {
  require(cfg.annotations_path(), stage, "synth");
  return load_annotations(cfg.annotations_path());
}

void stage_synth(StageContext& ctx) {
  const auto& cfg = ctx.cfg;
  SynthConfig sc = cfg.synth;
  sc.seed = synth_seed(cfg);
  const auto data = generate_synthetic(sc);
  const fs::path ann = cfg.out("annotations.json");
  save_annotations(data.index, ann);
  ctx.wrote(ann);
  for (const auto& [id, seq] : data.features) {
    const fs::path p = cfg.out("features") / (id + ".tapf");
    save_features(seq, p);
    ctx.wrote(p);
  }
  // Oracle video-level labels standing in for an external classifier.
  ClassificationResult classes;
  for (const auto& [id, rec] : data.index.videos()) {
    std::map<std::string, int> counts;
    for (const auto& inst : rec.instances) ++counts[inst.label];
    std::vector<ClassScore> list;
    for (const auto& [label, n] : counts) list.push_back({label, 1.0});
    if (list.empty()) list.push_back({data.index.label_set().front(), 1.0});
    classes[id] = std::move(list);
  }
  const fs::path cls = cfg.out("classification.json");
  write_classification(classes, cls);
  ctx.wrote(cls);
  log("synth: " + std::to_string(data.index.videos().size()) + " videos");
}

void stage_train_ssad(StageContext& ctx) {
  const auto& cfg = ctx.cfg;
  const DatasetIndex dataset = load_dataset(cfg, "train-ssad");
  auto raw = load_feature_set(cfg, dataset.ids(Subset::kTraining), "train-ssad");
  std::map<std::string, FeatureSequence> resized;
  for (const auto& [id, seq] : raw) {
    if (static_cast<int>(seq.dim()) != cfg.ssad.feature_dim)
      throw Error(ErrorCode::kConfig, "ssad.feature_dim is " + std::to_string(cfg.ssad.feature_dim) +
                                          " but features have dimension " + std::to_string(seq.dim()));
    resized.emplace(id, resize_linear(seq, static_cast<std::size_t>(cfg.ssad.input_length)));
  }
  auto model = ssad::build_model(cfg.ssad, ssad_seed(cfg));
  const auto trace = ssad::train(model, dataset, resized, cfg.ssad, ssad_seed(cfg));
  const fs::path m = cfg.out("models/ssad.tapm");
  engine::save_model(model, m);
  ctx.wrote(m);
  const fs::path l = cfg.out("ssad_loss.csv");
  write_loss_csv(trace, l);
  ctx.wrote(l);
  if (!trace.empty())
    log("train-ssad: epoch 1 loss " + format_number(trace.front()) + ", final " + format_number(trace.back()));
}

void stage_train_tag(StageContext& ctx) {
  const auto& cfg = ctx.cfg;
  const DatasetIndex dataset = load_dataset(cfg, "train-tag");
  const auto feats = load_feature_set(cfg, dataset.ids(Subset::kTraining), "train-tag");
  if (feats.empty()) throw Error(ErrorCode::kConfig, "train-tag: no training videos");
  auto model = tag::build_actionness_model(static_cast<int>(feats.begin()->second.dim()), cfg.tag.hidden, tag_seed(cfg));
  const auto trace = tag::train_actionness(model, dataset, feats, cfg.tag, tag_seed(cfg));
  const fs::path m = cfg.out("models/tag.tapm");
  engine::save_model(model, m);
  ctx.wrote(m);
  const fs::path l = cfg.out("tag_loss.csv");
  write_loss_csv(trace, l);
  ctx.wrote(l);
  if (!trace.empty())
    log("train-tag: epoch 1 loss " + format_number(trace.front()) + ", final " + format_number(trace.back()));
}

void stage_infer(StageContext& ctx) {
  const auto& cfg = ctx.cfg;
  const DatasetIndex dataset = load_dataset(cfg, "infer");
  require(cfg.out("models/ssad.tapm"), "infer", "train-ssad");
  require(cfg.out("models/tag.tapm"), "infer", "train-tag");
  const auto ssad_model = engine::load_model(cfg.out("models/ssad.tapm"));
  const auto tag_model = engine::load_model(cfg.out("models/tag.tapm"));
  const auto ids = dataset.ids(cfg.eval.subset);
  const auto feats = load_feature_set(cfg, ids, "infer");

  std::vector<ProposalSet> p_ssad(ids.size()), p_tag(ids.size()), p_base(ids.size());
  std::vector<std::vector<double>> actionness(ids.size());
  parallel_for(ids.size(), thread_count(), [&](std::size_t begin, std::size_t end, int) {
    auto sm = ssad_model;
    auto tm = tag_model;
    for (std::size_t i = begin; i < end; ++i) {
      const auto& rec = dataset.at(ids[i]);
      const auto& raw = feats.at(ids[i]);
      p_ssad[i] = ssad::infer(sm, resize_linear(raw, static_cast<std::size_t>(cfg.ssad.input_length)), rec, cfg.ssad);
      auto act = tag::predict_actionness(tm, raw);
      p_tag[i] = tag::tag_proposals(act, cfg.tag, rec);
      actionness[i] = std::move(act.values);
      p_base[i] = uniform_random_proposals(rec, cfg.eval.baseline_proposals, baseline_seed(cfg));
    }
  });

  ProposalMap ms, mt, mb;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    ms.emplace(ids[i], std::move(p_ssad[i]));
    mt.emplace(ids[i], std::move(p_tag[i]));
    mb.emplace(ids[i], std::move(p_base[i]));
    if (cfg.export_actionness) {
      const fs::path p = cfg.out("actionness") / (ids[i] + ".csv");
      write_series_csv(actionness[i], p);
      ctx.wrote(p);
    }
  }
  for (const auto& [name, map] : {std::pair<const char*, const ProposalMap*>{"proposals_ssad.json", &ms},
                                  {"proposals_tag.json", &mt},
                                  {"proposals_baseline.json", &mb}}) {
    write_proposals(*map, cfg.out(name));
    ctx.wrote(cfg.out(name));
  }
  log("infer: " + std::to_string(ids.size()) + " videos");
}

void stage_refine(StageContext& ctx) {
  const auto& cfg = ctx.cfg;
  require(cfg.out("proposals_ssad.json"), "refine", "infer");
  require(cfg.out("proposals_tag.json"), "refine", "infer");
  const auto ms = read_proposals(cfg.out("proposals_ssad.json"));
  const auto mt = read_proposals(cfg.out("proposals_tag.json"));
  ProposalMap refined, unrefined;
  for (const auto& [id, set] : ms) {
    auto it = mt.find(id);
    const ProposalSet empty(id, {});
    const ProposalSet& tag_set = it == mt.end() ? empty : it->second;
    refined.emplace(id, fusion::finalize(set, &tag_set, cfg.refine, cfg.nms, cfg.nms_placement));
    unrefined.emplace(id, fusion::finalize(set, nullptr, cfg.refine, cfg.nms, cfg.nms_placement));
  }
  write_proposals(refined, cfg.out("proposals_refined.json"));
  ctx.wrote(cfg.out("proposals_refined.json"));
  write_proposals(unrefined, cfg.out("proposals_unrefined.json"));
  ctx.wrote(cfg.out("proposals_unrefined.json"));
  log("refine: " + std::to_string(refined.size()) + " videos, nms " + fusion::to_string(cfg.nms_placement));
}

json prop_report(const ProposalMap& proposals, const eval::GroundTruthMap& gt, const PipelineConfig& cfg,
                 eval::ArAnCurve* curve_out) {
  const auto grid = eval::default_tiou_grid();
  auto curve = eval::ar_an(proposals, gt, cfg.eval.an_max, grid);
  json ar_at = json::object();
  for (int an : {1, 10, 100})
    if (an <= cfg.eval.an_max) ar_at[std::to_string(an)] = curve.ar[an - 1];
  json recall_at = json::object();
  for (double t : grid) recall_at[threshold_key(t)] = eval::recall(proposals, gt, cfg.eval.an_max, t);
  json r = {{"ar_at", ar_at}, {"ar_an_area", curve.area}, {"curve", curve.ar}, {"recall_at_an_max", recall_at}};
  if (curve_out) *curve_out = std::move(curve);
  return r;
}

void stage_eval_prop(StageContext& ctx) {
  const auto& cfg = ctx.cfg;
  const DatasetIndex dataset = load_dataset(cfg, "eval-prop").filtered(cfg.eval.subset);
  require(cfg.out("proposals_refined.json"), "eval-prop", "refine");
  require(cfg.out("proposals_unrefined.json"), "eval-prop", "refine");
  require(cfg.out("proposals_baseline.json"), "eval-prop", "infer");
  const auto gt = eval::ground_truth(dataset);

  eval::ArAnCurve refined_curve, unrefined_curve, base_curve;
  json refined = prop_report(read_proposals(cfg.out("proposals_refined.json")), gt, cfg, &refined_curve);
  json unrefined = prop_report(read_proposals(cfg.out("proposals_unrefined.json")), gt, cfg, &unrefined_curve);
  json base = prop_report(read_proposals(cfg.out("proposals_baseline.json")), gt, cfg, &base_curve);

  json report = refined;
  report["methods"] = {{"uniform_random", base}, {"prop_ssad", unrefined}, {"refined_prop_ssad", refined}};
  write_text_atomic(cfg.out("eval_prop.json"), report.dump(1) + "\n");
  ctx.wrote(cfg.out("eval_prop.json"));

  std::ostringstream csv;
  csv << "an,uniform_random,prop_ssad,refined_prop_ssad\n";
  for (std::size_t i = 0; i < refined_curve.ar.size(); ++i)
    csv << i + 1 << ',' << format_number(base_curve.ar[i]) << ',' << format_number(unrefined_curve.ar[i]) << ','
        << format_number(refined_curve.ar[i]) << '\n';
  write_text_atomic(cfg.out("ar_an_curve.csv"), csv.str());
  ctx.wrote(cfg.out("ar_an_curve.csv"));
  log("eval-prop: AR-AN area uniform " + format_number(base_curve.area) + ", prop-ssad " +
      format_number(unrefined_curve.area) + ", refined " + format_number(refined_curve.area));
}

void stage_eval_loc(StageContext& ctx) {
  const auto& cfg = ctx.cfg;
  const DatasetIndex dataset = load_dataset(cfg, "eval-loc").filtered(cfg.eval.subset);
  require(cfg.out("proposals_refined.json"), "eval-loc", "refine");
  require(cfg.classification_path(), "eval-loc", "synth");
  const auto proposals = read_proposals(cfg.out("proposals_refined.json"));
  const auto classes = read_classification(cfg.classification_path());
  const auto loc = eval::attach_labels(proposals, classes, cfg.eval.top_c);
  write_localization(loc, cfg.out("localization.json"));
  ctx.wrote(cfg.out("localization.json"));

  const auto grid = eval::default_tiou_grid();
  json by_threshold = json::object();
  std::ostringstream csv;
  csv << "tiou,map\n";
  double sum = 0.0;
  for (double t : grid) {
    const auto rep = eval::mean_ap(loc, dataset, t);
    for (const auto& label : rep.excluded)
      if (t == grid.front()) log("eval-loc: class " + label + " has no ground truth; excluded from mAP");
    by_threshold[threshold_key(t)] = rep.map;
    sum += rep.map;
    csv << threshold_key(t) << ',' << format_number(rep.map) << '\n';
  }
  json table = json::object();
  for (const char* k : {"0.5", "0.75", "0.95"}) table[k] = by_threshold[k];
  json at_n = json::object();
  for (int n : cfg.eval.at_n) at_n[std::to_string(n)] = eval::eval_at_n(loc, dataset, n, grid);
  const json report = {{"map", table},
                       {"average_map", sum / static_cast<double>(grid.size())},
                       {"map_by_threshold", by_threshold},
                       {"average_map_at_n", at_n}};
  write_text_atomic(cfg.out("eval_loc.json"), report.dump(1) + "\n");
  ctx.wrote(cfg.out("eval_loc.json"));
  write_text_atomic(cfg.out("map_thresholds.csv"), csv.str());
  ctx.wrote(cfg.out("map_thresholds.csv"));
  log("eval-loc: average mAP " + format_number(sum / static_cast<double>(grid.size())));
}

void stage_gradcheck(StageContext& ctx) {
  const auto& cfg = ctx.cfg;
  const auto s = run_gradcheck(cfg.gradcheck_configs, cfg.seed);
  const json report = {{"configs", s.configs},
                       {"max_rel_error", s.max_rel_error},
                       {"ssad_rel_error", s.ssad_rel_error},
                       {"checked_params", s.checked},
                       {"skipped_kinks", s.skipped_kinks}};
  write_text_atomic(cfg.out("gradcheck.json"), report.dump(1) + "\n");
  ctx.wrote(cfg.out("gradcheck.json"));
  std::cout << "gradcheck: " << s.configs << " random stacks + Prop-SSAD, " << s.checked
            << " parameters, max relative error " << format_number(s.max_rel_error) << '\n';
}

using StageFn = void (*)(StageContext&);

const std::vector<std::pair<std::string, StageFn>>& stage_table() {
  static const std::vector<std::pair<std::string, StageFn>> table{
      {"synth", stage_synth},         {"train-ssad", stage_train_ssad}, {"train-tag", stage_train_tag},
      {"infer", stage_infer},         {"refine", stage_refine},         {"eval-prop", stage_eval_prop},
      {"eval-loc", stage_eval_loc},   {"gradcheck", stage_gradcheck},
  };
  return table;
}

RunManifest finish(const std::string& command, const PipelineConfig& cfg, const std::vector<fs::path>& outputs,
                   std::chrono::steady_clock::time_point t0) {
  RunManifest m;
  m.command = command;
  m.config = to_json(cfg);
  m.seed = cfg.seed;
  for (const auto& p : outputs) m.checksums.emplace_back(fs::relative(p, cfg.paths.output_dir).generic_string(), sha256_file(p));
  std::sort(m.checksums.begin(), m.checksums.end());
  m.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_text_atomic(cfg.out("manifests") / (command + ".json"), m.to_json().dump(1) + "\n");
  return m;
}

}  // namespace

const std::vector<std::string>& commands() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& [name, fn] : stage_table()) n.push_back(name);
    n.push_back("pipeline");
    return n;
  }();
  return names;
}

RunManifest run(const std::string& command, const PipelineConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  fs::create_directories(cfg.paths.output_dir);
  StageContext ctx{cfg, {}};
  if (command == "pipeline") {
    for (const auto& [name, fn] : stage_table()) {
      if (name == "gradcheck") continue;
      const auto st = std::chrono::steady_clock::now();
      StageContext stage_ctx{cfg, {}};
      fn(stage_ctx);
      finish(name, cfg, stage_ctx.outputs, st);
      ctx.outputs.insert(ctx.outputs.end(), stage_ctx.outputs.begin(), stage_ctx.outputs.end());
    }
    return finish(command, cfg, ctx.outputs, t0);
  }
  for (const auto& [name, fn] : stage_table()) {
    if (name == command) {
      fn(ctx);
      return finish(command, cfg, ctx.outputs, t0);
    }
  }
  throw Error(ErrorCode::kConfig, "unknown command \"" + command + "\"");
}

}  // namespace tapkit::pipeline
