#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "tapkit/eval.hpp"
#include "tapkit/fusion.hpp"
#include "tapkit/ssad.hpp"
#include "tapkit/synth.hpp"
#include "tapkit/tag.hpp"

namespace tapkit::pipeline {

inline constexpr const char* kToolVersion = "tapkit 0.3.0";

struct Paths {
  std::filesystem::path output_dir = "tapkit_run";
  // Empty means "inside output_dir" (where `synth` writes them).
  std::filesystem::path annotations;
  std::filesystem::path features_dir;
  std::filesystem::path classification;
};

struct EvalOptions {
  int an_max = 100;
  Subset subset = Subset::kValidation;
  int top_c = 1;
  std::vector<int> at_n{1, 5, 10, 25, 100};
  int baseline_proposals = 100;
};

struct PipelineConfig {
  Paths paths;
  SynthConfig synth;
  ssad::SsadConfig ssad;
  tag::TagConfig tag;
  fusion::RefineConfig refine;
  fusion::NmsConfig nms;
  fusion::NmsPlacement nms_placement = fusion::NmsPlacement::kAfter;
  EvalOptions eval;
  std::uint64_t seed = 42;
  int gradcheck_configs = 20;
  bool export_actionness = false;

  std::filesystem::path annotations_path() const;
  std::filesystem::path features_dir() const;
  std::filesystem::path classification_path() const;
  std::filesystem::path out(const std::string& relative) const { return paths.output_dir / relative; }
};

nlohmann::json default_config_json();
nlohmann::json to_json(const PipelineConfig& cfg);
/// Missing keys keep their defaults; unknown keys are a kConfig error.
PipelineConfig from_json(const nlohmann::json& j);

/// Applies "a.b.c=value"; value is parsed as JSON, falling back to a string.
void apply_override(nlohmann::json& j, const std::string& assignment);

/// Loads `path` (may be empty), applies overrides, then TAPKIT_SEED.
PipelineConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides);

struct RunManifest {
  std::string command;
  nlohmann::json config;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> checksums;  // relative path, sha256
  double wall_time_s = 0.0;
  std::string tool_version = kToolVersion;

  nlohmann::json to_json() const;
};

std::string sha256_file(const std::filesystem::path& path);

// Stage seeds derived from the global seed.
std::uint64_t synth_seed(const PipelineConfig& cfg);
std::uint64_t ssad_seed(const PipelineConfig& cfg);
std::uint64_t tag_seed(const PipelineConfig& cfg);
std::uint64_t baseline_seed(const PipelineConfig& cfg);

/// Uniform-random proposals: start and end drawn uniformly over the video.
ProposalSet uniform_random_proposals(const VideoRecord& video, int count, std::uint64_t seed);

struct GradcheckSummary {
  double max_rel_error = 0.0;
  double ssad_rel_error = 0.0;
  int configs = 0;
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;
};

/// Random conv/relu/sigmoid/dense stacks plus a small full Prop-SSAD model,
/// all in 64-bit.
GradcheckSummary run_gradcheck(int configs, std::uint64_t seed);

/// Runs one subcommand (synth, train-ssad, train-tag, infer, refine,
/// eval-prop, eval-loc, gradcheck, pipeline), writes its outputs and
/// manifests/<command>.json under the output dir.
RunManifest run(const std::string& command, const PipelineConfig& cfg);

const std::vector<std::string>& commands();

}  // namespace tapkit::pipeline
