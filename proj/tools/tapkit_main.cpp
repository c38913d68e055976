// tapkit command-line front end.
//
// Exit codes:
//   0  success
//   1  unexpected failure
//   2  configuration error (bad config, override or flag)
//   3  data error (malformed, corrupt or inconsistent input files)
//   4  training diverged
//   5  missing upstream artifact (run the named producer subcommand first)
//   6  gradcheck error above tolerance

#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "tapkit/error.hpp"
#include "tapkit/pipeline.hpp"
#include "tapkit/results_io.hpp"
#include "tapkit/simd.hpp"

namespace {

constexpr double kGradcheckTolerance = 1e-3;

int exit_code(tapkit::ErrorCode code) {
  using tapkit::ErrorCode;
  switch (code) {
    case ErrorCode::kConfig:
    case ErrorCode::kPlacement:
      return 2;
    case ErrorCode::kParse:
    case ErrorCode::kSchema:
    case ErrorCode::kCorruptFile:
    case ErrorCode::kBadMagic:
    case ErrorCode::kIo:
    case ErrorCode::kIdMismatch:
    case ErrorCode::kMissingLabel:
    case ErrorCode::kShape:
    case ErrorCode::kInvalidInterval:
    case ErrorCode::kOutOfRange:
    case ErrorCode::kDegenerateClip:
    case ErrorCode::kUndefinedMetric:
      return 3;
    case ErrorCode::kDivergence:
      return 4;
    case ErrorCode::kStageDependency:
      return 5;
  }
  return 1;
}

const char* describe(const std::string& cmd) {
  if (cmd == "synth") return "Generate the seeded synthetic dataset (annotations, features, video labels)";
  if (cmd == "train-ssad") return "Train the Prop-SSAD anchor network";
  if (cmd == "train-tag") return "Train the TAG actionness classifier";
  if (cmd == "infer") return "Emit Prop-SSAD, TAG and uniform-random proposals for the evaluation subset";
  if (cmd == "refine") return "Refine Prop-SSAD boundaries with TAG proposals and apply NMS";
  if (cmd == "eval-prop") return "Proposal metrics: AR@AN, AR-AN area, per-threshold recall";
  if (cmd == "eval-loc") return "Localization metrics: mAP per tIoU and average mAP";
  if (cmd == "gradcheck") return "Finite-difference gradient check of the engine in 64-bit";
  return "Run every stage in order";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tapkit: temporal action proposal toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(tapkit::pipeline::kToolVersion));

  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  std::string nms;
  std::string kernels = "auto";
  app.add_option("-c,--config", config_path, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--set", overrides, "Override a config key, e.g. --set ssad.epochs=10 (repeatable)");
  app.add_option("-o,--out", out_dir, "Output directory (paths.output_dir)");
  app.add_option("--nms", nms, "NMS placement relative to refinement")
      ->check(CLI::IsMember({"before", "after", "off"}));
  app.add_option("--kernels", kernels, "Kernel set: auto, scalar, avx2, neon")
      ->check(CLI::IsMember({"auto", "scalar", "avx2", "neon"}));
  bool print_config = false;
  app.add_flag("--print-config", print_config, "Print the resolved config to stdout and exit");

  for (const auto& cmd : tapkit::pipeline::commands()) app.add_subcommand(cmd, describe(cmd));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    if (kernels != "auto") tapkit::simd::select(tapkit::simd::parse_isa(kernels));
    if (!out_dir.empty()) overrides.push_back("paths.output_dir=\"" + out_dir + "\"");
    if (!nms.empty()) overrides.push_back("nms.placement=\"" + nms + "\"");
    const auto cfg = tapkit::pipeline::load_config(config_path, overrides);
    if (print_config) {
      std::cout << tapkit::pipeline::to_json(cfg).dump(2) << '\n';
      return 0;
    }
    std::cerr << "[tapkit] " << command << " (seed " << cfg.seed << ", kernels "
              << tapkit::simd::to_string(tapkit::simd::active().isa) << ", output " << cfg.paths.output_dir.string()
              << ")\n";
    const auto manifest = tapkit::pipeline::run(command, cfg);
    std::cerr << "[tapkit] " << command << " done in " << manifest.wall_time_s << " s\n";
    if (command == "gradcheck") {
      const auto report = nlohmann::json::parse(
          tapkit::read_text(cfg.out("gradcheck.json")));
      if (report.at("max_rel_error").get<double>() >= kGradcheckTolerance) {
        std::cerr << "[tapkit] gradcheck: error above " << kGradcheckTolerance << '\n';
        return 6;
      }
    }
    return 0;
  } catch (const tapkit::Error& e) {
    std::cerr << "tapkit " << command << ": " << tapkit::to_string(e.code()) << ": " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "tapkit " << command << ": " << e.what() << '\n';
    return 1;
  }
}
