#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "tapkit/error.hpp"
#include "tapkit/features.hpp"
#include "tapkit/results_io.hpp"
#include "tapkit/synth.hpp"

using namespace tapkit;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "tapkit_test_ingest";
  fs::create_directories(dir);
  return dir / name;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected tapkit::Error");
  return ErrorCode::kIo;
}

void write_bytes(const fs::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary) << bytes;
}

}  // namespace

TEST_SUITE("ingest") {
  TEST_CASE("annotation parsing") {
    const auto idx = parse_annotations(R"({"version": "1.3", "database": {"v1": {"duration": 20,
        "subset": "validation", "annotations": [{"label": "Surfing", "segment": [5, 10]}]}}})");
    REQUIRE(idx.videos().size() == 1);
    const auto& v = idx.at("v1");
    CHECK(v.subset == Subset::kValidation);
    REQUIRE(v.instances.size() == 1);
    CHECK(v.instances[0].interval == TemporalInterval(5, 10));
    CHECK(idx.label_set() == std::vector<std::string>{"Surfing"});

    CHECK(parse_annotations(R"({"version": "1", "database": {}})").videos().empty());
  }

  TEST_CASE("annotation errors name the video and field") {
    auto message = [](const std::string& text) {
      try {
        parse_annotations(text);
      } catch (const Error& e) {
        return std::string(e.what());
      }
      return std::string();
    };
    const std::string reversed = message(R"({"database": {"v9": {"duration": 20, "subset": "training",
        "annotations": [{"label": "x", "segment": [15, 10]}]}}})");
    CHECK(reversed.find("v9") != std::string::npos);
    CHECK(reversed.find("segment") != std::string::npos);
    CHECK(code_of([] {
            parse_annotations(R"({"database": {"v": {"duration": 20, "subset": "training",
                "annotations": [{"label": "x", "segment": [15, 10]}]}}})");
          }) == ErrorCode::kSchema);
    CHECK(code_of([] {
            parse_annotations(R"({"database": {"v": {"duration": 5, "subset": "training",
                "annotations": [{"label": "x", "segment": [1, 10]}]}}})");
          }) == ErrorCode::kSchema);
    CHECK(code_of([] { parse_annotations("{not json"); }) == ErrorCode::kParse);
    CHECK(code_of([] { parse_annotations(R"({"version": "1"})"); }) == ErrorCode::kSchema);
  }

  TEST_CASE("annotation save/load round trip") {
    const auto idx = DatasetIndex::from_records(
        {VideoRecord{"a", 12.5, Subset::kTraining, {{"run", {0.25, 3.5}}}},
         VideoRecord{"b", 40.0, Subset::kValidation, {}}});
    save_annotations(idx, scratch("ann.json"));
    const auto back = load_annotations(scratch("ann.json"));
    CHECK(back.videos().size() == 2);
    CHECK(back.at("a").instances[0].interval == TemporalInterval(0.25, 3.5));
    CHECK(back.at("b").subset == Subset::kValidation);
  }

  TEST_CASE("resize_linear examples") {
    const FeatureSequence two("v", 2, 1, {0.f, 1.f});
    const auto r = resize_linear(two, 3);
    CHECK(r.data() == std::vector<float>{0.f, 0.5f, 1.f});

    const FeatureSequence one("v", 1, 1, {7.f});
    CHECK(resize_linear(one, 4).data() == std::vector<float>{7.f, 7.f, 7.f, 7.f});
    CHECK_THROWS_AS(resize_linear(one, 0), Error);

    // L == 1 samples the middle position
    const FeatureSequence three("v", 3, 1, {0.f, 4.f, 8.f});
    CHECK(resize_linear(three, 1).data() == std::vector<float>{4.f});
  }

  TEST_CASE("resize_linear: identity at L == T and per-column bounds preserved") {
    std::mt19937_64 rng(2);
    std::normal_distribution<float> g(0.f, 3.f);
    for (int r = 0; r < 50; ++r) {
      const std::size_t T = 1 + rng() % 20, D = 1 + rng() % 4, L = 1 + rng() % 40;
      std::vector<float> data(T * D);
      for (auto& x : data) x = g(rng);
      const FeatureSequence seq("v", T, D, data);
      CHECK(resize_linear(seq, T) == seq);
      const auto out = resize_linear(seq, L);
      REQUIRE(out.length() == L);
      for (std::size_t d = 0; d < D; ++d) {
        float lo = INFINITY, hi = -INFINITY;
        for (std::size_t t = 0; t < T; ++t) {
          lo = std::min(lo, seq.row(t)[d]);
          hi = std::max(hi, seq.row(t)[d]);
        }
        for (std::size_t j = 0; j < L; ++j) {
          CHECK(out.row(j)[d] >= lo);
          CHECK(out.row(j)[d] <= hi);
        }
      }
    }
  }

  TEST_CASE("feature files round trip bit-exactly and reject corruption") {
    std::mt19937_64 rng(9);
    std::normal_distribution<float> g;
    std::vector<float> data(21);
    for (auto& x : data) x = g(rng);
    const FeatureSequence seq("clip", 7, 3, data);
    save_features(seq, scratch("clip.tapf"));
    const auto back = load_features(scratch("clip.tapf"), "clip");
    CHECK(back == seq);

    // header claims 10x4, payload holds 39 values
    std::string bytes = "TAPF";
    auto u32 = [&](std::uint32_t v) {
      for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    };
    u32(1);
    u32(10);
    u32(4);
    bytes.append(39 * 4, '\0');
    write_bytes(scratch("short.tapf"), bytes);
    CHECK(code_of([] { load_features(scratch("short.tapf")); }) == ErrorCode::kCorruptFile);

    bytes.replace(0, 4, "XXXX");
    write_bytes(scratch("magic.tapf"), bytes);
    CHECK(code_of([] { load_features(scratch("magic.tapf")); }) == ErrorCode::kBadMagic);

    std::string nan_file = "TAPF";
    bytes = "";
    u32(1);
    u32(1);
    u32(1);
    const float bad = NAN;
    bytes.append(reinterpret_cast<const char*>(&bad), 4);
    write_bytes(scratch("nan.tapf"), nan_file + bytes);
    CHECK(code_of([] { load_features(scratch("nan.tapf")); }) == ErrorCode::kCorruptFile);
  }

  TEST_CASE("feature CSV import") {
    std::ofstream(scratch("f.csv")) << "1,2\n3,4.5\n\n";
    const auto seq = load_features_csv(scratch("f.csv"), "f");
    CHECK(seq.length() == 2);
    CHECK(seq.dim() == 2);
    CHECK(seq.data() == std::vector<float>{1.f, 2.f, 3.f, 4.5f});
    std::ofstream(scratch("ragged.csv")) << "1,2\n3\n";
    CHECK_THROWS_AS(load_features_csv(scratch("ragged.csv")), Error);
  }

  TEST_CASE("proposal and localization results round trip") {
    ProposalMap props;
    props.emplace("v1", ProposalSet("v1", {{{0.1234567, 3.0}, 0.9}, {{1, 2}, 0.25}}));
    props.emplace("v2", ProposalSet("v2", {{{5, 6}, 0.5}}));
    write_proposals(props, scratch("p.json"));
    const auto back = read_proposals(scratch("p.json"));
    REQUIRE(back.size() == 2);
    REQUIRE(back.at("v1").size() == 2);
    CHECK(back.at("v1").proposals()[0].interval.start() == doctest::Approx(0.1234567).epsilon(1e-6));
    CHECK(back.at("v1").proposals()[1].score == doctest::Approx(0.25));

    LocalizationResult loc;
    loc["v1"] = {{"run", {1, 2}, 0.75}};
    write_localization(loc, scratch("l.json"));
    const auto lback = read_localization(scratch("l.json"));
    CHECK(lback.at("v1")[0].label == "run");
    CHECK(lback.at("v1")[0].score == doctest::Approx(0.75));

    // the localization file is a valid proposal file; the reverse is not
    CHECK(read_proposals(scratch("l.json")).at("v1").size() == 1);
    CHECK(code_of([] { read_localization(scratch("p.json")); }) == ErrorCode::kSchema);
  }

  TEST_CASE("results schema errors") {
    CHECK(code_of([] { parse_proposals(R"({"version": "1"})"); }) == ErrorCode::kSchema);
    CHECK(code_of([] { parse_proposals(R"({"results": {"v": [{"segment": [3], "score": 0.5}]}})"); }) ==
          ErrorCode::kSchema);
  }

  TEST_CASE("classification results") {
    const auto c = parse_classification(R"({"v": [{"label": "b", "score": 0.2}, {"label": "a", "score": 0.7}]})");
    REQUIRE(c.at("v").size() == 2);
    CHECK(c.at("v")[0].label == "a");
    CHECK_THROWS_AS(parse_classification(R"({"v": [{"label": "a", "score": 1.5}]})"), Error);
  }
}

TEST_SUITE("synth") {
  TEST_CASE("deterministic for a seed") {
    SynthConfig cfg;
    cfg.num_videos = 3;
    const auto a = generate_synthetic(cfg);
    const auto b = generate_synthetic(cfg);
    save_annotations(a.index, scratch("sa.json"));
    save_annotations(b.index, scratch("sb.json"));
    CHECK(read_text(scratch("sa.json")) == read_text(scratch("sb.json")));
    CHECK(a.features == b.features);
    cfg.seed = 43;
    CHECK_FALSE(generate_synthetic(cfg).features == a.features);
  }

  TEST_CASE("configuration checks") {
    SynthConfig cfg;
    cfg.num_classes = 5;
    cfg.dim = 4;
    CHECK(code_of([&] { generate_synthetic(cfg); }) == ErrorCode::kConfig);
    cfg = {};
    cfg.noise = 0;
    CHECK(code_of([&] { generate_synthetic(cfg); }) == ErrorCode::kConfig);
  }

  TEST_CASE("instances cannot be packed") {
    SynthConfig cfg;
    cfg.num_videos = 1;
    cfg.min_instances = cfg.max_instances = 3;
    cfg.min_instance_fraction = cfg.max_instance_fraction = 0.5;
    CHECK(code_of([&] { generate_synthetic(cfg); }) == ErrorCode::kPlacement);
  }

  TEST_CASE("structure: snippet counts, subsets, non-overlap") {
    SynthConfig cfg;
    cfg.num_videos = 40;
    const auto data = generate_synthetic(cfg);
    CHECK(data.index.ids(Subset::kValidation).size() == 8);
    CHECK(data.index.ids(Subset::kTraining).size() == 32);
    for (const auto& [id, rec] : data.index.videos()) {
      const auto& f = data.features.at(id);
      CHECK(f.length() == static_cast<std::size_t>(std::ceil(rec.duration / cfg.snippet_length - 1e-9)));
      CHECK(f.dim() == 16u);
      CHECK_NOTHROW(rec.validate());
      for (std::size_t k = 1; k < rec.instances.size(); ++k)
        CHECK(rec.instances[k - 1].interval.end() < rec.instances[k].interval.start());
    }
  }

  TEST_CASE("instance rows carry the class signal") {
    SynthConfig cfg;
    cfg.num_videos = 20;
    const auto data = generate_synthetic(cfg);
    for (const auto& [id, rec] : data.index.videos()) {
      const auto& f = data.features.at(id);
      const double T = static_cast<double>(f.length());
      for (const auto& inst : rec.instances) {
        const int c = std::stoi(inst.label.substr(inst.label.size() - 2));
        double sum = 0;
        int n = 0;
        for (std::size_t t = 0; t < f.length(); ++t) {
          const double center = (t + 0.5) * rec.duration / T;
          if (!inst.interval.contains(center)) continue;
          sum += f.row(t)[c];
          ++n;
        }
        REQUIRE(n > 0);
        CHECK(std::abs(sum / n - cfg.signal) <= 3.0 * cfg.noise / std::sqrt(n));
      }
    }
  }
}
