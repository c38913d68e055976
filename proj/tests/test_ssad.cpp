#include <cmath>
#include <random>

#include "doctest.h"
#include "tapkit/engine/adam.hpp"
#include "tapkit/engine/ops.hpp"
#include "tapkit/error.hpp"
#include "tapkit/pipeline.hpp"
#include "tapkit/ssad.hpp"
#include "tapkit/synth.hpp"

using namespace tapkit;
using namespace tapkit::ssad;

namespace {

void zero_weights(engine::Model<float>& m) {
  for (auto& seg : m.segments)
    for (auto& l : seg.layers()) {
      std::fill(l.weight().begin(), l.weight().end(), 0.f);
      std::fill(l.bias().begin(), l.bias().end(), 0.f);
    }
}

SsadConfig small_config() {
  SsadConfig cfg;
  cfg.input_length = 64;
  cfg.layer_lengths = {1, 2, 4, 8, 16};
  cfg.hidden = 16;
  return cfg;
}

}  // namespace

TEST_SUITE("prop_ssad") {
  TEST_CASE("anchor pyramid examples") {
    auto p = build_anchor_pyramid({2}, {1.0});
    REQUIRE(p.size() == 2);
    CHECK(p.anchors[0].interval == TemporalInterval(0, 0.5));
    CHECK(p.anchors[1].interval == TemporalInterval(0.5, 1.0));
    p = build_anchor_pyramid({1}, {1.0});
    REQUIRE(p.size() == 1);
    CHECK(p.anchors[0].interval == TemporalInterval(0, 1));
    CHECK(build_anchor_pyramid(SsadConfig{}).size() == 381);
    CHECK_THROWS_AS(build_anchor_pyramid({2}, {0.0}), Error);
    CHECK_THROWS_AS(build_anchor_pyramid({2}, {-0.5}), Error);
  }

  TEST_CASE("anchor pyramid geometry and ordering") {
    const SsadConfig cfg;
    const auto p = build_anchor_pyramid(cfg);
    std::size_t i = 0;
    for (std::size_t k = 0; k < cfg.layer_lengths.size(); ++k) {
      const int L = cfg.layer_lengths[k];
      for (int cell = 0; cell < L; ++cell)
        for (std::size_t r = 0; r < cfg.ratios.size(); ++r, ++i) {
          const auto& a = p.anchors[i];
          CHECK(a.layer == static_cast<int>(k));
          CHECK(a.cell == cell);
          CHECK(a.ratio_index == static_cast<int>(r));
          const double c = (cell + 0.5) / L, w = cfg.ratios[r] / L;
          CHECK(a.interval.start() == doctest::Approx(std::max(0.0, c - w / 2)).epsilon(1e-15));
          CHECK(a.interval.end() == doctest::Approx(std::min(1.0, c + w / 2)).epsilon(1e-15));
        }
    }
    CHECK(i == p.size());
  }

  TEST_CASE("target assignment") {
    const auto p = build_anchor_pyramid({4}, {1.0});
    const TemporalInterval exact(0.25, 0.5);
    auto t = assign_targets(p, std::span(&exact, 1));
    CHECK(t[1] == 1.0);
    t = assign_targets(p, {});
    for (double v : t) CHECK(v == 0.0);

    const auto half = build_anchor_pyramid({2}, {1.0});
    const std::vector<TemporalInterval> gt{{0.25, 0.75}, {0.9, 1.0}};
    CHECK(assign_targets(half, gt)[0] == doctest::Approx(1.0 / 3.0));

    const TemporalInterval outside(0.5, 1.5);
    CHECK_THROWS_AS(assign_targets(p, std::span(&outside, 1)), Error);
  }

  TEST_CASE("adding ground truth never lowers a target") {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0, 1);
    const auto p = build_anchor_pyramid(SsadConfig{});
    for (int r = 0; r < 50; ++r) {
      std::vector<TemporalInterval> gt;
      auto prev = assign_targets(p, gt);
      for (int k = 0; k < 4; ++k) {
        double a = u(rng), b = u(rng);
        if (a == b) continue;
        gt.emplace_back(std::min(a, b), std::max(a, b));
        const auto next = assign_targets(p, gt);
        for (std::size_t i = 0; i < next.size(); ++i) CHECK(next[i] >= prev[i]);
        prev = next;
      }
    }
  }

  TEST_CASE("model shapes match the anchor count") {
    for (const auto& cfg : {SsadConfig{}, small_config()}) {
      auto m = build_model(cfg, 1);
      SsadNet<float> net(m, cfg.layer_lengths, static_cast<int>(cfg.ratios.size()));
      engine::Tensor3<float> x(1, cfg.feature_dim, cfg.input_length, 0.1f);
      const auto y = net.forward(x);
      CHECK(y.c == 1);
      CHECK(static_cast<std::size_t>(y.t) == build_anchor_pyramid(cfg).size());
      CHECK(net.num_maps() == cfg.layer_lengths.size());
    }
    CHECK(build_anchor_pyramid(small_config()).size() == 31 * 3);
  }

  TEST_CASE("configuration consistency") {
    auto cfg = small_config();
    CHECK_NOTHROW(cfg.validate());
    cfg.layer_lengths = {1, 2, 4, 8, 16, 32, 64};
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = SsadConfig{};
    cfg.input_length = 250;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = SsadConfig{};
    cfg.base_kernel = 4;
    CHECK_THROWS_AS(cfg.validate(), Error);
  }

  TEST_CASE("zero weights predict 0.5 everywhere") {
    const auto cfg = small_config();
    auto m = build_model(cfg, 3);
    zero_weights(m);
    SsadNet<float> net(m, cfg.layer_lengths, 3);
    const auto y = net.forward(engine::Tensor3<float>(2, cfg.feature_dim, cfg.input_length));
    for (float v : y.data) CHECK(v == 0.5f);

    const VideoRecord video{"v", 100.0, Subset::kValidation, {}};
    const FeatureSequence f("v", static_cast<std::size_t>(cfg.input_length), static_cast<std::size_t>(cfg.feature_dim),
                            std::vector<float>(static_cast<std::size_t>(cfg.input_length * cfg.feature_dim), 1.f));
    auto top = cfg;
    top.top_k = 1000;
    const auto ps = infer(m, f, video, top);
    CHECK(ps.size() == build_anchor_pyramid(cfg).size());
    for (std::size_t i = 1; i < ps.size(); ++i) {
      const auto& a = ps.proposals()[i - 1].interval;
      const auto& b = ps.proposals()[i].interval;
      CHECK(ps.proposals()[i].score == 0.5);
      CHECK((a.start() < b.start() || (a.start() == b.start() && a.length() <= b.length())));
    }
    for (const auto& p : ps.proposals()) {
      CHECK(p.interval.start() >= 0.0);
      CHECK(p.interval.end() <= 100.0);
      CHECK(p.source == ProposalSource::kSsad);
    }
    top.top_k = 10;
    CHECK(infer(m, f, video, top).size() == 10);
    const FeatureSequence wrong("v", 10, static_cast<std::size_t>(cfg.feature_dim),
                                std::vector<float>(static_cast<std::size_t>(10 * cfg.feature_dim)));
    CHECK_THROWS_AS(infer(m, wrong, video, cfg), Error);
  }

  TEST_CASE("training: no-op, determinism, loss reduction") {
    auto cfg = small_config();
    SynthConfig sc;
    sc.num_videos = 50;
    sc.validation_fraction = 0.0;
    const auto data = generate_synthetic(sc);
    std::map<std::string, FeatureSequence> feats;
    for (const auto& [id, f] : data.features) feats.emplace(id, resize_linear(f, 64));

    auto m0 = build_model(cfg, 5);
    const auto init = m0;
    cfg.epochs = 0;
    CHECK(train(m0, data.index, feats, cfg, 5).empty());
    CHECK(m0.segments[0].layers()[0].weight() == init.segments[0].layers()[0].weight());

    cfg.epochs = 30;
    auto a = build_model(cfg, 5);
    auto b = build_model(cfg, 5);
    const auto ta = train(a, data.index, feats, cfg, 5);
    const auto tb = train(b, data.index, feats, cfg, 5);
    CHECK(ta == tb);
    REQUIRE(ta.size() == 30);
    CHECK(ta.back() < 0.5 * ta.front());
  }

  TEST_CASE("constant targets are fitted") {
    const auto cfg = small_config();
    auto m = build_model(cfg, 8).cast<double>();
    SsadNet<double> net(m, cfg.layer_lengths, 3);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g;
    engine::Tensor3<double> x(1, cfg.feature_dim, cfg.input_length);
    for (auto& v : x.data) v = g(rng);
    const int anchors = static_cast<int>(build_anchor_pyramid(cfg).size());
    const engine::Tensor3<double> target(1, 1, anchors, 0.3);
    engine::AdamState st;
    engine::AdamConfig ac;
    ac.lr = 1e-2;
    auto params = m.params();
    double loss = 1.0;
    for (int it = 0; it < 300; ++it) {
      m.zero_grad();
      auto r = engine::mse_loss(net.forward(x), target);
      loss = r.loss;
      net.backward(r.grad);
      engine::adam_step(params, st, ac);
    }
    CHECK(loss < 1e-3);
  }

  TEST_CASE("full model gradient check") {
    const auto s = pipeline::run_gradcheck(1, 77);
    CHECK(s.ssad_rel_error < 1e-3);
  }
}
