#include <algorithm>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "tapkit/error.hpp"
#include "tapkit/fusion.hpp"

using namespace tapkit;
using namespace tapkit::fusion;

namespace {

ProposalSet random_set(std::mt19937_64& rng, const std::string& id, int max_n, ProposalSource src) {
  std::uniform_int_distribution<int> pos(0, 20);
  std::uniform_int_distribution<int> score(0, 10);
  std::vector<Proposal> ps;
  const int n = static_cast<int>(rng() % static_cast<unsigned>(max_n + 1));
  for (int i = 0; i < n; ++i) {
    const int s = pos(rng);
    ps.push_back({{double(s), double(s + 1 + pos(rng) % 8)}, score(rng) / 10.0, src});
  }
  return ProposalSet(id, ps);
}

std::vector<double> scores(const ProposalSet& s) {
  std::vector<double> out;
  for (const auto& p : s.proposals()) out.push_back(p.score);
  return out;
}

}  // namespace

TEST_SUITE("fusion") {
  TEST_CASE("refine examples") {
    const RefineConfig cfg;
    ProposalSet ssad("v", {{{0, 10}, 0.9}});
    auto out = refine(ssad, ProposalSet("v", {{{0.5, 10}, 0.4, ProposalSource::kTag}}), cfg);
    REQUIRE(out.size() == 1);
    CHECK(out.proposals()[0].interval == TemporalInterval(0.5, 10));
    CHECK(out.proposals()[0].score == 0.9);
    CHECK(out.proposals()[0].source == ProposalSource::kRefined);

    out = refine(ssad, ProposalSet("v", {{{5, 15}, 0.4, ProposalSource::kTag}}), cfg);
    CHECK(out.proposals()[0].interval == TemporalInterval(0, 10));
    CHECK(out.proposals()[0].source == ProposalSource::kSsad);

    // tIoU exactly 0.75: [0,4] vs [1,4]
    out = refine(ProposalSet("v", {{{0, 4}, 0.9}}), ProposalSet("v", {{{1, 4}, 0.4}}), cfg);
    CHECK(out.proposals()[0].interval == TemporalInterval(0, 4));

    CHECK_THROWS_AS(refine(ssad, ProposalSet("w", {}), cfg), Error);
  }

  TEST_CASE("refine conflicts: highest tIoU wins") {
    ProposalSet ssad("v", {{{0, 10}, 0.9}});
    ProposalSet tag("v", {{{0, 9}, 0.9}, {{0, 9.5}, 0.1}});
    const auto out = refine(ssad, tag, {});
    CHECK(out.proposals()[0].interval == TemporalInterval(0, 9.5));
  }

  TEST_CASE("refine preserves count and scores; empty TAG set is the identity") {
    std::mt19937_64 rng(12);
    for (int r = 0; r < 500; ++r) {
      const auto ssad = random_set(rng, "v", 10, ProposalSource::kSsad);
      const auto tag = random_set(rng, "v", 10, ProposalSource::kTag);
      const auto out = refine(ssad, tag, {});
      CHECK(out.size() == ssad.size());
      auto a = scores(ssad), b = scores(out);
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      CHECK(a == b);
      CHECK(std::is_sorted(out.proposals().begin(), out.proposals().end(), proposal_before));

      const auto same = refine(ssad, ProposalSet("v", {}), {});
      for (std::size_t i = 0; i < ssad.size(); ++i) CHECK(same.proposals()[i].interval == ssad.proposals()[i].interval);
    }
  }

  TEST_CASE("nms examples") {
    NmsConfig cfg{0.5, 100};
    const ProposalSet in("v", {{{0, 10}, 0.9}, {{1, 11}, 0.8}, {{20, 30}, 0.7}});
    const auto out = nms(in, cfg);
    REQUIRE(out.size() == 2);
    CHECK(out.proposals()[0].interval == TemporalInterval(0, 10));
    CHECK(out.proposals()[1].interval == TemporalInterval(20, 30));

    const ProposalSet one("v", {{{0, 1}, 0.3}});
    CHECK(nms(one, cfg).size() == 1);

    cfg.iou_threshold = 1.0;
    const ProposalSet dup("v", {{{0, 10}, 0.9}, {{0, 10}, 0.5}, {{0, 9.99}, 0.4}});
    CHECK(nms(dup, cfg).size() == 2);
    CHECK_THROWS_AS((NmsConfig{0.0, 10}.validate()), Error);
    CHECK_THROWS_AS((NmsConfig{0.5, 0}.validate()), Error);
  }

  TEST_CASE("nms matches the greedy oracle and its invariants") {
    std::mt19937_64 rng(77);
    for (int r = 0; r < 1000; ++r) {
      const auto in = random_set(rng, "v", 8, ProposalSource::kSsad);
      const double theta = (1 + rng() % 10) / 10.0;
      const int cap = 1 + static_cast<int>(rng() % 8);
      const auto out = nms(in, {theta, cap});
      const auto ref = oracle::nms(in.proposals(), theta, cap);
      REQUIRE(out.size() == ref.size());
      for (std::size_t i = 0; i < ref.size(); ++i) {
        CHECK(out.proposals()[i].interval == ref[i].interval);
        CHECK(out.proposals()[i].score == ref[i].score);
      }
      for (std::size_t i = 0; i < out.size(); ++i)
        for (std::size_t j = i + 1; j < out.size(); ++j)
          CHECK(tiou(out.proposals()[i].interval, out.proposals()[j].interval) <= theta);
    }
  }

  TEST_CASE("finalize placements") {
    const ProposalSet ssad("v", {{{0, 10}, 0.9}, {{0.2, 10}, 0.8}, {{30, 40}, 0.7}});
    const ProposalSet tag("v", {{{0.5, 10}, 0.5}});
    const RefineConfig rc;
    const NmsConfig nc{0.8, 100};
    CHECK(finalize(ssad, &tag, rc, nc, NmsPlacement::kOff).size() == 3);
    CHECK(finalize(ssad, &tag, rc, nc, NmsPlacement::kAfter).size() == 2);
    CHECK(finalize(ssad, nullptr, rc, {0.8, 1}, NmsPlacement::kOff).size() == 1);
    CHECK(nms_placement_from_string("before") == NmsPlacement::kBefore);
    CHECK_THROWS_AS(nms_placement_from_string("sometimes"), Error);
  }
}
