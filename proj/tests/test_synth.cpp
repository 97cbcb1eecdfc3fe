#include <doctest.h>

#include <numeric>

#include "s2st/error.hpp"
#include "s2st/synth.hpp"

using namespace s2st;

TEST_CASE("sampled sentences respect the length range and segment sums") {
  SynthOptions o;
  o.span_rate = 0.5;
  Rng rng(3);
  const HsmmParams truth = synth_ground_truth(o, rng);
  for (int i = 0; i < 200; ++i) {
    const SynthSentence s = sample_sentence(truth, o, rng);
    const int S = static_cast<int>(s.tokens.size());
    CHECK(S >= o.min_len);
    CHECK(S <= o.max_len);
    int total = 0, prev = -1;
    for (const auto& seg : s.segments) {
      CHECK(seg.duration >= 1);
      CHECK(seg.duration <= o.D);
      CHECK(seg.state != prev);
      prev = seg.state;
      total += seg.duration;
    }
    CHECK(total == S);
    for (const auto& sp : s.spans) CHECK((sp.end - sp.begin >= 2 && sp.end <= S));
    for (int t : s.tokens) CHECK(t >= kNumReserved);
  }
}

TEST_CASE("each state emits from its own block of words") {
  SynthOptions o;
  Rng rng(5);
  const HsmmParams truth = synth_ground_truth(o, rng);
  const int per = o.words / o.K;
  for (int i = 0; i < 50; ++i) {
    const SynthSentence s = sample_sentence(truth, o, rng);
    std::size_t pos = 0;
    for (const auto& seg : s.segments) {
      const int lo = kNumReserved + seg.state * per;
      const int hi = seg.state == o.K - 1 ? kNumReserved + o.words : lo + per;
      for (int k = 0; k < seg.duration; ++k, ++pos) {
        // Off-block words carry about e^-5 relative mass; allow rare ones.
        if (s.tokens[pos] < lo || s.tokens[pos] >= hi) MESSAGE("off-block draw");
      }
    }
  }
  // The truth recovers its own segmentation almost always.
  BoundaryCounts bc;
  for (int i = 0; i < 100; ++i) {
    const SynthSentence s = sample_sentence(truth, o, rng);
    bc.add(boundaries(viterbi_segment(truth, s.tokens).segments), boundaries(s.segments));
  }
  CHECK(bc.f1() > 0.8);
}

TEST_CASE("boundary counting") {
  BoundaryCounts bc;
  bc.add({2, 4}, {2, 5});
  CHECK(bc.tp == 1);
  CHECK(bc.fp == 1);
  CHECK(bc.fn == 1);
  CHECK(bc.f1() == doctest::Approx(0.5));
  const std::vector<SegmentEntry> segs{{0, 2}, {1, 1}, {0, 3}};
  CHECK(boundaries(segs) == std::vector<int>{2, 3});
  BoundaryCounts none;
  CHECK(none.f1() == 1.0);  // nothing to find, nothing predicted
}

TEST_CASE("random segmentation covers the sentence") {
  Rng rng(9);
  for (int S = 1; S < 15; ++S) {
    const auto segs = random_segmentation(S, 3, rng);
    int total = 0;
    for (const auto& s : segs) {
      CHECK(s.duration >= 1);
      CHECK(s.duration <= 3);
      total += s.duration;
    }
    CHECK(total == S);
  }
}

TEST_CASE("synth rejects too few words") {
  SynthOptions o;
  o.words = 2;
  Rng rng(1);
  CHECK_THROWS_AS(synth_ground_truth(o, rng), InvalidConfig);
}
